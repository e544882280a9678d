"""Nudging, determining modes and a priori bounds for the damped driven KdV equation."""

__version__ = "0.1.0"
