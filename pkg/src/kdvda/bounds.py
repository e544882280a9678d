"""Closed-form a-priori bounds and admissibility conditions.

The chain of bounds for solutions of the nudged equation is evaluated in
order: the crude L2 bound and the H1 bound built on it, the improved L2
bound, improved H1, H2 bounds, sup-norm and time-derivative bounds.  Every
bound takes the unnamed universal constant ``c`` as an input (default 1).
Conditions on the number of observed modes ``m`` are then checked against
the bounds, which themselves do not depend on ``m``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

ALL_CONDITIONS = ("cond1", "cond2", "cond3", "cond4", "cond3p", "cond5", "cond6", "cond4p")
M_INDEPENDENT = ("cond3", "cond3p")
MAX_DOUBLINGS = 400


class InfeasibleError(ValueError):
    """No number of modes satisfies the requested conditions."""


@dataclass(frozen=True)
class BoundInputs:
    gamma: float
    L: float = 2 * math.pi
    mu: float = 0.0
    rho: float = 1.0
    alpha: float = 1.0
    beta: float = 4 / 3
    epsilon: float = 0.0
    c_universal: float = 1.0
    f_l2: float = 1.0
    f_linf: float = 1.0
    f_h2: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 1 <= self.alpha < 2:
            raise ValueError(f"alpha must lie in [1, 2), got {self.alpha}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if not self.L > 0 or not self.rho > 0:
            raise ValueError("L and rho must be positive")
        for name in ("mu", "f_l2", "f_linf", "f_h2", "c_universal"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def replace(self, **changes) -> BoundInputs:
        return replace(self, **changes)


@dataclass(frozen=True)
class BoundReport:
    r0_tilde: float
    r1_tildetilde: float
    r0: float
    r1_tilde: float
    c1_tilde: float
    c2_tilde: float
    r2_tilde: float
    r1: float
    c1: float
    c2: float
    r2: float
    r_inf: float
    r_prime_tilde: float
    r_prime: float
    c3: float
    r0_mu0: float
    r1_mu0: float
    r2_mu0: float
    r_inf_mu0: float
    r_prime_mu0: float
    c3_mu0: float

    def as_dict(self) -> dict:
        return asdict(self)


def _h2_bound(inp: BoundInputs, r0: float, r1: float) -> tuple[float, float, float]:
    """C1, C2 and the H2 bound built from an L2 bound r0 and an H1 bound r1."""
    g, mu, rho, eps, c = inp.gamma, inp.mu, inp.rho, inp.epsilon, inp.c_universal
    fh2 = inp.f_h2 + mu * rho
    finf = inp.f_linf + mu * rho
    a = r0**1.5 * r1**0.5
    c1 = 3 * g * a + 3 * finf * r0 + 4.5 * mu * a + 3.6 * fh2 + 6 * fh2 * r0
    c2 = 1.5 * a * fh2 + fh2 * r0**2.5 * r1**0.5 + mu * r0**3 * r1
    r2 = math.sqrt(
        5 / (36 * g**2) * c1**2 + c2 / g + eps * c * r0 ** (22 / 3) / g + 45 / 64 * r0**3 * r1
    )
    return c1, c2, r2


def _chain(inp: BoundInputs) -> dict:
    g, mu, rho, eps, c = inp.gamma, inp.mu, inp.rho, inp.epsilon, inp.c_universal
    al, be = inp.alpha, inp.beta
    f = inp.f_l2
    gm = g + mu

    r0t = (f + math.sqrt(g * mu) * rho) / g
    r1tt = math.sqrt(
        2 * (gm ** (4 / 3) + g ** (4 / 3)) / g ** (4 / 3) * r0t ** (10 / 3)
        + 2 / g * ((inp.f_linf + mu * rho) * r0t**2 + 2 * (inp.f_h2 + mu * rho) * r0t + c * eps * r0t**6)
    )
    # 0.0 ** 0.0 == 1: at mu = 0, alpha = 1 the last term is 1
    r0 = f / g + rho + mu ** ((al - 1) / 2)
    r1t = math.sqrt(
        2 / g * (
            (gm ** (4 / 3) / g ** (1 / 3) + g) * r0 ** (10 / 3)
            + (inp.f_linf + mu * rho) * r0**2
            + 2 * (inp.f_h2 + mu * rho) * r0
            + c * eps * r0t**6
        )
    )
    c1t, c2t, r2t = _h2_bound(inp, r0, r1t)
    r1 = math.sqrt(
        2 / gm * ((gm ** (4 / 3) / g ** (1 / 3) + gm) * r0 ** (10 / 3))
        + 2 / gm * (
            (inp.f_h2 + mu * rho) * r0**2
            + 2 * (inp.f_h2 + mu * rho) * r0
            + c * eps * r0**6
            + mu**be
        )
    )
    c1, c2, r2 = _h2_bound(inp, r0, r1)
    r_inf = math.sqrt(r0 * r1)
    rpt = r2 + 0.5 * r0**2 + r1 + gm * r0 + f + mu * rho
    rp = 0.5 * r0**1.5 * r1**0.5 + r2 + gm * r0 + f + mu * rho
    c3 = math.sqrt(r1 * r2)
    return dict(
        r0_tilde=r0t, r1_tildetilde=r1tt, r0=r0, r1_tilde=r1t, c1_tilde=c1t, c2_tilde=c2t,
        r2_tilde=r2t, r1=r1, c1=c1, c2=c2, r2=r2, r_inf=r_inf, r_prime_tilde=rpt,
        r_prime=rp, c3=c3,
    )


def compute_bounds(inputs: BoundInputs) -> BoundReport:
    full = _chain(inputs)
    zero = _chain(inputs.replace(mu=0.0))
    return BoundReport(
        **full,
        r0_mu0=zero["r0"],
        r1_mu0=zero["r1"],
        r2_mu0=zero["r2"],
        r_inf_mu0=zero["r_inf"],
        r_prime_mu0=zero["r_prime"],
        c3_mu0=zero["c3"],
    )


@dataclass(frozen=True)
class Condition:
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class ConditionTable:
    m: int
    cond1: Condition
    cond2: Condition
    cond3: Condition
    cond4: Condition
    cond3p: Condition
    cond5: Condition
    cond6: Condition
    cond4p: Condition

    def passed(self, which: Iterable[str] = ALL_CONDITIONS) -> bool:
        return all(getattr(self, name).ok for name in which)

    def rows(self) -> list[tuple[str, float, float, bool]]:
        return [(n, getattr(self, n).lhs, getattr(self, n).rhs, getattr(self, n).ok) for n in ALL_CONDITIONS]


def _condition_lhs(name: str, rep: BoundReport, inp: BoundInputs, m: int) -> tuple[float, float]:
    g, mu, L = inp.gamma, inp.mu, inp.L
    tail = L**2 / (4 * math.pi**2 * (m + 1) ** 2)
    if name == "cond1":
        return 2 * mu * tail * rep.r1_tildetilde**2, mu**inp.alpha
    if name == "cond2":
        return mu * tail * rep.r2_tilde**2, mu**inp.beta
    if name == "cond3":
        return rep.c3, 2 * mu
    if name == "cond4":
        bracket = (2 * g + 2 * mu) * rep.r_inf + 2 * rep.r_prime**4 / g**3
        return rep.c3 * tail / 2 / g**2 * bracket, 0.5
    if name == "cond3p":
        return rep.c3_mu0, mu
    if name == "cond5":
        # C3^0 tail <= gamma / (2m), multiplied through by m so the right side is m-free
        return m * rep.c3_mu0 * tail, g / 2
    if name == "cond6":
        return ((g + 2 * mu) * rep.r_inf + 2 * rep.r_prime**4 / g**3) / m, g / 2
    if name == "cond4p":
        bracket = 2 * g * rep.r_inf_mu0 + 2 * rep.r_prime_mu0**4 / g**3
        return tail / g * bracket, 0.5
    raise KeyError(name)


def check_conditions(report: BoundReport, inputs: BoundInputs, m: int) -> ConditionTable:
    if m < 1:
        raise ValueError("m must be >= 1")
    conds = {name: Condition(*_condition_lhs(name, report, inputs, m)) for name in ALL_CONDITIONS}
    return ConditionTable(m=m, **conds)


def _holds(report, inputs, m, which) -> bool:
    for name in which:
        lhs, rhs = _condition_lhs(name, report, inputs, m)
        if not lhs <= rhs:
            return False
    return True


def minimal_m(inputs: BoundInputs, which: Sequence[str] = ("cond1", "cond2", "cond3", "cond4"),
              report: BoundReport | None = None) -> int:
    """Smallest m satisfying the selected conditions (doubling, then bisection)."""
    which = tuple(which)
    unknown = set(which) - set(ALL_CONDITIONS)
    if unknown:
        raise KeyError(f"unknown conditions {sorted(unknown)}")
    report = report or compute_bounds(inputs)
    for name in which:
        if name in M_INDEPENDENT and not _holds(report, inputs, 1, (name,)):
            lhs, rhs = _condition_lhs(name, report, inputs, 1)
            raise InfeasibleError(f"{name} fails for every m ({lhs:.6g} > {rhs:.6g}); mu is too small")
    if _holds(report, inputs, 1, which):
        return 1
    lo, hi = 1, 2
    for _ in range(MAX_DOUBLINGS):
        if _holds(report, inputs, hi, which):
            break
        lo, hi = hi, hi * 2
    else:
        raise InfeasibleError("no m below 2**400 satisfies the conditions")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _holds(report, inputs, mid, which):
            hi = mid
        else:
            lo = mid
    return hi


def minimal_m_linear(inputs: BoundInputs, which: Sequence[str], limit: int = 100_000) -> int:
    """Reference linear scan for ``minimal_m``; only for small answers."""
    report = compute_bounds(inputs)
    for m in range(1, limit + 1):
        if _holds(report, inputs, m, which):
            return m
    raise InfeasibleError(f"no m <= {limit}")


def _scaled(template: BoundInputs, target: str, value: float) -> BoundInputs:
    if target == "f_h2":
        # all norms of f grow together, keeping the template's ratios
        s = value / template.f_h2
        return template.replace(f_l2=template.f_l2 * s, f_linf=template.f_linf * s, f_h2=value)
    if target not in ("mu", "gamma"):
        raise ValueError(f"unsupported sweep target {target!r}")
    return template.replace(**{target: value})


def _check_sweep(sweep: Sequence[float]) -> np.ndarray:
    x = np.asarray(sorted(set(float(s) for s in sweep)))
    if len(x) < 3 or np.any(x <= 0):
        raise ValueError("sweep needs at least 3 distinct positive values")
    if np.log10(x[-1] / x[0]) < 3 - 1e-9:
        raise ValueError("sweep must span at least 3 decades")
    return x


def scaling_exponent(template: BoundInputs, sweep: Sequence[float], target: str,
                     which: Sequence[str] = ("cond1", "cond2", "cond3", "cond4")) -> float:
    """Least-squares slope of log(minimal_m) against log(parameter)."""
    x = _check_sweep(sweep)
    ms = [minimal_m(_scaled(template, target, v), which) for v in x]
    return float(np.polyfit(np.log(x), np.log(np.asarray(ms, dtype=float)), 1)[0])


def bound_exponent(template: BoundInputs, sweep: Sequence[float], target: str, field: str) -> float:
    """Least-squares slope of log(bound) against log(parameter)."""
    x = _check_sweep(sweep)
    vals = [getattr(compute_bounds(_scaled(template, target, v)), field) for v in x]
    return float(np.polyfit(np.log(x), np.log(vals), 1)[0])


def lipschitz_constant(report: BoundReport, inputs: BoundInputs, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    g, mu, L = inputs.gamma, inputs.mu, inputs.L
    inner = report.c3 * L**2 / (2 * math.pi**2 * g * (m + 1) ** 2) * (mu + mu * report.r_inf) + 2 * mu / g
    return 4 * math.pi**2 * m**2 / L**2 * inner


@dataclass(frozen=True)
class RhoFixedPoint:
    rho: float
    converged: bool
    iterations: int
    history: tuple


def rho_fixed_point(inputs: BoundInputs, rho0: float | None = None, max_iter: int = 100,
                    rtol: float = 1e-12, cap: float = 1e300) -> RhoFixedPoint:
    """Iterate rho -> 4 R2(mu = 0; rho) and report whether it settles."""
    rho = inputs.rho if rho0 is None else rho0
    hist = [rho]
    for it in range(1, max_iter + 1):
        try:
            new = 4 * compute_bounds(inputs.replace(rho=rho)).r2_mu0
        except OverflowError:
            return RhoFixedPoint(rho, False, it, tuple(hist))
        hist.append(new)
        if not math.isfinite(new) or new > cap:
            return RhoFixedPoint(new, False, it, tuple(hist))
        if abs(new - rho) <= rtol * abs(new):
            return RhoFixedPoint(new, True, it, tuple(hist))
        rho = new
    return RhoFixedPoint(rho, False, max_iter, tuple(hist))
