"""Fourier representation of real periodic fields on [0, L).

A field is stored as its non-negative half spectrum ``c_k``, k = 0..N/2, with
``u(x) = sum_k c_k exp(i k~ x)`` and ``c_{-k} = conj(c_k)``, where
``k~ = 2 pi k / L``.  All operations return new fields; arrays are frozen.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

ENFORCED_ZERO = "enforced-zero"
FREE = "free"


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid of ``N`` points on ``[0, L)``.

    ``dealias_cutoff`` is the largest wavenumber index retained in products.
    The default ``(N - 1) // 3`` keeps every alias of a quadratic product
    strictly above the cutoff, which is what the discrete conservation
    identities need.
    """

    L: float = 2 * np.pi
    N: int = 128
    dealias_cutoff: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if self.dealias_cutoff is None:
            object.__setattr__(self, "dealias_cutoff", (self.N - 1) // 3)
        if not 1 <= self.dealias_cutoff <= self.N // 2 - 1:
            raise ValueError(
                f"dealias_cutoff must lie in [1, N/2 - 1], got {self.dealias_cutoff}"
            )

    @property
    def nk(self) -> int:
        return self.N // 2 + 1

    @cached_property
    def index(self) -> np.ndarray:
        return np.arange(self.nk)

    @cached_property
    def k(self) -> np.ndarray:
        """Physical wavenumbers 2 pi k / L for k = 0..N/2."""
        return 2 * np.pi * self.index / self.L

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored mode in a sum over all integer k."""
        w = np.full(self.nk, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.index <= self.dealias_cutoff

    @cached_property
    def x(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    def deriv_symbol(self, order: int) -> np.ndarray:
        sym = (1j * self.k) ** order
        if order % 2:
            # the Nyquist mode of a real field has no odd derivative
            sym[-1] = 0.0
        return sym


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)
    mean_mode_policy: str = ENFORCED_ZERO

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.nk,):
            raise ValueError(f"expected {self.grid.nk} coefficients, got {c.shape}")
        if self.mean_mode_policy not in (ENFORCED_ZERO, FREE):
            raise ValueError(f"unknown mean_mode_policy {self.mean_mode_policy!r}")
        c[0] = c[0].real
        c[-1] = c[-1].real
        if self.mean_mode_policy == ENFORCED_ZERO:
            c[0] = 0.0
        object.__setattr__(self, "coeffs", _freeze(c))

    def coeff(self, k: int) -> complex:
        if abs(k) > self.grid.N // 2:
            return 0j
        c = self.coeffs[abs(k)]
        return complex(np.conj(c)) if k < 0 else complex(c)

    def with_coeffs(self, coeffs: np.ndarray) -> SpectralField:
        return SpectralField(self.grid, coeffs, self.mean_mode_policy)

    def physical(self, oversample: int = 1) -> np.ndarray:
        return to_physical(self.coeffs, self.grid.N * oversample)

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return self.with_coeffs(-self.coeffs)


def _check_same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def to_physical(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a half spectrum on ``n`` equispaced points (zero padding)."""
    nk = coeffs.shape[-1]
    if n // 2 + 1 == nk:
        return np.fft.irfft(coeffs, n, norm="forward")
    padded = np.zeros(coeffs.shape[:-1] + (n // 2 + 1,), dtype=complex)
    padded[..., :nk] = coeffs
    # a Nyquist coefficient stands for cos(N x / 2); split it onto +-N/2
    padded[..., nk - 1] *= 0.5
    return np.fft.irfft(padded, n, norm="forward")


def to_spectral(samples: np.ndarray) -> np.ndarray:
    return np.fft.rfft(samples, norm="forward")


def make_field(
    grid: GridSpec,
    physical_samples: Iterable[float],
    mean_mode_policy: str = ENFORCED_ZERO,
) -> SpectralField:
    u = np.asarray(physical_samples, dtype=float)
    if u.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} samples, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("samples must be finite")
    return SpectralField(grid, to_spectral(u), mean_mode_policy)


def from_function(grid: GridSpec, func, mean_mode_policy: str = ENFORCED_ZERO) -> SpectralField:
    return make_field(grid, func(grid.x), mean_mode_policy)


def zeros(grid: GridSpec, mean_mode_policy: str = ENFORCED_ZERO) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.nk, dtype=complex), mean_mode_policy)


def from_modes(grid: GridSpec, modes: Iterable[tuple[int, float, float]]) -> SpectralField:
    """Build ``sum a cos(k~ x + phase)`` from ``(k, a, phase)`` triples."""
    c = np.zeros(grid.nk, dtype=complex)
    for k, amp, phase in modes:
        k = int(k)
        if not 1 <= k < grid.N // 2:
            raise ValueError(f"mode {k} outside 1..{grid.N // 2 - 1}")
        c[k] += 0.5 * amp * np.exp(1j * phase)
    return SpectralField(grid, c)


def random_field(
    grid: GridSpec,
    seed: int,
    kmax: int,
    h2_norm: float | None = None,
    decay: float = 1.0,
) -> SpectralField:
    """Seeded random field on modes 1..kmax, optionally rescaled to a given H2 norm.

    Uses ``numpy.random.default_rng`` (PCG64).
    """
    if not 1 <= kmax <= grid.N // 2 - 1:
        raise ValueError(f"kmax must be in 1..{grid.N // 2 - 1}")
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.nk, dtype=complex)
    ks = np.arange(1, kmax + 1)
    c[1 : kmax + 1] = (rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)) / ks**decay
    u = SpectralField(grid, c)
    if h2_norm is not None:
        u = u * (h2_norm / norms(u).h2)
    return u


def derivative(u: SpectralField, order: int) -> SpectralField:
    if not 0 <= order <= 4:
        raise ValueError(f"derivative order must be in 0..4, got {order}")
    return u.with_coeffs(u.grid.deriv_symbol(order) * u.coeffs)


def project_low(u: SpectralField, m: int) -> SpectralField:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    c = u.coeffs.copy()
    c[m + 1 :] = 0.0
    return u.with_coeffs(c)


def project_high(u: SpectralField, m: int) -> SpectralField:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    c = u.coeffs.copy()
    c[: min(m + 1, len(c))] = 0.0
    return u.with_coeffs(c)


def low_mask(grid: GridSpec, m: int) -> np.ndarray:
    return (grid.index >= 1) & (grid.index <= m)


@dataclass(frozen=True)
class NormSet:
    l2: float
    h1: float
    h2: float
    hm1: float
    hm2: float
    linf: float


def sobolev_norm(coeffs: np.ndarray, grid: GridSpec, s: int) -> float:
    """Homogeneous norm ``(L sum |k~|^(2s) |c_k|^2)^(1/2)``; zero mode skipped for s < 0."""
    p = grid.weights * np.abs(coeffs) ** 2
    if s == 0:
        return float(np.sqrt(grid.L * p.sum()))
    k = grid.k[1:]
    return float(np.sqrt(grid.L * np.sum(k ** (2 * s) * p[1:])))


def norms(u: SpectralField) -> NormSet:
    g, c = u.grid, u.coeffs
    return NormSet(
        l2=sobolev_norm(c, g, 0),
        h1=sobolev_norm(c, g, 1),
        h2=sobolev_norm(c, g, 2),
        hm1=sobolev_norm(c, g, -1),
        hm2=sobolev_norm(c, g, -2),
        linf=float(np.max(np.abs(u.physical(oversample=4)))),
    )


def inner(a: SpectralField, b: SpectralField) -> float:
    """L2 inner product by Parseval."""
    _check_same_grid(a, b)
    g = a.grid
    return float(g.L * np.sum(g.weights * (a.coeffs * np.conj(b.coeffs)).real))


def integrate_physical(samples: np.ndarray, L: float) -> float:
    """Rectangle rule over one period (exact for resolved trigonometric polynomials)."""
    return float(L * np.mean(samples, axis=-1))


def dealiased_product_coeffs(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> np.ndarray:
    mask = grid.dealias_mask
    pa = to_physical(a * mask, grid.N)
    pb = pa if b is a else to_physical(b * mask, grid.N)
    return to_spectral(pa * pb) * mask


def dealias_product(a: SpectralField, b: SpectralField) -> SpectralField:
    _check_same_grid(a, b)
    return a.with_coeffs(dealiased_product_coeffs(a.coeffs, b.coeffs, a.grid))


def write_field(u: SpectralField) -> str:
    """Text serialization: a grid header then one ``k re im`` record per mode."""
    g = u.grid
    out = io.StringIO()
    out.write(f"# L={g.L!r} N={g.N} cutoff={g.dealias_cutoff} policy={u.mean_mode_policy}\n")
    start = 0 if u.mean_mode_policy == FREE else 1
    for k in range(start, g.nk):
        c = u.coeffs[k]
        out.write(f"{k} {float(c.real)!r} {float(c.imag)!r}\n")
    return out.getvalue()


def read_field(text: str) -> SpectralField:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing grid header")
    header = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    grid = GridSpec(float(header["L"]), int(header["N"]), int(header["cutoff"]))
    c = np.zeros(grid.nk, dtype=complex)
    for ln in lines[1:]:
        k, re, im = ln.split()
        c[int(k)] = complex(float(re), float(im))
    return SpectralField(grid, c, header.get("policy", ENFORCED_ZERO))
