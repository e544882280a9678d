"""Energy-type functionals of KdV and the inequalities built from them.

Cubic and quartic integrands are evaluated on oversampled grids so that the
quadrature is exact for band-limited fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .integrator import ModelParams, TrajectoryWindow
from .spectral import SpectralField


def _phys(u: SpectralField, order: int, oversample: int) -> np.ndarray:
    return sp.to_physical(u.grid.deriv_symbol(order) * u.coeffs, u.grid.N * oversample)


def _integral(values: np.ndarray, L: float) -> float:
    return sp.integrate_physical(values, L)


def phi1(w: SpectralField) -> float:
    """Integral of w_x^2 - w^3 / 3 (the KdV Hamiltonian)."""
    L = w.grid.L
    wx = _phys(w, 1, 2)
    u = _phys(w, 0, 2)
    return _integral(wx**2 - u**3 / 3, L)


def phi2(w: SpectralField) -> float:
    """Integral of (9/5) w_xx^2 - 3 w w_x^2 + w^4 / 4."""
    L = w.grid.L
    # degree-4 integrand needs more than 2N points to stay alias free
    u = _phys(w, 0, 3)
    wx = _phys(w, 1, 3)
    wxx = _phys(w, 2, 3)
    return _integral(1.8 * wxx**2 - 3 * u * wx**2 + u**4 / 4, L)


def psi(delta: SpectralField, xi: SpectralField) -> float:
    """Integral of delta_x^2 - xi delta^2; sign unconstrained."""
    sp._check_same_grid(delta, xi)
    L = delta.grid.L
    dx = _phys(delta, 1, 2)
    d = _phys(delta, 0, 2)
    x = _phys(xi, 0, 2)
    return _integral(dx**2 - x * d**2, L)


def h1_from_phi1_slack(w: SpectralField, r0_proxy: float | None = None) -> float:
    """Slack of |w_x|^2 <= 2 Phi(w) + 2 |w|^(10/3).

    With ``r0_proxy`` (an upper bound for |w|) the weaker right-hand side
    2 Phi(w) + 2 r0_proxy^(10/3) is used.
    """
    n = sp.norms(w)
    a = n.l2 if r0_proxy is None else r0_proxy
    return 2 * phi1(w) + 2 * a ** (10 / 3) - n.h1**2


def psi_lower_slack(delta: SpectralField, xi: SpectralField, r_inf: float) -> float:
    """Slack of |delta_x|^2 <= Psi(delta) + r_inf |delta|^2, needs r_inf >= sup|xi|."""
    xi_inf = sp.norms(xi).linf
    if r_inf < xi_inf * (1 - 1e-12):
        raise ValueError(f"r_inf={r_inf:g} is below sup|xi|={xi_inf:g}")
    n = sp.norms(delta)
    return psi(delta, xi) + r_inf * n.l2**2 - n.h1**2


def h2_from_phi2_slack(w: SpectralField, l2_bound: float, h1_bound: float) -> float:
    """Slack of |w_xx|^2 <= phi(w) + (45/64) a^3 b with a >= |w|, b >= |w_x|."""
    return phi2(w) + 45 / 64 * l2_bound**3 * h1_bound - sp.norms(w).h2 ** 2


# first variations, used for gradient checks


def phi1_variation(w: SpectralField, h: SpectralField) -> float:
    L = w.grid.L
    return _integral(2 * _phys(w, 1, 2) * _phys(h, 1, 2) - _phys(w, 0, 2) ** 2 * _phys(h, 0, 2), L)


def phi2_variation(w: SpectralField, h: SpectralField) -> float:
    u, ux, uxx = (_phys(w, k, 3) for k in range(3))
    hh, hx, hxx = (_phys(h, k, 3) for k in range(3))
    integrand = 3.6 * uxx * hxx - 3 * hh * ux**2 - 6 * u * ux * hx + u**3 * hh
    return _integral(integrand, w.grid.L)


def psi_variation(delta: SpectralField, xi: SpectralField, h: SpectralField) -> float:
    d, dx = _phys(delta, 0, 2), _phys(delta, 1, 2)
    hh, hx = _phys(h, 0, 2), _phys(h, 1, 2)
    return _integral(2 * dx * hx - 2 * _phys(xi, 0, 2) * d * hh, delta.grid.L)


def energy_balance_residual(
    traj: TrajectoryWindow,
    params: ModelParams,
    control: TrajectoryWindow | None = None,
    return_scale: bool = False,
):
    """Residual of the L2 energy identity at interior samples.

    d/ds|w|^2 + 2 gamma |w|^2 + 2 mu |P w|^2 + 2 eps |w_xx|^2
        - 2 (f, w) - 2 mu (v, P w)

    with the time derivative taken by centered differences.  With
    ``return_scale`` the largest absolute term per sample is also returned.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 samples")
    g = params.grid
    h = traj.times[1] - traj.times[0]
    c = traj.coeffs
    low = sp.low_mask(g, params.m)
    energy = np.array([sp.sobolev_norm(ci, g, 0) ** 2 for ci in c])
    res = []
    scale = []
    interp = control.interpolator() if control is not None else None
    f = params.forcing
    for i in range(1, len(traj) - 1):
        w = traj.state(i)
        pw = w.with_coeffs(w.coeffs * low)
        terms = [
            (energy[i + 1] - energy[i - 1]) / (2 * h),
            2 * params.gamma * energy[i],
            2 * params.mu * sp.sobolev_norm(pw.coeffs, g, 0) ** 2,
            2 * params.epsilon * sp.sobolev_norm(w.coeffs, g, 2) ** 2,
            -2 * sp.inner(f, w),
        ]
        if interp is not None and params.mu:
            v = sp.SpectralField(g, interp(traj.times[i]))
            terms.append(-2 * params.mu * sp.inner(v, pw))
        res.append(sum(terms))
        scale.append(max(abs(t) for t in terms))
    res = np.array(res)
    if return_scale:
        return res, np.array(scale)
    return res


@dataclass(frozen=True)
class FunctionalSample:
    t: float
    phi1: float
    phi2: float
    psi: float | None
    h1_bound_slack: float
    h2_bound_slack: float
    psi_bound_slack: float | None


def sample_functionals(
    traj: TrajectoryWindow,
    partner: TrajectoryWindow | None = None,
) -> list[FunctionalSample]:
    """Functionals and inequality slacks along a trajectory.

    With ``partner`` (a second trajectory on the same times), Psi is
    evaluated for delta = traj - partner, xi = (traj + partner) / 2, with
    r_inf taken as the empirical sup over the window of |xi|_inf.  The H2
    slack uses the window maxima of |w| and |w_x| as a and b.
    """
    states = traj.states
    nrm = [sp.norms(s) for s in states]
    a = max(n.l2 for n in nrm)
    b = max(n.h1 for n in nrm)
    pairs = None
    r_inf = None
    if partner is not None:
        if len(partner) != len(traj):
            raise ValueError("partner trajectory must share the sample times")
        pairs = [(w - u, (w + u) * 0.5) for w, u in zip(states, partner.states)]
        r_inf = max(sp.norms(xi).linf for _, xi in pairs)
    out = []
    for i, w in enumerate(states):
        p = ps = None
        if pairs is not None:
            d, xi = pairs[i]
            p = psi(d, xi)
            ps = psi_lower_slack(d, xi, r_inf)
        out.append(
            FunctionalSample(
                t=float(traj.times[i]),
                phi1=phi1(w),
                phi2=phi2(w),
                psi=p,
                h1_bound_slack=h1_from_phi1_slack(w),
                h2_bound_slack=h2_from_phi2_slack(w, a, b),
                psi_bound_slack=ps,
            )
        )
    return out
