"""Continuous data assimilation (nudging) experiments.

A reference solution ``u`` of the damped driven KdV equation is observed
through its first ``m`` Fourier modes, and a copy ``w`` is driven toward it by
the feedback ``-mu (P_m w - P_m u)``.  With ``obs_stride == 1`` the two
states advance together in one exponential RK step as the pair
``(u, w - u)``, so the observation seen at every stage is the reference's
own stage value; with ``obs_stride > 1``
the reference is stored every ``obs_stride`` steps and interpolated
linearly in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .functionals import psi
from .integrator import (
    ETDRK4,
    BlowUpError,
    ModelParams,
    TrajectoryWindow,
    advection,
    integrate,
    linear_symbol,
    step_residual,
)
from .spectral import SpectralField

DEFAULT_FLOOR = 1e-11
PSI_REL_TOL = 1e-10


@dataclass(frozen=True)
class ErrorSample:
    t: float
    dl2: float
    dh1: float
    dh2: float
    psi: float
    case: int


@dataclass
class AssimilationRun:
    params: ModelParams
    ref_seed: int = 1
    nudged_seed: int = 2
    spinup: float = 50.0
    obs_stride: int = 1
    horizon: float = 100.0
    sample_every: int = 100
    init_kmax: int = 8
    init_h2: float = 10.0
    nudged_init: SpectralField | None = None
    error_series: list = field(default_factory=list)
    reference: TrajectoryWindow | None = None
    nudged: TrajectoryWindow | None = None
    ref_sup_low_h2: float = float("nan")
    energy_residual: float = float("nan")

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.spinup < 0:
            raise ValueError("spinup must be nonnegative")
        if self.obs_stride < 1 or self.sample_every < 1:
            raise ValueError("obs_stride and sample_every must be >= 1")

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.error_series])


def initial_state(grid: sp.GridSpec, seed: int, kmax: int, h2: float) -> SpectralField:
    return sp.random_field(grid, seed, min(kmax, grid.dealias_cutoff), h2_norm=h2)


def _steps(span: float, dt: float) -> int:
    n = int(round(span / dt))
    if n < 1 or not math.isclose(n * dt, span, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"span {span} is not a whole number of steps of {dt}")
    return n


def psi_case(value: float, scale: float, previous: int | None) -> int:
    """1 when Psi < 0, 2 when Psi > 0, 3 at a zero crossing (|Psi| within tolerance)."""
    tol = PSI_REL_TOL * scale
    if value < -tol:
        return 1
    if value > tol:
        return 2
    return 3


def error_sample(t: float, w: SpectralField, u: SpectralField, previous: int | None = None) -> ErrorSample:
    d = w - u
    xi = (w + u) * 0.5
    n = sp.norms(d)
    p = psi(d, xi)
    scale = n.h1**2 + sp.norms(xi).linf * n.l2**2
    return ErrorSample(t, n.l2, n.h1, n.h2, p, psi_case(p, scale, previous))


def coupled_pair(
    u0: np.ndarray,
    w0: np.ndarray,
    params: ModelParams,
    nsteps: int,
    sample_every: int,
    t0: float = 0.0,
    guard: float = 1e6,
    on_step=None,
):
    """Advance reference (mu = 0) and nudged copy together; yields (t, u, w) samples.

    The pair is stepped as (u, delta) with delta = w - u, which obeys
    delta_t = lam_mu delta - ((u + delta / 2) delta)_x.  The feedback is then
    part of the exact linear factor and w0 = u0 keeps delta = 0 exactly.
    ``on_step(t, u, w)`` is called at every step, including t0.
    """
    g = params.grid
    lam = np.stack([linear_symbol(params.replace(mu=0.0)), linear_symbol(params)])
    stepper = ETDRK4(lam, params.dt)
    f = params.forcing.coeffs
    dx = g.deriv_symbol(1)

    def rhs(state, t):
        u, d = state
        out = np.empty_like(state)
        out[0] = advection(u, g) + f
        out[1] = -dx * sp.dealiased_product_coeffs(u + 0.5 * d, d, g)
        out[:, 0] = 0.0
        return out

    state = np.stack([u0, w0 - u0]).astype(complex)
    if on_step is not None:
        on_step(t0, state[0], state[0] + state[1])
    yield t0, state[0].copy(), state[0] + state[1]
    for n in range(1, nsteps + 1):
        state = stepper.step(state, t0 + (n - 1) * params.dt, rhs)
        state[:, 0] = 0.0
        w = state[0] + state[1]
        if on_step is not None:
            on_step(t0 + n * params.dt, state[0], w)
        if n % sample_every == 0:
            t = t0 + n * params.dt
            if not np.all(np.isfinite(state)):
                raise BlowUpError("non-finite state", t)
            if max(sp.sobolev_norm(s, g, 2) for s in (state[0], w)) > guard:
                raise BlowUpError("H2 norm above guard", t)
            yield t, state[0].copy(), w


class EnergyTracker:
    """Per-step L2 energy balance of the nudged copy.

    residual = d/dt|w|^2 + 2 gamma |w|^2 + 2 mu |P w|^2 + 2 eps |w_xx|^2 - 2 (f, w) - 2 mu (P u, P w)
    with the derivative centered over neighbouring steps.
    """

    def __init__(self, params: ModelParams):
        self.p = params
        g = params.grid
        self.low = sp.low_mask(g, params.m)
        self.wts = g.L * g.weights
        self.k4 = g.k**4
        self.energy = []
        self.dissipation = []
        self.scale = []

    def __call__(self, t, u, w):
        p, wts = self.p, self.wts
        pw = self.low * w
        terms = (
            2 * p.gamma * np.sum(wts * np.abs(w) ** 2),
            2 * p.mu * np.sum(wts * np.abs(pw) ** 2),
            2 * p.epsilon * np.sum(wts * self.k4 * np.abs(w) ** 2),
            -2 * np.sum(wts * (p.forcing.coeffs * np.conj(w)).real),
            -2 * p.mu * np.sum(wts * (self.low * u * np.conj(pw)).real),
        )
        self.energy.append(np.sum(wts * np.abs(w) ** 2))
        self.dissipation.append(sum(terms))
        self.scale.append(max(abs(x) for x in terms))

    def relative_residual(self) -> float:
        e = np.array(self.energy)
        dedt = (e[2:] - e[:-2]) / (2 * self.p.dt)
        res = dedt + np.array(self.dissipation[1:-1])
        scale = max(np.max(np.abs(dedt)), max(self.scale[1:-1]))
        return float(np.max(np.abs(res)) / scale)


def run_assimilation(cfg: AssimilationRun, keep_states: bool = True) -> AssimilationRun:
    """Spin up the reference, then run the nudged copy over the horizon."""
    p = cfg.params
    g = p.grid
    u0 = initial_state(g, cfg.ref_seed, cfg.init_kmax, cfg.init_h2)
    if cfg.spinup > 0:
        spin = integrate(u0, 0.0, cfg.spinup, p.replace(mu=0.0),
                         sample_every=_steps(cfg.spinup, p.dt), record_norms=False)
        u_start = spin.state(-1)
    else:
        u_start = u0
    w_start = cfg.nudged_init
    if w_start is None:
        w_start = initial_state(g, cfg.nudged_seed, cfg.init_kmax, cfg.init_h2)
    t0 = cfg.spinup
    nsteps = _steps(cfg.horizon, p.dt)

    times, us, ws = [], [], []
    if cfg.obs_stride == 1:
        tracker = EnergyTracker(p)
        for t, u, w in coupled_pair(u_start.coeffs, w_start.coeffs, p, nsteps, cfg.sample_every, t0,
                                    on_step=tracker):
            times.append(t)
            us.append(u)
            ws.append(w)
        ref = TrajectoryWindow(g, times, us)
        nud = TrajectoryWindow(g, times, ws)
        cfg.energy_residual = tracker.relative_residual()
    else:
        ref_obs = integrate(u_start, t0, t0 + cfg.horizon, p.replace(mu=0.0),
                            sample_every=cfg.obs_stride, record_norms=False)
        if abs(ref_obs.times[-1] - (t0 + cfg.horizon)) > 1e-9 * max(1.0, t0 + cfg.horizon):
            raise ValueError("horizon must be a multiple of obs_stride steps")
        control = ref_obs.project(p.m)
        nud = integrate(w_start, t0, t0 + cfg.horizon, p, control=control,
                        sample_every=cfg.sample_every, record_norms=False)
        ref = integrate(u_start, t0, t0 + cfg.horizon, p.replace(mu=0.0),
                        sample_every=cfg.sample_every, record_norms=False)

    series = []
    prev = None
    for i in range(len(ref)):
        s = error_sample(float(ref.times[i]), nud.state(i), ref.state(i), prev)
        prev = s.case
        series.append(s)
    cfg.error_series = series
    cfg.ref_sup_low_h2 = ref.project(p.m).x_norm()
    if keep_states:
        cfg.reference = ref
        cfg.nudged = nud
    return cfg


def case_summary(series: list[ErrorSample]) -> int:
    """Overall sign case of Psi along a run: 1 (nonpositive), 2 (nonnegative), 3 (alternating)."""
    signs = {s.case for s in series if s.case in (1, 2)}
    if signs == {1}:
        return 1
    if signs == {2}:
        return 2
    return 3


@dataclass(frozen=True)
class DecayFit:
    rate: float
    window: tuple[float, float]
    r_squared: float
    floor: float
    samples: int


class FitError(ValueError):
    pass


def fit_decay(times, values, floor_guard: float = DEFAULT_FLOOR, drop_fraction: float = 0.1,
              min_samples: int = 20) -> DecayFit:
    """Least-squares exponential rate of a decaying series.

    The first ``drop_fraction`` of the time span is discarded as transient;
    the fit stops at the first sample below ``floor_guard``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1 or len(t) < 2:
        raise FitError("times and values must be matching 1-d sequences")
    cutoff = t[0] + drop_fraction * (t[-1] - t[0])
    keep = t >= cutoff - 1e-12 * max(1.0, abs(cutoff))
    below = np.nonzero(y < floor_guard)[0]
    stop = below[0] if below.size else len(y)
    keep &= np.arange(len(y)) < stop
    keep &= y > 0
    if keep.sum() < min_samples:
        raise FitError(f"only {int(keep.sum())} usable samples, need {min_samples}")
    tt, ly = t[keep], np.log(y[keep])
    slope, icpt = np.polyfit(tt, ly, 1)
    pred = slope * tt + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    tail = y[max(len(y) - max(len(y) // 10, 1), 0):]
    return DecayFit(
        rate=float(-slope),
        window=(float(tt[0]), float(tt[-1])),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        floor=float(np.median(tail)),
        samples=int(keep.sum()),
    )


def relative_to_free_decay(times, values, gamma: float) -> np.ndarray:
    """|delta(t)| e^{gamma (t - t0)} / |delta(t0)|: synchronization beyond free decay."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    return y * np.exp(gamma * (t - t[0])) / y[0]


def envelope(times, values, rate: float, t_a: float | None = None, t_b: float | None = None) -> np.ndarray:
    """Running max of |delta(t)| e^{rate t} over [t_a, t_b]."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    sel = np.ones_like(t, dtype=bool)
    if t_a is not None:
        sel &= t >= t_a
    if t_b is not None:
        sel &= t <= t_b
    return np.maximum.accumulate(y[sel] * np.exp(rate * (t[sel] - t[sel][0])))


@dataclass(frozen=True)
class ModesProbe:
    m: int
    mu: float
    terminal_l2: float
    terminal_high_l2: float
    initial_l2: float
    free_decay_ratio: float
    synchronized: bool


def spun_up_pair(params: ModelParams, seeds=(1, 2), spinup: float = 50.0, init_kmax: int = 8,
                 init_h2: float = 10.0) -> list[SpectralField]:
    """Two free runs started from seeded data, taken to time ``spinup``."""
    g = params.grid
    p = params.replace(mu=0.0)
    out = []
    for seed in seeds:
        u0 = initial_state(g, seed, init_kmax, init_h2)
        if spinup > 0:
            u0 = integrate(u0, 0.0, spinup, p, sample_every=_steps(spinup, p.dt), record_norms=False).state(-1)
        out.append(u0)
    return out


def determining_modes_probe(
    params: ModelParams,
    m: int,
    seeds: tuple[int, int] = (1, 2),
    horizon: float = 50.0,
    spinup: float = 50.0,
    mu: float | None = None,
    sync_tol: float = 1e-9,
    init_kmax: int = 8,
    init_h2: float = 10.0,
    starts: list[SpectralField] | None = None,
) -> ModesProbe:
    """Nudge one long trajectory toward the first ``m`` modes of another.

    ``m = 0`` is the no-observation surrogate (mu forced to 0).  Reports the
    terminal |delta|, its part above mode m, and the ratio to the free-decay
    envelope |delta(0)| e^{-gamma T}.  ``starts`` skips the spin-up.
    """
    g = params.grid
    mu = params.mu if mu is None else mu
    if m == 0:
        p = params.replace(mu=0.0, m=1)
    else:
        p = params.replace(mu=mu, m=min(m, g.N // 2))
    if starts is None:
        starts = spun_up_pair(params, seeds, spinup, init_kmax, init_h2)
    nsteps = _steps(horizon, p.dt)
    init = sp.sobolev_norm(starts[1].coeffs - starts[0].coeffs, g, 0)
    last = None
    for last in coupled_pair(starts[0].coeffs, starts[1].coeffs, p, nsteps, nsteps, spinup):
        pass
    _, u, w = last
    d = w - u
    high = d.copy()
    high[: min(m, g.N // 2) + 1] = 0.0
    term = sp.sobolev_norm(d, g, 0)
    return ModesProbe(
        m=m,
        mu=p.mu,
        terminal_l2=term,
        terminal_high_l2=sp.sobolev_norm(high, g, 0),
        initial_l2=init,
        free_decay_ratio=term * math.exp(params.gamma * horizon) / init if init > 0 else 0.0,
        synchronized=term < sync_tol,
    )


def determining_modes_sweep(params: ModelParams, ms, seeds=(1, 2), spinup: float = 50.0,
                            **kwargs) -> tuple[list[ModesProbe], int | None]:
    """Probe each m from one shared spin-up; return the probes and the smallest synchronized m."""
    starts = spun_up_pair(params, seeds, spinup, kwargs.get("init_kmax", 8), kwargs.get("init_h2", 10.0))
    probes = [determining_modes_probe(params, m, seeds, spinup=spinup, starts=starts, **kwargs) for m in ms]
    smallest = next((pr.m for pr in probes if pr.synchronized), None)
    return probes, smallest


def delta_residual(ref: TrajectoryWindow, nudged: TrajectoryWindow, params: ModelParams) -> tuple[float, float]:
    """Residual of the error equation along sampled states.

    delta = w - u obeys delta_t = lam delta - (xi delta)_x with xi = (w + u) / 2
    and lam the nudged linear symbol.  Returns the largest L2 residual over
    interior samples and the largest L2 size of the flux term, for scaling.
    """
    if len(ref) != len(nudged) or len(ref) < 3:
        raise ValueError("need matching windows with at least 3 samples")
    g = params.grid
    h = float(ref.times[1] - ref.times[0])
    lam = linear_symbol(params)
    d = nudged.coeffs - ref.coeffs
    flux = advection(nudged.coeffs, g) - advection(ref.coeffs, g)
    worst = scale = 0.0
    for i in range(1, len(ref) - 1):
        r = step_residual(d[i - 1], d[i], d[i + 1], flux[i - 1], flux[i], flux[i + 1], lam, h)
        r[0] = 0.0
        worst = max(worst, sp.sobolev_norm(r, g, 0))
        scale = max(scale, sp.sobolev_norm(flux[i], g, 0))
    return worst, scale
