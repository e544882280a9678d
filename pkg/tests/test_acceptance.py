"""Acceptance criteria; each test records one PASS/FAIL line in the terminal summary."""

import math
import time

import numpy as np
import pytest

from conftest import record
from kdvda import spectral as sp
from kdvda.assimilation import (
    AssimilationRun,
    case_summary,
    envelope,
    fit_decay,
    relative_to_free_decay,
    run_assimilation,
)
from kdvda.attractor import integrate_determining_form, kdv_residual, solve_steady_state, verify_steady_by_flow
from kdvda.bounds import BoundInputs, bound_exponent, compute_bounds, scaling_exponent
from kdvda.functionals import phi1, sample_functionals
from kdvda.integrator import ModelParams, constant_window, integrate

# pinned tolerances
DERIV_TOL = 1e-12
L2_DRIFT_TOL = 1e-8
PHI_DRIFT_TOL = 1e-6
DAMPING_TOL = 1e-8
SOLITON_TOL = 1e-4
ORDER_RANGE = (3.8, 4.2)
SYNC_LEVEL = 1e-9
CDA_RATE = 0.125
CONTROL_LEVEL = 1e-3
SLACK_TOL = -1e-8
ENERGY_TOL = 1e-3
NEWTON_TOL = 1e-12
FLOW_TOL = 1e-8
THETA_SLACK = 1e-12
COLLINEARITY_TOL = 1e-10
RHO_TOL = 1e-8
MU_EXPONENT = (119 / 48, 0.05)
GAMMA_EXPONENT = (-26 / 3, 0.1)
FH2_EXPONENT = (14 / 3, 0.1)
BOUND_EXPONENTS = {"r0": 0.0, "r1": 1 / 6, "r2": 13 / 12, "r_inf": 1 / 12}
BOUND_EXP_TOL = 0.02

TEMPLATE = BoundInputs(gamma=0.5, L=2 * math.pi, mu=10.0, rho=4.0, f_l2=1.0, f_linf=1.0, f_h2=1.0)


class Clock:
    def __init__(self, limit):
        self.limit = limit
        self.t0 = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0

    def ok(self):
        return self.elapsed < self.limit


def test_c01_spectral_derivative():
    clk = Clock(1.0)
    g = sp.GridSpec(2 * math.pi, 64)
    u = sp.from_function(g, lambda x: np.cos(5 * x))
    err = float(np.max(np.abs(sp.derivative(u, 2).coeffs + 25 * u.coeffs)))
    ok = err < DERIV_TOL and clk.ok()
    record(1, ok, f"coeff err {err:.2e} (< {DERIV_TOL:g}), {clk.elapsed:.2f}s")
    assert ok


def test_c02_pure_kdv_conservation():
    clk = Clock(30.0)
    g = sp.GridSpec(2 * math.pi, 256)
    c = sp.random_field(g, 1, 6, h2_norm=3.0).coeffs.copy()
    c[0] = 0.25
    u0 = sp.SpectralField(g, c, sp.FREE)
    p = ModelParams(g, sp.zeros(g, sp.FREE), gamma=0.0, mu=0.0, epsilon=0.0, dt=1e-3)
    traj = integrate(u0, 0.0, 10.0, p, sample_every=500, record_norms=False)
    mean_exact = bool(np.all(traj.coeffs[:, 0] == c[0]))
    e = np.array([sp.sobolev_norm(x, g, 0) ** 2 for x in traj.coeffs])
    f = np.array([phi1(s) for s in traj.states])
    de = float(np.max(np.abs(e - e[0])) / e[0])
    dphi = float(np.max(np.abs(f - f[0])) / abs(f[0]))
    ok = mean_exact and de < L2_DRIFT_TOL and dphi < PHI_DRIFT_TOL and clk.ok()
    record(2, ok, f"mean exact {mean_exact}, |u|^2 drift {de:.1e}, Phi drift {dphi:.1e}, {clk.elapsed:.1f}s")
    assert ok


def test_c03_damping_law():
    clk = Clock(10.0)
    g = sp.GridSpec(2 * math.pi, 128)
    u0 = sp.random_field(g, 3, 8, h2_norm=10.0)
    p = ModelParams(g, sp.zeros(g), gamma=0.5, mu=0.0, dt=1e-3)
    traj = integrate(u0, 0.0, 5.0, p, sample_every=5000, record_norms=False)
    a0 = sp.sobolev_norm(u0.coeffs, g, 0)
    err = abs(sp.sobolev_norm(traj.coeffs[-1], g, 0) - math.exp(-2.5) * a0) / a0
    ok = err < DAMPING_TOL and clk.ok()
    record(3, ok, f"rel err {err:.1e}, {clk.elapsed:.1f}s")
    assert ok


def test_c04_soliton():
    clk = Clock(120.0)
    c, L, T = 1.0, 40 * math.pi, 10.0
    g = sp.GridSpec(L, 1024)
    x0 = L / 2

    def profile(t):
        xi = (g.x - x0 - c * t + L / 2) % L - L / 2
        return 3 * c / np.cosh(math.sqrt(c) * xi / 2) ** 2

    u0 = sp.SpectralField(g, sp.to_spectral(profile(0.0)), sp.FREE)
    p = ModelParams(g, sp.zeros(g, sp.FREE), gamma=0.0, dt=1e-3)
    end = integrate(u0, 0.0, T, p, sample_every=10000, record_norms=False).state(-1)
    err = math.sqrt(sp.integrate_physical((end.physical() - profile(T)) ** 2, L))
    ok = err < SOLITON_TOL and clk.ok()
    record(4, ok, f"L2 profile err {err:.1e}, {clk.elapsed:.1f}s")
    assert ok


def test_c05_temporal_order(desk_grid, desk_forcing):
    clk = Clock(120.0)
    p = ModelParams(desk_grid, desk_forcing, gamma=0.5, dt=1e-3)
    u0 = sp.random_field(desk_grid, 7, 8, h2_norm=10.0)
    T = 1.0
    dts = [4e-3, 2e-3, 1e-3, 5e-4]
    finals = {dt: integrate(u0, 0.0, T, p.replace(dt=dt), sample_every=round(T / dt),
                            record_norms=False).coeffs[-1] for dt in dts}
    diffs = [sp.sobolev_norm(finals[a] - finals[b], desk_grid, 0) for a, b in zip(dts, dts[1:])]
    slope = float(np.polyfit(np.log(dts[:-1]), np.log(diffs), 1)[0])
    ok = ORDER_RANGE[0] <= slope <= ORDER_RANGE[1] and clk.ok()
    record(5, ok, f"slope {slope:.3f}, {clk.elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def desk_run(desk_params):
    t0 = time.perf_counter()
    run = run_assimilation(AssimilationRun(desk_params, spinup=50.0, horizon=100.0, sample_every=10))
    control = run_assimilation(AssimilationRun(desk_params.replace(mu=0.0), spinup=50.0, horizon=100.0,
                                               sample_every=100), keep_states=False)
    return run, control, time.perf_counter() - t0


def test_c06_data_assimilation(desk_run, desk_params):
    run, control, elapsed = desk_run
    t, d = run.series("t"), run.series("dl2")
    fit = fit_decay(t, d)
    env = envelope(t, d, CDA_RATE, *fit.window)
    rel = relative_to_free_decay(control.series("t"), control.series("dl2"), desk_params.gamma)[-1]
    ok = d.min() < SYNC_LEVEL and fit.rate >= CDA_RATE and rel > CONTROL_LEVEL and elapsed < 180
    record(6, ok, f"min |delta| {d.min():.1e}, rate {fit.rate:.4f} (>= {CDA_RATE}), r2 {fit.r_squared:.6f}, "
                  f"control {rel:.2e} (> {CONTROL_LEVEL:g}), envelope max/first {env[-1] / env[0]:.2f}, "
                  f"Psi case {case_summary(run.error_series)}, {elapsed:.1f}s")
    assert ok


def test_c07_inequality_suites(desk_run):
    clk = Clock(180.0)
    run, _, _ = desk_run
    samples = sample_functionals(run.nudged, run.reference)
    h1 = min(s.h1_bound_slack for s in samples)
    ps = min(s.psi_bound_slack for s in samples)
    ok = h1 >= SLACK_TOL and ps >= SLACK_TOL and run.energy_residual < ENERGY_TOL and clk.ok()
    record(7, ok, f"H1 slack min {h1:.2e}, Psi slack min {ps:.2e}, energy residual {run.energy_residual:.1e}, "
                  f"{len(samples)} samples, {clk.elapsed:.1f}s")
    assert ok


def test_c08_steady_state(desk_params):
    clk = Clock(60.0)
    p = desk_params
    ss = solve_steady_state(p, tol=NEWTON_TOL)
    slack = sp.norms(p.forcing).l2 / p.gamma - sp.norms(ss.u_star).l2
    drift = verify_steady_by_flow(ss.u_star, p, 10.0)
    ok = ss.residual_l2 < NEWTON_TOL and slack >= -1e-12 and drift < FLOW_TOL and clk.ok()
    record(8, ok, f"residual {ss.residual_l2:.1e}, |f|/gamma - |u*| = {slack:.3f}, flow drift {drift:.1e}, "
                  f"{clk.elapsed:.1f}s")
    assert ok


def test_c09_determining_form(desk_params):
    clk = Clock(300.0)
    p = desk_params
    ss = solve_steady_state(p)
    base = sp.project_low(ss.u_star, p.m)
    pert = sp.from_modes(p.grid, [(3, 0.5, 0.3), (1, 0.2, 0.0)])
    spinup, span = 30.0, 31.0
    moving = integrate_determining_form(constant_window(base + pert, 0.0, span, p.m), p, ss.u_star,
                                        2.0, 6.0, spinup)
    fixed = integrate_determining_form(constant_window(base, 0.0, span, p.m), p, ss.u_star,
                                       1.0, 2.0, spinup, keep_windows=True)
    thetas = [s.theta for s in moving]
    mono = all(b <= a + THETA_SLACK for a, b in zip(thetas, thetas[1:]))
    col = max(s.collinearity for s in moving + fixed)
    constant = all(s.theta == 1.0 and s.rho_tau < RHO_TOL for s in fixed)
    res = [kdv_residual(s.w_window, p) for s in fixed if s.rho_tau < RHO_TOL]
    res_ok = bool(res) and max(res) < p.dt**2
    ok = mono and col < COLLINEARITY_TOL and constant and res_ok and clk.ok()
    record(9, ok, f"theta {thetas[0]:.3f}->{thetas[-1]:.3f} monotone {mono}, collinearity {col:.1e}, "
                  f"constant {constant}, KdV residual {max(res):.1e} (< dt^2), {clk.elapsed:.1f}s")
    assert ok


def _within(value, target):
    return abs(value - target[0]) <= target[1]


def test_c10a_mu_exponent():
    clk = Clock(10.0)
    e = scaling_exponent(TEMPLATE, np.logspace(15, 18, 7), "mu")
    ok = _within(e, MU_EXPONENT) and clk.ok()
    record("10a", ok, f"mu exponent {e:.3f} vs {MU_EXPONENT[0]:.3f} +- {MU_EXPONENT[1]}")
    assert ok


def test_c10b_fh2_exponent():
    e = scaling_exponent(TEMPLATE.replace(mu=0.0), np.logspace(6, 9, 7), "f_h2", ("cond4p",))
    ok = _within(e, FH2_EXPONENT)
    record("10b", ok, f"|f|_H2 exponent {e:.3f} vs {FH2_EXPONENT[0]:.3f} +- {FH2_EXPONENT[1]}")
    assert ok


def test_c10c_gamma_exponent():
    # the stated exponent is not what the bound chain produces; see the README
    e = scaling_exponent(TEMPLATE.replace(mu=0.0), np.logspace(-9, -6, 7), "gamma", ("cond4p",))
    ok = _within(e, GAMMA_EXPONENT)
    record("10c", ok, f"gamma exponent {e:.3f} vs {GAMMA_EXPONENT[0]:.3f} +- {GAMMA_EXPONENT[1]}")
    assert ok


def test_c11_bound_orders():
    clk = Clock(10.0)
    parts, ok = [], True
    for field, target in BOUND_EXPONENTS.items():
        e = bound_exponent(TEMPLATE, np.logspace(15, 18, 7), "mu", field)
        ok &= abs(e - target) <= BOUND_EXP_TOL
        parts.append(f"{field} {e:.4f}")
    rep = compute_bounds(TEMPLATE)
    ok = ok and math.isfinite(rep.r2) and clk.ok()
    record(11, ok, ", ".join(parts))
    assert ok
