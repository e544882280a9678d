import math

import numpy as np
import pytest

from kdvda import spectral as sp
from kdvda.assimilation import (
    AssimilationRun,
    FitError,
    case_summary,
    delta_residual,
    determining_modes_probe,
    determining_modes_sweep,
    envelope,
    error_sample,
    fit_decay,
    initial_state,
    psi_case,
    relative_to_free_decay,
    run_assimilation,
)
from kdvda.bounds import BoundInputs, minimal_m
from kdvda.integrator import ModelParams


def test_identical_start_stays_synchronized(desk_params):
    p = desk_params
    u0 = initial_state(p.grid, 1, 8, 10.0)
    run = run_assimilation(AssimilationRun(p, ref_seed=1, spinup=0.0, horizon=2.0, sample_every=200,
                                           nudged_init=u0))
    assert max(run.series("dl2")) < 1e-12


def test_unforced_free_runs_only_decay(grid64):
    p = ModelParams(grid64, sp.zeros(grid64), gamma=0.5, mu=0.0, m=4, dt=1e-3)
    run = run_assimilation(AssimilationRun(p, spinup=0.0, horizon=10.0, sample_every=500, init_h2=3.0))
    rel = relative_to_free_decay(run.series("t"), run.series("dl2"), p.gamma)
    assert rel[-1] > 0.1


def test_full_state_nudging(grid64):
    p = ModelParams(grid64, sp.from_modes(grid64, [(1, 1.0, 0.0)]), gamma=0.5, mu=60.0, m=32, dt=1e-3)
    run = run_assimilation(AssimilationRun(p, spinup=1.0, horizon=1.0, sample_every=100, init_h2=3.0))
    assert run.series("dl2")[-1] < 1e-9


def test_strided_observation_converges_to_continuous(grid64):
    p = ModelParams(grid64, sp.from_modes(grid64, [(1, 1.0, 0.0)]), gamma=0.5, mu=10.0, m=6, dt=1e-3)
    kw = dict(spinup=1.0, horizon=2.0, sample_every=100, init_h2=3.0)
    a = run_assimilation(AssimilationRun(p, obs_stride=1, **kw)).series("dl2")
    gaps = []
    for stride in (4, 2):
        b = run_assimilation(AssimilationRun(p, obs_stride=stride, **kw)).series("dl2")
        gaps.append(np.max(np.abs(a - b) / a))
    assert gaps[0] < 1e-2
    assert gaps[0] / gaps[1] > 3.0


def test_fit_exact_exponential():
    t = np.linspace(0, 40, 401)
    fit = fit_decay(t, np.exp(-0.25 * t))
    assert abs(fit.rate - 0.25) < 1e-10
    assert fit.r_squared > 1 - 1e-12


def test_fit_excludes_plateau():
    t = np.linspace(0, 200, 2001)
    y = np.maximum(np.exp(-0.3 * t), 1e-12)
    fit = fit_decay(t, y)
    assert abs(fit.rate - 0.3) < 1e-9
    assert fit.window[1] < 85
    assert fit.floor == pytest.approx(1e-12)


def test_fit_needs_samples():
    with pytest.raises(FitError):
        fit_decay(np.arange(10.0), np.exp(-np.arange(10.0)))


def test_envelope_is_running_max():
    t = np.linspace(0, 10, 11)
    e = envelope(t, np.exp(-t), 0.5)
    assert np.all(np.diff(e) >= 0) and e[-1] == pytest.approx(1.0)


def test_psi_case_labels(grid64):
    assert psi_case(-1.0, 1.0, None) == 1
    assert psi_case(1.0, 1.0, None) == 2
    assert psi_case(0.0, 1.0, None) == 3
    s = sp.from_function(grid64, np.sin)
    c = sp.from_function(grid64, np.cos)
    # delta = w - u = sin, xi = (w + u) / 2 = cos: Psi = pi
    sample = error_sample(0.0, c + s * 0.5, c - s * 0.5)
    assert sample.case == 2 and sample.psi == pytest.approx(math.pi)


def test_case_summary():
    from kdvda.assimilation import ErrorSample

    mk = lambda c: ErrorSample(0, 1, 1, 1, 0, c)
    assert case_summary([mk(1), mk(1)]) == 1
    assert case_summary([mk(2), mk(3), mk(2)]) == 2
    assert case_summary([mk(1), mk(2)]) == 3


def test_case_changes_only_at_sign_changes(desk_params):
    run = run_assimilation(AssimilationRun(desk_params, spinup=1.0, horizon=4.0, sample_every=20))
    cases, psis = run.series("case"), run.series("psi")
    for i in range(1, len(cases)):
        if cases[i] != cases[i - 1]:
            assert cases[i] == 3 or cases[i - 1] == 3 or psis[i] * psis[i - 1] < 0


def test_delta_equation_second_order(desk_params):
    worst = []
    for dt in (1e-3, 5e-4):
        p = desk_params.replace(dt=dt)
        run = run_assimilation(AssimilationRun(p, spinup=1.0, horizon=0.1, sample_every=1))
        res, scale = delta_residual(run.reference, run.nudged, p)
        worst.append(res / scale)
    assert worst[0] < 1e-2
    assert worst[0] / worst[1] > 3.5


def test_no_observation_surrogate(desk_params):
    pr = determining_modes_probe(desk_params, 0, spinup=5.0, horizon=5.0)
    assert pr.mu == 0.0
    assert pr.free_decay_ratio > 1e-3


def test_more_modes_never_hurt(desk_params):
    probes, smallest = determining_modes_sweep(desk_params, range(1, 17), spinup=10.0, horizon=10.0)
    terminal = [p.terminal_l2 for p in probes]
    for a, b in zip(terminal, terminal[1:]):
        assert b <= 1.1 * a
    assert smallest is not None
    g = desk_params.grid
    fn = sp.norms(desk_params.forcing)
    inputs = BoundInputs(gamma=desk_params.gamma, L=g.L, mu=desk_params.mu, rho=4.0,
                         f_l2=fn.l2, f_linf=fn.linf, f_h2=fn.h2)
    assert smallest <= minimal_m(inputs, ("cond4p",))


def test_run_validation(desk_params):
    with pytest.raises(ValueError):
        AssimilationRun(desk_params, horizon=0.0)
    with pytest.raises(ValueError):
        AssimilationRun(desk_params, obs_stride=0)
