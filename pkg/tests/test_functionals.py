import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cos_field, sin_field
from kdvda import functionals as fn
from kdvda import spectral as sp
from kdvda.integrator import ModelParams, integrate

PI = math.pi


def test_phi1_closed_forms(grid64):
    assert fn.phi1(sp.zeros(grid64)) == 0
    assert abs(fn.phi1(sin_field(grid64)) - PI) < 1e-12
    w = cos_field(grid64) + cos_field(grid64, 2)
    assert abs(fn.phi1(w) - 4.5 * PI) < 1e-12


def test_phi2_closed_forms(grid64):
    assert fn.phi2(sp.zeros(grid64)) == 0
    assert abs(fn.phi2(sin_field(grid64)) - (9 * PI / 5 + 3 * PI / 16)) < 1e-12


def test_phi2_term_decomposition(grid64):
    w = sp.random_field(grid64, 11, 12)
    L = grid64.L
    u, ux, uxx = (sp.derivative(w, k).physical(4) for k in range(3))
    a = sp.integrate_physical(uxx**2, L)
    b = sp.integrate_physical(u * ux**2, L)
    c = sp.integrate_physical(u**4, L)
    expect = 4 * (1.8 * a) - 8 * (3 * b) + 16 * (c / 4)
    assert abs(fn.phi2(w * 2) - expect) < 1e-10 * abs(expect)


def test_psi_closed_forms(grid64):
    s, c = sin_field(grid64), cos_field(grid64)
    assert fn.psi(sp.zeros(grid64), c) == 0
    assert abs(fn.psi(s, sp.zeros(grid64)) - PI) < 1e-12
    assert abs(fn.psi(s, c) - PI) < 1e-12


def test_h1_slack_examples(grid64):
    assert fn.h1_from_phi1_slack(sp.zeros(grid64)) == 0
    expect = 2 * PI + 2 * PI ** (5 / 3) - PI
    assert abs(fn.h1_from_phi1_slack(sin_field(grid64)) - expect) < 1e-12


def test_h1_slack_randomized():
    g = sp.GridSpec(2 * PI, 64)
    rng = np.random.default_rng(0)
    for seed in range(1000):
        w = sp.random_field(g, seed, int(rng.integers(1, 21)), h2_norm=float(rng.uniform(0.1, 50)))
        assert fn.h1_from_phi1_slack(w) >= -1e-8


def test_psi_slack_examples(grid64):
    d = sp.random_field(grid64, 1, 10)
    assert fn.psi_lower_slack(d, sp.zeros(grid64), 0.0) == pytest.approx(0.0, abs=1e-12)
    s, c = sin_field(grid64), cos_field(grid64)
    assert abs(fn.psi_lower_slack(s, c, 1.0) - PI) < 1e-12
    with pytest.raises(ValueError):
        fn.psi_lower_slack(s, c, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 20))
def test_psi_slack_randomized(seed, amp):
    g = sp.GridSpec(2 * PI, 64)
    d = sp.random_field(g, seed, 15)
    xi = sp.random_field(g, seed + 7, 15, h2_norm=amp)
    assert fn.psi_lower_slack(d, xi, sp.norms(xi).linf) >= -1e-8


def _fd(func, w, h, eps=1e-6):
    return (func(w + h * eps) - func(w - h * eps)) / (2 * eps)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_gradient_checks(seed):
    g = sp.GridSpec(2 * PI, 64)
    w = sp.random_field(g, seed, 10, h2_norm=3.0)
    h = sp.random_field(g, seed + 1, 10, h2_norm=1.0)
    xi = sp.random_field(g, seed + 2, 10, h2_norm=2.0)
    pairs = [
        (fn.phi1, fn.phi1_variation(w, h)),
        (fn.phi2, fn.phi2_variation(w, h)),
        (lambda d: fn.psi(d, xi), fn.psi_variation(w, xi, h)),
    ]
    for func, analytic in pairs:
        assert abs(_fd(func, w, h) - analytic) <= 1e-6 * max(abs(analytic), 1.0)


def test_energy_balance_trivial(grid64):
    p = ModelParams(grid64, sp.zeros(grid64))
    traj = integrate(sp.zeros(grid64), 0, 0.01, p)
    assert np.all(fn.energy_balance_residual(traj, p) == 0)


def test_energy_balance_second_order(grid64):
    p = ModelParams(grid64, sp.zeros(grid64), gamma=0.5)
    u0 = sp.random_field(grid64, 3, 6, h2_norm=3.0)
    worst = []
    for every in (40, 20):
        traj = integrate(u0, 0, 1.6, p, sample_every=every, record_norms=False)
        res, scale = fn.energy_balance_residual(traj, p, return_scale=True)
        worst.append(np.max(np.abs(res) / scale))
    assert 3.5 < worst[0] / worst[1] < 4.5


def test_energy_balance_nudged(desk_params):
    p = desk_params
    g = p.grid
    ref = integrate(sp.random_field(g, 1, 8, h2_norm=3.0), 0, 2, p.replace(mu=0.0), record_norms=False)
    w0 = sp.random_field(g, 2, 8, h2_norm=3.0)
    control = ref.project(p.m)
    nud = integrate(w0, 0, 2, p, control=control, record_norms=False)
    res, scale = fn.energy_balance_residual(nud, p, control, return_scale=True)
    assert np.max(np.abs(res)) / np.max(scale) < 1e-3


def test_hamiltonian_conserved():
    g = sp.GridSpec(2 * PI, 128)
    p = ModelParams(g, sp.zeros(g), gamma=0.0)
    traj = integrate(sp.random_field(g, 9, 4, h2_norm=2.0), 0, 2, p, sample_every=500)
    vals = [fn.phi1(s) for s in traj.states]
    assert max(abs(v - vals[0]) for v in vals) < 1e-6 * abs(vals[0])


def test_functional_samples_along_run(desk_params):
    p = desk_params.replace(mu=0.0)
    g = p.grid
    a = integrate(sp.random_field(g, 1, 8, h2_norm=5.0), 0, 2, p, sample_every=100)
    b = integrate(sp.random_field(g, 2, 8, h2_norm=5.0), 0, 2, p, sample_every=100)
    out = fn.sample_functionals(a, b)
    assert len(out) == len(a)
    for s in out:
        assert s.h1_bound_slack >= -1e-8
        assert s.h2_bound_slack >= -1e-8
        assert s.psi_bound_slack >= -1e-8
