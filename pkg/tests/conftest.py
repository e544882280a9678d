import math

import numpy as np
import pytest

from kdvda import spectral as sp
from kdvda.integrator import ModelParams

# criterion number -> (passed, detail); filled by the acceptance module
ACCEPTANCE: dict = {}


def record(criterion, passed, detail=""):
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        passed = passed and prev[0]
        detail = f"{prev[1]}; {detail}" if detail else prev[1]
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("abc")), str(k))):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def grid64():
    return sp.GridSpec(2 * math.pi, 64)


@pytest.fixture(scope="session")
def desk_grid():
    return sp.GridSpec(2 * math.pi, 128)


@pytest.fixture(scope="session")
def desk_forcing(desk_grid):
    # cos x + 0.3 sin 2x
    return sp.from_modes(desk_grid, [(1, 1.0, 0.0), (2, 0.3, -math.pi / 2)])


@pytest.fixture(scope="session")
def desk_params(desk_grid, desk_forcing):
    return ModelParams(desk_grid, desk_forcing, gamma=0.5, mu=10.0, m=8, dt=1e-3)


def sin_field(grid, k=1, amp=1.0):
    return sp.from_function(grid, lambda x: amp * np.sin(k * x))


def cos_field(grid, k=1, amp=1.0):
    return sp.from_function(grid, lambda x: amp * np.cos(k * x))
