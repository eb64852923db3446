import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from contactkam import model as M
from contactkam.action import peierls_barrier
from contactkam.grid import Grid, ScalarField
from contactkam.semigroup import weak_kam_backward

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def e1_model():
    return M.e1()


@pytest.fixture(scope="session")
def e2_model():
    return M.e2()


@pytest.fixture(scope="session")
def e1_solution(e1_model):
    """u- on a 256-node grid, iterated tightly so the zero section is clean."""
    g = Grid(256, TWO_PI)
    return weak_kam_backward(e1_model, ScalarField.constant(g, 0.3), 0.01, 1e-9)


@pytest.fixture(scope="session")
def e2_solutions(e2_model):
    """Zero solution and the pinned solutions at levels -0.5 and -1 on 128 nodes."""
    g = Grid(128, 1.0)
    out = {0.0: weak_kam_backward(e2_model, ScalarField.constant(g, 0.0), 0.01)}
    for u in (-0.5, -1.0):
        bar = peierls_barrier(e2_model, 0.0, u, g, 0.01, tol=1e-8)
        out[u] = weak_kam_backward(e2_model, bar, 0.01)
    return out


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    """Verdict lines of the acceptance criteria, printed in the terminal summary."""
    return pytestconfig.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
