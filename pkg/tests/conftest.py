import numpy as np
import pytest

from genhydro.thermo import ModelParams, conserved_from_primitives, n_sym


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _random_states(params, rng, n, w_max=0.5, c_max=0.5):
    d = params.dim
    rho = rng.uniform(0.5, 2.0, n)
    u = rng.uniform(0.5, 2.0, n)
    v = rng.uniform(-1.0, 1.0, (n, d))
    w = rng.uniform(-w_max, w_max, (n, d)) / np.sqrt(d)
    c = rng.uniform(-c_max, c_max, (n, n_sym(d))) / np.sqrt(n_sym(d))
    return conserved_from_primitives(rho, v, u, w, c, params)


@pytest.fixture
def random_states():
    """Factory for admissible states on the compact sampling set."""
    return _random_states


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
