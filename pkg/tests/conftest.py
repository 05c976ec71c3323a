import numpy as np
import pytest

from fermitherm.model import BathSet, CoefficientMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_h(rng, n, irreducible=True):
    a = rng.normal(size=(n, n))
    h = (a + a.T) / 2
    if irreducible:
        for j in range(n - 1):
            if h[j, j + 1] == 0:
                h[j, j + 1] = h[j + 1, j] = 1.0
    return CoefficientMatrix(h)


def random_baths(rng, n, n_baths=None):
    n_baths = n if n_baths is None else n_baths
    return BathSet(rng.normal(size=(n_baths, 2 * n)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
