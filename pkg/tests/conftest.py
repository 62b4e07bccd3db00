import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from toeplitz_spectra import load_model
from toeplitz_spectra.cli import fixture_path

ACCEPTANCE_LINES: dict = {}


def model(name):
    return load_model(fixture_path("models", name))


def multiset_distance(a, b) -> float:
    """Largest distance after optimally matching two equal-size point sets."""
    a = np.asarray(a, complex).ravel()
    b = np.asarray(b, complex).ravel()
    assert a.size == b.size
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if a.size else 0.0


def random_symbol(rng, L, scale=1.0):
    from toeplitz_spectra import new_block_symbol

    def cm():
        return scale * (rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L)))

    return new_block_symbol(L, cm(), cm(), cm())


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture(scope="session")
def hn():
    return model("hatano_nelson")


@pytest.fixture(scope="session")
def lap():
    return model("laplacian")


@pytest.fixture(scope="session")
def ssh():
    return model("ssh_chiral")


@pytest.fixture(scope="session")
def five():
    return model("five_diagonal")


@pytest.fixture(scope="session")
def selfadj():
    return model("selfadjoint")


@pytest.fixture(scope="session")
def three():
    return model("three_diag")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
