import numpy as np
import pytest

from gfcf.sparse import build_interactions, normalize
from gfcf.synthetic import random_interactions

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy():
    """The 2x2 running example R = [[1, 1], [1, 0]]."""
    return build_interactions([(0, 0), (0, 1), (1, 0)], 2, 2)


@pytest.fixture
def toy_norm(toy):
    return normalize(toy)


@pytest.fixture
def small_graph():
    return random_interactions(30, 50, 0.12, seed=11, min_degree=1)


def dense_normalized(R):
    """Independent dense D_U^{-1/2} R D_I^{-1/2} (zero degree -> zero scale)."""
    R = np.asarray(R, dtype=np.float64)
    du, di = R.sum(1), R.sum(0)
    su = np.where(du > 0, 1 / np.sqrt(np.where(du > 0, du, 1)), 0.0)
    si = np.where(di > 0, 1 / np.sqrt(np.where(di > 0, di, 1)), 0.0)
    return su[:, None] * R * si[None, :]
