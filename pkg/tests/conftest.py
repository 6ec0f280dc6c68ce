import numpy as np
import pytest

from qcd_markov.model import ChangePointModel

A_B_3 = [[0.99, 0.005, 0.005], [0.005, 0.99, 0.005], [0.005, 0.005, 0.99]]
A_A_3 = [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]
A_B_2 = [[0.99, 0.01], [0.01, 0.99]]
RHO = 0.005

ACCEPTANCE_LINES: list[str] = []


def sym2(a):
    return [[a, 1 - a], [1 - a, a]]


def random_ergodic(rng: np.random.Generator, n: int) -> np.ndarray:
    """Strictly positive column-stochastic matrix, so always ergodic."""
    M = rng.dirichlet(np.full(n, 0.7), size=n).T + 1e-3
    return M / M.sum(axis=0)


@pytest.fixture
def model_va():
    return ChangePointModel.create(A_B_3, A_A_3, RHO)


@pytest.fixture
def model_2state():
    return ChangePointModel.create(A_B_2, sym2(0.84), RHO)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
