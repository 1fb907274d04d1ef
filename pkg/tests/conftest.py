"""Shared fixtures: quiescent reference problems and solved states."""

import numpy as np
import pytest

import selfsim as ss
from selfsim import potential


def quiescent_field(grid: ss.Grid2D, K: float = -1.0) -> ss.ScalarField:
    """The exact radial solution phi* = -|xi|^2 / 2 + K."""
    return ss.ScalarField.from_function(
        grid, lambda x, y: -(x ** 2 + y ** 2) / 2.0 + K)


@pytest.fixture(scope="session")
def law():
    return ss.GasLaw(a=1.0, gamma=2.0)


@pytest.fixture(scope="session")
def grid65():
    return ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 65, 65)


@pytest.fixture(scope="session")
def quiescent_problem(law, grid65):
    return potential.PotentialProblem(law=law, grid=grid65,
                                      phi_b=quiescent_field(grid65))


@pytest.fixture(scope="session")
def quiescent_solution(quiescent_problem):
    """epsilon-continuation solve of the quiescent problem (shared; slow)."""
    phi, report = potential.epsilon_continuation(quiescent_problem)
    return phi, report
