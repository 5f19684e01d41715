import numpy as np
import pytest

from mems_blowup.core import MembraneState, build_grid


@pytest.fixture(scope="session")
def grid():
    return build_grid(257, 129)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(65, 33)


def parabola(grid, c):
    return MembraneState.from_samples(0.0, -c * (1 - grid.x_nodes**2), grid)


def flat(grid):
    return MembraneState.from_samples(0.0, np.zeros(grid.nx), grid)
