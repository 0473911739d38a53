import numpy as np
import pytest

from dipbec.atkm import precompute_kernel_coefficients
from dipbec.grid import Grid
from dipbec.model import GPEModel, ModelParams


def gaussian_density(grid, sigma=1.0, shift=(0.0, 0.0, 0.0)):
    X, Y, Z = grid.coords
    a, b, c = shift
    r2 = (X - a) ** 2 + (Y - b) ** 2 + (Z - c) ** 2
    return (2.0 * np.pi * sigma**2) ** -1.5 * np.exp(-r2 / (2.0 * sigma**2))


def random_field(grid, rng, smooth=True):
    f = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
    if smooth:
        f = f * np.exp(-0.25 * grid.r2)
    return grid.normalize(f)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid16():
    return Grid(8.0, (1.0, 1.0, 1.0), (16, 16, 16))


@pytest.fixture(scope="session")
def table16(grid16):
    return precompute_kernel_coefficients(grid16)


@pytest.fixture(scope="session")
def full_model16(grid16, table16):
    return GPEModel(grid16, ModelParams(beta=100.0, lam=80.0, omega=0.4), table16)
