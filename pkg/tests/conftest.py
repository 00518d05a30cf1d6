import numpy as np
import pytest

from spectralrefiner import Grid, RealField, sample_spectral_noise


@pytest.fixture
def grid_1d():
    return Grid((64,), (1.0,))


@pytest.fixture
def grid_small():
    return Grid((16,), (1.0,))


@pytest.fixture
def grid_2d():
    return Grid((16, 16), (0.5, 0.5))


def random_real_field(grid, seed, channels=("u",)):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((len(channels), *grid.points))
    return RealField(grid, values, channels)


def random_spectral_field(grid, seed, channels=("u",)):
    return sample_spectral_noise(grid, np.random.default_rng(seed), channels)
