import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cisim.grid import make_grid
from cisim.model import ModelParams

settings.register_profile(
    "cisim",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("cisim")


@pytest.fixture
def params():
    return ModelParams.from_gamma(0.1)


@pytest.fixture
def small_grid(params):
    return make_grid(params, 41, 41)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_values(rng, grid, ncomp=1, complex_=True):
    v = rng.standard_normal((ncomp, *grid.shape))
    if complex_:
        v = v + 1j * rng.standard_normal((ncomp, *grid.shape))
    return v
