import numpy as np
import pytest

from retirebound import ModelParams, solve_boundary


@pytest.fixture(scope="session")
def params():
    return ModelParams.baseline()


@pytest.fixture(scope="session")
def sol200(params):
    return solve_boundary(params, n_steps=200)


@pytest.fixture(scope="session")
def sol_low_gamma():
    # gamma < 1 needs beta above the finiteness floor (0.04 here)
    p = ModelParams(gamma=0.5, beta=0.05)
    return solve_boundary(p, n_steps=100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
