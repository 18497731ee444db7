import numpy as np
import pytest

from statichedge.mc_oracle import McConfig
from statichedge.models import build_asset, driver_from_skew, gaussian_claim, univariate_model

ALPHA = 0.005
SIGMA_L = 0.388


def lognormal_model(sigma, skew=0.0, sigma_l=SIGMA_L):
    return univariate_model(build_asset("lognormal", sigma, driver_from_skew(skew)), gaussian_claim(sigma_l))


@pytest.fixture(scope="session")
def base_model():
    return lognormal_model(0.2, -0.3)


@pytest.fixture(scope="session")
def small_cfg():
    return McConfig(n_samples=1_000_000, seed=11, n_chunks=16, alpha=ALPHA, jobs=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
