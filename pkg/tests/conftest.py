import numpy as np
import pytest

from hdglm.model_zoo.covariance import identity
from hdglm.model_zoo.glm import make_model
from hdglm.model_zoo.synthetic import SyntheticConfig, sample_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def poisson_model():
    return make_model("poisson-clippedexp")


@pytest.fixture
def small_poisson(poisson_model):
    config = SyntheticConfig(n=400, gamma2=1.0, seed=7, kappa=0.1)
    return sample_dataset(config, poisson_model, identity(config.dim))


@pytest.fixture
def small_gaussian():
    model = make_model("gaussian-linear", {"sigma_e2": 0.25})
    config = SyntheticConfig(n=300, gamma2=1.0, seed=11, p=30)
    return sample_dataset(config, model, identity(30))
