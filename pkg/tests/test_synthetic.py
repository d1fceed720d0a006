import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdglm.exceptions import DimensionMismatch, InvalidCovariance, InvalidData, OutOfRange
from hdglm.model_zoo.covariance import ar1, explicit, identity, make_covariance
from hdglm.model_zoo.glm import make_model
from hdglm.model_zoo.io import read_dataset, read_vector, write_dataset, write_vector
from hdglm.model_zoo.synthetic import (
    Dataset, SyntheticConfig, augment_with_noise, derive_seed, sample_dataset
)


def test_ar1_covariance_and_sampling(rng):
    cov = ar1(10, 0.5)
    assert_allclose(cov.sigma[0, 3], 0.125)
    X = cov.sample(rng, 100_000)
    assert np.max(np.abs(np.cov(X, rowvar=False) - cov.sigma)) < 0.05


def test_transform_gives_quadratic_form(rng):
    cov = ar1(8, 0.3)
    beta = rng.standard_normal(8)
    theta = cov.transform(beta)
    assert_allclose(theta @ theta, beta @ cov.sigma @ beta)


def test_conditional_variances_match_precision():
    cov = ar1(12, 0.5)
    assert_allclose(cov.conditional_variances(), 1.0 / np.diag(np.linalg.inv(cov.sigma)))
    assert_allclose(cov.conditional_variances()[5], 0.6)
    assert_allclose(identity(4).conditional_variances(), 1.0)


@pytest.mark.parametrize("build", [
    lambda: ar1(5, 1.0),
    lambda: identity(0),
    lambda: explicit(np.array([[1.0, 2.0], [2.0, 1.0]])),
    lambda: explicit(np.array([[1.0, 0.1], [0.2, 1.0]])),
    lambda: make_covariance("banded", 4),
])
def test_invalid_covariances(build):
    with pytest.raises(InvalidCovariance):
        build()


@pytest.mark.parametrize("cov_tag", ["identity", "ar1"])
def test_signal_strength_is_exact(cov_tag, poisson_model):
    config = SyntheticConfig(n=200, gamma2=1.7, seed=5, kappa=0.25)
    cov = make_covariance(cov_tag, config.dim, 0.5)
    data = sample_dataset(config, poisson_model, cov)
    assert data.p == 50
    assert_allclose(data.beta_true @ cov.sigma @ data.beta_true, 1.7, rtol=1e-12)


def test_sample_mean_matches_link_expectation(poisson_model):
    config = SyntheticConfig(n=4000, gamma2=1.0, seed=13, kappa=0.3)
    data = sample_dataset(config, poisson_model, ar1(config.dim, 0.5))
    z = np.random.default_rng(99).standard_normal(1_000_000)
    oracle = poisson_model.link.g(z)
    tol = 4 * np.sqrt(np.var(data.y) / data.n + np.var(oracle) / z.size)
    assert abs(np.mean(data.y) - np.mean(oracle)) <= tol


def test_sampling_is_reproducible(poisson_model):
    config = SyntheticConfig(n=50, gamma2=1.0, seed=3, p=5)
    a = sample_dataset(config, poisson_model, identity(5))
    b = sample_dataset(config, poisson_model, identity(5))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_derive_seed_is_keyed():
    assert derive_seed(1, 0, 0) == derive_seed(1, 0, 0)
    seeds = {derive_seed(1, c, r) for c in range(5) for r in range(20)}
    assert len(seeds) == 100
    assert derive_seed(1, 0, 1) != derive_seed(2, 0, 1)


def test_config_validation():
    with pytest.raises(DimensionMismatch):
        SyntheticConfig(n=10, gamma2=1.0, seed=0)
    with pytest.raises(OutOfRange):
        SyntheticConfig(n=10, gamma2=0.0, seed=0, p=2)


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(InvalidData):
        Dataset(np.full((2, 2), np.nan), np.zeros(2))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((4, 2)), np.zeros(4), np.zeros(3))


def test_augment_with_noise(small_poisson):
    wider = augment_with_noise(small_poisson, 10, seed=1)
    assert wider.p == small_poisson.p + 10
    assert np.array_equal(wider.X[:, :small_poisson.p], small_poisson.X)
    assert_allclose(wider.beta_true[small_poisson.p:], 0.0)


def test_csv_round_trip_keeps_bits(tmp_path, small_poisson):
    path = tmp_path / "data.csv"
    write_dataset(small_poisson, path)
    assert (tmp_path / "beta_true.csv").exists()
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join([f"x{j + 1}" for j in range(small_poisson.p)] + ["y"])
    back = read_dataset(path)
    assert np.array_equal(back.X, small_poisson.X)
    assert np.array_equal(back.y, small_poisson.y)
    assert np.array_equal(back.beta_true, small_poisson.beta_true)


def test_vector_io(tmp_path):
    values = np.array([0.1, -2.5e-8, 3.0])
    write_vector(tmp_path / "v.csv", values)
    assert np.array_equal(read_vector(tmp_path / "v.csv"), values)


def test_read_dataset_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,y\n1,2,3\n", encoding="utf-8")
    with pytest.raises(DimensionMismatch):
        read_dataset(path)


def test_read_dataset_rejects_text(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,y\n1,abc\n", encoding="utf-8")
    with pytest.raises(InvalidData):
        read_dataset(path)


def test_model_strings():
    model = make_model("gaussian-piecewise", {"slope_pos": 2.0, "slope_neg": 0.5, "sigma_e2": 0.1})
    assert model.name == "gaussian-piecewise"
    assert model.law.sigma_e2 == 0.1
    assert model.with_noise_variance(0.3).law.sigma_e2 == 0.3
    assert make_model("poisson-clippedexp", {"threshold": 20}).link.threshold == 20
