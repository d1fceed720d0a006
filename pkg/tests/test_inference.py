import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose
from scipy.stats import norm

from hdglm.estimators.surrogate import fit_surrogate
from hdglm.exceptions import MissingTruth, NonPositiveMu, OutOfRange
from hdglm.inference import (
    HighDimInference, classical_ci, classical_linear_predictor_ci, corrected_ci, debias_ridge,
    debiased_ridge_ci, debiased_ridge_se, linear_predictor_ci, normal_quantile, pivot_stats,
    ridge_debias_factor
)
from hdglm.model_zoo.covariance import identity
from hdglm.model_zoo.glm import make_model
from hdglm.model_zoo.links import Linear
from hdglm.model_zoo.synthetic import SyntheticConfig, derive_seed, sample_dataset
from hdglm.state_evolution.solver import SeParams, SeProblem, solve_se

SE = SeParams(mu=1.2, sigma2=0.5, eta=0.4)


def test_normal_quantile():
    assert normal_quantile(0.95) == pytest.approx(norm.ppf(0.95), abs=1e-12)
    with pytest.raises(OutOfRange):
        normal_quantile(1.0)


def test_corrected_interval_formula():
    beta_hat = np.array([0.6, -1.2, 0.0])
    tau2 = np.array([1.0, 0.5, 2.0])
    report = corrected_ci(beta_hat, SE, tau2, alpha=0.1, n=400)
    rows = report.rows
    assert list(rows.columns) == ["j", "beta_hat", "center", "lo", "hi", "tau_hat"]
    assert_allclose(rows["center"], beta_hat / 1.2, atol=1e-12)
    width = 2 * norm.ppf(0.95) * np.sqrt(0.5) / (20.0 * 1.2 * np.sqrt(tau2))
    assert_allclose(rows["hi"] - rows["lo"], width, atol=1e-12)
    assert report.method_tag == "Corrected"


def test_intervals_nest_in_alpha():
    beta_hat, tau2 = np.linspace(-1, 1, 5), np.ones(5)
    wide = corrected_ci(beta_hat, SE, tau2, 0.05, 100).rows
    narrow = corrected_ci(beta_hat, SE, tau2, 0.2, 100).rows
    assert np.all(wide["lo"] <= narrow["lo"]) and np.all(narrow["hi"] <= wide["hi"])


def test_corrected_interval_rejects_bad_mu():
    with pytest.raises(NonPositiveMu):
        corrected_ci(np.zeros(2), SeParams(-0.1, 1.0, 1.0), np.ones(2), 0.1, 10)
    with pytest.raises(OutOfRange):
        corrected_ci(np.zeros(2), SE, np.ones(2), 0.0, 10)


def test_classical_interval_uses_inverse_information(small_gaussian):
    data = small_gaussian
    beta_hat = fit_surrogate(data, Linear()).beta_hat
    report = classical_ci(data, Linear(), beta_hat, 0.1)
    half = norm.ppf(0.95) * np.sqrt(np.diag(np.linalg.inv(data.X.T @ data.X)))
    assert_allclose((report.rows["hi"] - report.rows["lo"]) / 2, half, rtol=1e-10)
    assert_allclose(report.rows["center"], beta_hat)
    assert report.rows["tau_hat"].isna().all()


def test_classical_linear_predictor(small_gaussian):
    data = small_gaussian
    beta_hat = fit_surrogate(data, Linear()).beta_hat
    report = classical_linear_predictor_ci(data, Linear(), beta_hat, 0.1)
    hat = np.diag(data.X @ np.linalg.inv(data.X.T @ data.X) @ data.X.T)
    assert_allclose((report.rows["hi"] - report.rows["lo"]) / 2, norm.ppf(0.95) * np.sqrt(hat), rtol=1e-10)


def test_linear_predictor_interval_formula(small_gaussian):
    data = small_gaussian
    beta_hat = fit_surrogate(data, Linear()).beta_hat
    report = linear_predictor_ci(data, beta_hat, SE, Linear(), 0.1)
    lin = data.X @ beta_hat
    assert_allclose(report.rows["center"], (lin + 0.4 * (lin - data.y)) / 1.2)
    half = norm.ppf(0.95) * np.sqrt(data.kappa * 0.5) / 1.2
    assert_allclose(report.rows["hi"] - report.rows["center"], half)
    assert len(report.rows) == data.n


def test_ridge_debias_factor():
    assert ridge_debias_factor(0.5, 0.2, 1.0) == pytest.approx(1.0 / 0.8)
    assert ridge_debias_factor(0.5, 0.0, 1.0) == 1.0
    with pytest.raises(OutOfRange):
        ridge_debias_factor(5.0, 0.2, 1.0)
    assert_allclose(debias_ridge(np.array([1.0, -2.0]), 0.5, 0.2, 1.0), [1.25, -2.5])


def test_debiased_ridge_matches_corrected_interval():
    beta_ridge, tau2 = np.array([0.3, -0.4]), np.array([0.9, 1.1])
    se = debiased_ridge_se(SE, 0.1, 0.8)
    c = 0.8 / (0.8 - 0.08)
    assert se.mu == pytest.approx(c * 1.2)
    assert se.sigma2 == pytest.approx(c * c * 0.5)
    ridge = debiased_ridge_ci(beta_ridge, SE, tau2, 0.1, 200, 0.1, 0.8)
    plain = corrected_ci(beta_ridge, SE, tau2, 0.1, 200)
    assert_allclose(ridge.rows[["center", "lo", "hi"]], plain.rows[["center", "lo", "hi"]], atol=1e-12)
    assert ridge.method_tag == "DebiasedRidge"


def test_pivot_stats():
    beta = np.array([1.0, 0.0])
    beta_hat = np.array([1.3, 0.1])
    pivots = pivot_stats(beta_hat, beta, SE, np.array([1.0, 4.0]), n=100)
    assert_allclose(pivots.values, [10 * 0.1 / np.sqrt(0.5), 10 * 0.1 * 2 / np.sqrt(0.5)])
    with pytest.raises(MissingTruth):
        pivot_stats(beta_hat, None, SE, np.ones(2), 100)


def test_report_helpers(tmp_path):
    report = corrected_ci(np.array([0.0, 1.2]), SE, np.ones(2), 0.1, 100)
    assert list(report.contains(np.array([0.0, 5.0]))) == [True, False]
    assert report.coverage(np.array([0.0, 5.0])) == 0.5
    payload = json.loads(json.dumps(report.as_dict()))
    assert payload["method"] == "Corrected"
    assert payload["se_params"]["eta"] == 0.4
    report.to_csv(tmp_path / "ci.csv")
    assert_allclose(pd.read_csv(tmp_path / "ci.csv")["hi"], report.rows["hi"])


def test_pipeline_end_to_end(small_poisson):
    pipeline = HighDimInference({
        "model": "poisson-clippedexp", "mc_samples": 20_000, "calibration_samples": 100_000, "seed": 3,
    }).fit(small_poisson)
    assert pipeline.fit_result.converged
    assert pipeline.se.mu > 0
    reports = pipeline.intervals(small_poisson)
    assert set(reports) == {"corrected", "classical", "linear_predictor"}
    assert len(reports["corrected"].rows) == small_poisson.p
    assert np.all(np.isfinite(reports["corrected"].rows[["lo", "hi"]].to_numpy()))


def test_pipeline_with_ridge(small_poisson):
    pipeline = HighDimInference({
        "model": "poisson-clippedexp", "lambda": 20.0, "mc_samples": 20_000,
        "calibration_samples": 100_000, "seed": 3,
    }).fit(small_poisson)
    reports = pipeline.intervals(small_poisson)
    assert set(reports) == {"debiased_ridge", "linear_predictor"}
    assert reports["debiased_ridge"].method_tag == "DebiasedRidge"


@pytest.mark.slow
def test_linear_predictor_coverage():
    model = make_model("poisson-clippedexp")
    config = SyntheticConfig(n=2000, gamma2=1.0, seed=0, kappa=0.3)
    se = solve_se(SeProblem(config.dim / config.n, 1.0, model, mc_samples=200_000, seed=5))
    coverages = []
    for rep in range(3):
        data = sample_dataset(replace(config, seed=derive_seed(5, rep)), model, identity(config.dim))
        fit = fit_surrogate(data, model.link)
        report = linear_predictor_ci(data, fit.beta_hat, se, model.link, 0.1)
        coverages.append(report.coverage(data.X @ data.beta_true))
    assert abs(np.mean(coverages) - 0.9) <= 0.04
