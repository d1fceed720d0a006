import numpy as np
import pandas as pd
import pytest

from hdglm.bench.experiments import Cell, ExperimentSpec, run_cell, run_experiment
from hdglm.exceptions import OutOfRange

FAST = {"calibration_samples": 20_000, "se_mc_samples": 10_000, "record_wall_time": False}


def _spec(scenario, cells, reps=3, **params):
    return ExperimentSpec(scenario, cells, reps, seed=42, params={**FAST, **params})


def test_gamma_recovery_cell():
    spec = _spec("GammaRecovery", [Cell(400, 0.1, 1.0, "poisson-clippedexp")])
    row = run_cell(spec, 0)
    assert row["status"] == "ok"
    assert row["completed"] == 3
    assert row["gamma_true"] == 1.0
    assert 0.5 < row["mean"] < 1.5


def test_failures_are_isolated_per_replication():
    spec = _spec("GammaRecovery", [Cell(100, 0.1, 1.0, "gaussian-linear"), Cell(400, 0.1, 1.0, "poisson-clippedexp")])
    report = run_experiment(spec)
    assert list(report.rows["status"]) == ["failed", "ok"]
    assert report.rows["completed"].tolist() == [0, 3]


def test_reports_are_reproducible():
    cells = [Cell(300, k, 1.0, "poisson-clippedexp") for k in (0.1, 0.2)]
    first = run_experiment(_spec("SeCurves", cells, bootstrap=50))
    second = run_experiment(_spec("SeCurves", cells, bootstrap=50))
    pd.testing.assert_frame_equal(first.rows, second.rows)
    assert "wall_time" not in first.rows.columns
    assert np.all(first.rows["mu_lo"] <= first.rows["mu_hi"])


def test_parallel_cells_merge_in_grid_order():
    cells = [Cell(300, k, 1.0, "poisson-clippedexp") for k in (0.1, 0.2, 0.3)]
    serial = run_experiment(_spec("SeCurves", cells, reps=2, bootstrap=20))
    parallel = run_experiment(_spec("SeCurves", cells, reps=2, bootstrap=20, workers=2))
    pd.testing.assert_frame_equal(serial.rows, parallel.rows)


def test_report_csv(tmp_path):
    path = tmp_path / "gamma.csv"
    spec = ExperimentSpec("GammaRecovery", [Cell(200, 0.1, 1.0, "poisson-clippedexp")], 2, seed=1,
                          output_path=str(path), params={"calibration_samples": 20_000})
    run_experiment(spec)
    frame = pd.read_csv(path)
    assert frame.columns[-1] == "wall_time"
    assert frame.loc[0, "scenario"] == "GammaRecovery"


def test_spec_validation():
    cell = Cell(100, 0.1, 1.0, "poisson-clippedexp")
    with pytest.raises(OutOfRange):
        ExperimentSpec("Nope", [cell], 1, 0)
    with pytest.raises(OutOfRange):
        ExperimentSpec("SeCurves", [cell], 0, 0)
    with pytest.raises(OutOfRange):
        ExperimentSpec("SeCurves", [], 1, 0)


def test_pivot_normality_runs():
    spec = _spec("PivotNormality", [Cell(300, 0.1, 1.0, "poisson-clippedexp")], reps=2)
    row = run_cell(spec, 0)
    assert row["completed"] == 2
    # too few pivots for the KS test
    assert np.isnan(row["ks_stat"])


@pytest.mark.slow
def test_gamma_recovery_acceptance():
    cells = [Cell(4000, k, 1.0, "poisson-clippedexp", cov="ar1") for k in (0.1, 0.3, 0.5)]
    report = run_experiment(ExperimentSpec("GammaRecovery", cells, 100, seed=1, params={"calibration_samples": 200_000}))
    assert np.all(np.abs(report.rows["mean"] - 1.0) <= 0.05)


@pytest.mark.slow
def test_sigma_e2_recovery_acceptance():
    cells = [Cell(4000, 0.1, 1.0, model) for model in ("gaussian-piecewise", "gaussian-square")]
    rows = run_experiment(ExperimentSpec("SigmaE2Recovery", cells, 100, seed=5, params={"sigma_e2": 0.04})).rows
    assert np.all(rows["sigma_e2_true"] == 0.04)
    # unbiased up to its replication error; flooring at zero only moves the mean up
    half_width = 3.0 * rows["raw_std"] / np.sqrt(rows["completed"])
    assert np.all(np.abs(rows["raw_mean"] - 0.04) <= half_width)
    assert np.all(rows["mean"] >= rows["raw_mean"])


@pytest.mark.slow
def test_corrected_coverage_acceptance():
    cells = [Cell(1000, 0.2, 1.0, "poisson-clippedexp")]
    report = run_experiment(ExperimentSpec("CoverageComparison", cells, 200, seed=2, params={"workers": 1}))
    assert abs(report.rows.loc[0, "coverage"] - 0.9) <= 0.03


@pytest.mark.slow
@pytest.mark.parametrize("gamma2", [1.0, 4.0])
def test_coverage_grid_acceptance(gamma2):
    cells = [Cell(1000, k, gamma2, "poisson-clippedexp") for k in (0.1, 0.3, 0.5)]
    rows = run_experiment(ExperimentSpec("CoverageComparison", cells, 200, seed=6, params={"workers": 3})).rows
    assert np.all(rows["completed"] >= 190)
    assert np.all(np.abs(rows["coverage"] - 0.9) <= 0.03)
    last = rows.iloc[-1]
    assert last["coverage_classical"] < last["coverage"] - 0.03


@pytest.mark.slow
def test_error_limits_acceptance():
    cells = [Cell(4000, 0.2, 1.0, "poisson-clippedexp")]
    row = run_experiment(ExperimentSpec("ErrorLimits", cells, 50, seed=3, params={"se_mc_samples": 200_000})).rows.loc[0]
    assert row["corrected_mse_rel_err"] <= 0.05
    assert row["cosine_rel_err"] <= 0.03


@pytest.mark.slow
def test_pivot_normality_acceptance():
    cells = [Cell(1000, 0.2, 1.0, "poisson-clippedexp")]
    row = run_experiment(ExperimentSpec("PivotNormality", cells, 200, seed=4, params={})).rows.loc[0]
    assert row["ks_pvalue"] > 0.01


@pytest.mark.slow
def test_debiased_ridge_pivot_normality_acceptance():
    cells = [Cell(1000, 0.2, 1.0, "poisson-clippedexp")]
    row = run_experiment(ExperimentSpec("PivotNormality", cells, 200, seed=7, params={"lambda": 20.0})).rows.loc[0]
    assert row["completed"] >= 190
    assert row["ks_pvalue"] > 0.01
