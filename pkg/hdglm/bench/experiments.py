"""
Seeded simulation experiments over grids of (n, kappa, gamma2, model, alpha)
cells. Every replication draws from its own counter-keyed seed, failures
are isolated per replication and per cell, and cells may run in parallel
processes whose results are merged back in grid order.
"""
import logging
import time
from dataclasses import dataclass, field
from multiprocessing import Manager, Process

import numpy as np
import pandas as pd
from tqdm import tqdm

from hdglm.bench.ks import ks_statistic
from hdglm.calibrate import estimate_gamma2, estimate_sigma_e2
from hdglm.estimators.surrogate import fit_surrogate
from hdglm.exceptions import HdglmError, NoConvergence, OutOfRange
from hdglm.inference import (
    HighDimInference, classical_ci, corrected_ci, debias_ridge, debiased_ridge_se, pivot_stats
)
from hdglm.model_zoo.covariance import make_covariance
from hdglm.model_zoo.glm import make_model
from hdglm.model_zoo.synthetic import SyntheticConfig, derive_seed, sample_dataset
from hdglm.state_evolution.solver import SeProblem, solve_se

logger = logging.getLogger(__name__)

SCENARIOS = (
    "GammaRecovery", "SigmaE2Recovery", "CoverageComparison", "SeCurves", "ErrorLimits", "PivotNormality"
)
BASE_COLUMNS = [
    "cell_id", "scenario", "n", "kappa", "gamma2", "model", "alpha",
    "mean", "std", "coverage", "replications", "completed", "status",
]
EXTRA_COLUMNS = {
    "GammaRecovery": ["gamma_true"],
    "SigmaE2Recovery": ["sigma_e2_true", "raw_mean", "raw_std"],
    "CoverageComparison": ["coverage_classical", "coverage_small", "coverage_large"],
    "SeCurves": ["mu_lo", "mu_hi", "sigma2_mean", "sigma2_std", "sigma2_lo", "sigma2_hi", "eta_mean"],
    "ErrorLimits": [
        "se_mu", "se_sigma2", "mse_mean", "mse_pred", "cosine_mean",
        "corrected_mse_rel_err", "cosine_rel_err",
    ],
    "PivotNormality": ["ks_stat", "ks_pvalue"],
}


@dataclass(frozen=True)
class Cell:
    n: int
    kappa: float
    gamma2: float
    model: str
    alpha: float = 0.1
    cov: str = "identity"
    rho: float = 0.5


@dataclass(frozen=True)
class ExperimentSpec:
    """
    params (all optional):
        se_mc_samples: state-evolution panel size (50000)
        calibration_samples: simulated-mean panel size (200000)
        oracle_se: solve the state evolution once per cell at the true gamma2
            instead of per replication at gamma2_hat (False)
        lambda: raw ridge penalty for PivotNormality (0)
        pivot_coord: coordinate tracked by PivotNormality (0)
        bootstrap: resamples for the SeCurves intervals (1000)
        workers: parallel processes over cells (1)
        record_wall_time: add a wall_time column (True)
        progress: show tqdm bars (False)
    plus the link/noise parameters understood by ``make_model``.
    """

    scenario_tag: str
    grid: tuple
    replications: int
    seed: int
    output_path: str = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario_tag not in SCENARIOS:
            raise OutOfRange(f"Unknown scenario '{self.scenario_tag}', expected one of {SCENARIOS}")
        if self.replications < 1:
            raise OutOfRange("replications must be at least 1")
        if not self.grid:
            raise OutOfRange("The experiment grid is empty")
        object.__setattr__(self, "grid", tuple(self.grid))

    @property
    def columns(self):
        cols = BASE_COLUMNS + EXTRA_COLUMNS[self.scenario_tag]
        if self.params.get("record_wall_time", True):
            cols = cols + ["wall_time"]
        return cols


@dataclass(frozen=True)
class ExperimentReport:
    rows: pd.DataFrame

    def to_csv(self, path):
        self.rows.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def _dataset(cell, model, seed):
    config = SyntheticConfig(cell.n, cell.gamma2, seed, kappa=cell.kappa)
    cov = make_covariance(cell.cov, config.dim, cell.rho)
    return sample_dataset(config, model, cov), cov


def _se_problem(cell, model, gamma2, params, seed, lam=0.0):
    return SeProblem(
        kappa=round(cell.kappa * cell.n) / cell.n,
        gamma2=gamma2,
        model=model,
        lam=lam,
        mc_samples=params.get("se_mc_samples", 50_000),
        seed=seed,
    )


def _bootstrap_interval(values, rng, resamples):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(np.mean(values)), float(np.mean(values))
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


class _Scenario:
    """One replication function plus the summary of a finished cell."""

    def __init__(self, spec, cell, cell_index):
        self.spec = spec
        self.params = spec.params
        self.cell = cell
        self.cell_index = cell_index
        self.model = make_model(cell.model, spec.params)
        self.context = {}

    def prepare(self):
        pass

    def replicate(self, seed):
        raise NotImplementedError

    def summarize(self, results):
        values = [r["value"] for r in results]
        return {"mean": float(np.mean(values)), "std": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0}


class _GammaRecovery(_Scenario):
    def replicate(self, seed):
        data, _ = _dataset(self.cell, self.model, seed)
        gamma2 = estimate_gamma2(
            float(np.mean(data.y)), self.model.link, self.params.get("calibration_samples", 200_000), seed
        )
        return {"value": float(np.sqrt(gamma2))}

    def summarize(self, results):
        out = super().summarize(results)
        out["gamma_true"] = float(np.sqrt(self.cell.gamma2))
        return out


class _SigmaE2Recovery(_Scenario):
    def replicate(self, seed):
        data, _ = _dataset(self.cell, self.model, seed)
        raw = estimate_sigma_e2(
            data, self.model.link, self.params.get("calibration_samples", 200_000), seed, clip=False
        )
        return {"value": max(raw, 0.0), "raw": float(raw)}

    def summarize(self, results):
        out = super().summarize(results)
        raw = [r["raw"] for r in results]
        out["sigma_e2_true"] = float(getattr(self.model.law, "sigma_e2", np.nan))
        out["raw_mean"] = float(np.mean(raw))
        out["raw_std"] = float(np.std(raw, ddof=1)) if len(raw) > 1 else 0.0
        return out


class _CoverageComparison(_Scenario):
    def prepare(self):
        if self.params.get("oracle_se", False):
            prob = _se_problem(self.cell, self.model, self.cell.gamma2, self.params, derive_seed(self.spec.seed, self.cell_index))
            self.context["se"] = solve_se(prob)

    def replicate(self, seed):
        data, _ = _dataset(self.cell, self.model, seed)
        pipeline = HighDimInference({
            **self.params,
            "model": self.cell.model,
            "alpha": self.cell.alpha,
            "mc_samples": self.params.get("se_mc_samples", 50_000),
            "calibration_samples": self.params.get("calibration_samples", 200_000),
            "seed": seed,
            "lambda": 0.0,
        })
        if "se" in self.context:
            pipeline.hyper = pipeline.calibrator.calibrate(data, self.model)
            pipeline.se = self.context["se"]
            pipeline.fit_result = pipeline.fitter.fit(data, self.model.link)
        else:
            pipeline.fit(data)
        if not pipeline.fit_result.converged:
            raise NoConvergence("Surrogate estimator did not converge")

        beta, beta_hat = data.beta_true, pipeline.fit_result.beta_hat
        inside = corrected_ci(beta_hat, pipeline.se, pipeline.hyper.tau2_hat, self.cell.alpha, data.n).contains(beta)
        classical = classical_ci(data, self.model.link, beta_hat, self.cell.alpha).contains(beta)
        small = np.abs(beta) <= np.median(np.abs(beta))
        return {
            "value": float(np.mean(inside)),
            "coverage_classical": float(np.mean(classical)),
            "coverage_small": float(np.mean(inside[small])),
            "coverage_large": float(np.mean(inside[~small])) if np.any(~small) else np.nan,
        }

    def summarize(self, results):
        out = super().summarize(results)
        out["coverage"] = out["mean"]
        for key in ("coverage_classical", "coverage_small", "coverage_large"):
            out[key] = float(np.nanmean([r[key] for r in results]))
        return out


class _SeCurves(_Scenario):
    def replicate(self, seed):
        sol = solve_se(_se_problem(self.cell, self.model, self.cell.gamma2, self.params, seed))
        return {"value": sol.mu, "sigma2": sol.sigma2, "eta": sol.eta}

    def summarize(self, results):
        out = super().summarize(results)
        rng = np.random.default_rng(derive_seed(self.spec.seed, self.cell_index, 2**31))
        resamples = self.params.get("bootstrap", 1000)
        sigma2 = [r["sigma2"] for r in results]
        out["mu_lo"], out["mu_hi"] = _bootstrap_interval([r["value"] for r in results], rng, resamples)
        out["sigma2_mean"] = float(np.mean(sigma2))
        out["sigma2_std"] = float(np.std(sigma2, ddof=1)) if len(sigma2) > 1 else 0.0
        out["sigma2_lo"], out["sigma2_hi"] = _bootstrap_interval(sigma2, rng, resamples)
        out["eta_mean"] = float(np.mean([r["eta"] for r in results]))
        return out


class _ErrorLimits(_Scenario):
    def prepare(self):
        prob = _se_problem(self.cell, self.model, self.cell.gamma2, self.params, derive_seed(self.spec.seed, self.cell_index))
        self.context["se"] = solve_se(prob)

    def replicate(self, seed):
        data, cov = _dataset(self.cell, self.model, seed)
        fit = fit_surrogate(data, self.model.link)
        if not fit.converged:
            raise NoConvergence("Surrogate estimator did not converge")
        se, beta, beta_hat = self.context["se"], data.beta_true, fit.beta_hat
        resid = cov.transform(beta_hat - se.mu * beta)
        return {
            "value": float(data.n / data.p * resid @ resid),
            "mse": float(np.mean((beta_hat - beta) ** 2)),
            "cosine": float(beta_hat @ beta / (beta @ beta)),
            "n": data.n,
            "p": data.p,
        }

    def summarize(self, results):
        out = super().summarize(results)
        se = self.context["se"]
        n, p = results[0]["n"], results[0]["p"]
        out["se_mu"], out["se_sigma2"] = se.mu, se.sigma2
        out["mse_mean"] = float(np.mean([r["mse"] for r in results]))
        # identity design: ||beta||^2 = gamma2
        out["mse_pred"] = (se.mu - 1.0) ** 2 * self.cell.gamma2 / p + se.sigma2 / n
        out["cosine_mean"] = float(np.mean([r["cosine"] for r in results]))
        out["corrected_mse_rel_err"] = abs(out["mean"] - se.sigma2) / se.sigma2
        out["cosine_rel_err"] = abs(out["cosine_mean"] - se.mu) / abs(se.mu)
        return out


class _PivotNormality(_Scenario):
    def replicate(self, seed):
        data, _ = _dataset(self.cell, self.model, seed)
        lam = self.params.get("lambda", 0.0)
        pipeline = HighDimInference({
            **self.params,
            "model": self.cell.model,
            "mc_samples": self.params.get("se_mc_samples", 50_000),
            "calibration_samples": self.params.get("calibration_samples", 200_000),
            "seed": seed,
            "lambda": lam,
        })
        pipeline.fit(data)
        if not pipeline.fit_result.converged:
            raise NoConvergence("Estimator did not converge")
        beta_hat, se = pipeline.fit_result.beta_hat, pipeline.se
        if lam > 0:
            beta_hat = debias_ridge(beta_hat, se.eta, lam / data.n, data.kappa)
            se = debiased_ridge_se(se, lam / data.n, data.kappa)
        j = self.params.get("pivot_coord", 0)
        pivot = pivot_stats(beta_hat, data.beta_true, se, pipeline.hyper.tau2_hat, data.n).values[j]
        return {"value": float(pivot)}

    def summarize(self, results):
        out = super().summarize(results)
        try:
            out["ks_stat"], out["ks_pvalue"] = ks_statistic([r["value"] for r in results])
        except HdglmError as err:
            logger.warning("KS test skipped: %s", err)
            out["ks_stat"] = out["ks_pvalue"] = np.nan
        return out


SCENARIO_CLASSES = {
    "GammaRecovery": _GammaRecovery,
    "SigmaE2Recovery": _SigmaE2Recovery,
    "CoverageComparison": _CoverageComparison,
    "SeCurves": _SeCurves,
    "ErrorLimits": _ErrorLimits,
    "PivotNormality": _PivotNormality,
}


def _empty_row(spec, cell_index):
    cell = spec.grid[cell_index]
    row = {col: np.nan for col in spec.columns}
    row.update({
        "cell_id": cell_index, "scenario": spec.scenario_tag, "n": cell.n, "kappa": cell.kappa,
        "gamma2": cell.gamma2, "model": cell.model, "alpha": cell.alpha,
        "replications": spec.replications, "completed": 0, "status": "failed",
    })
    return row


def run_cell(spec, cell_index):
    """Run every replication of one grid cell and return its report row."""
    cell = spec.grid[cell_index]
    start = time.perf_counter()
    row = _empty_row(spec, cell_index)
    try:
        scenario = SCENARIO_CLASSES[spec.scenario_tag](spec, cell, cell_index)
        scenario.prepare()
    except HdglmError as err:
        logger.error("Cell %d could not start: %s", cell_index, err)
        return row

    results = []
    reps = tqdm(range(spec.replications), desc=f"cell {cell_index}", disable=not spec.params.get("progress", False))
    for rep in reps:
        try:
            results.append(scenario.replicate(derive_seed(spec.seed, cell_index, rep)))
        except HdglmError as err:
            logger.warning("Cell %d replication %d failed: %s", cell_index, rep, err)

    if results:
        row.update(scenario.summarize(results))
        row["completed"] = len(results)
        row["status"] = "ok" if len(results) == spec.replications else "partial"
    if "wall_time" in row:
        row["wall_time"] = time.perf_counter() - start
    if spec.params.get("progress", False):
        tqdm.write(f"[{spec.scenario_tag}] cell {cell_index} | n={cell.n} kappa={cell.kappa} | "
                   f"mean={row['mean']:.4f} | {row['completed']}/{spec.replications} replications")
    return row


def _cell_worker(spec, cell_index, shared):
    shared[cell_index] = run_cell(spec, cell_index)


def run_experiment(spec):
    """
    Execute every cell of ``spec`` and return the report; cells run in
    ``params["workers"]`` processes and are merged back in grid order.
    """
    workers = int(spec.params.get("workers", 1))
    indices = list(range(len(spec.grid)))
    if workers <= 1:
        rows = [run_cell(spec, i) for i in indices]
    else:
        with Manager() as manager:
            shared = manager.dict()
            for block in range(0, len(indices), workers):
                procs = [Process(target=_cell_worker, args=(spec, i, shared)) for i in indices[block:block + workers]]
                for proc in procs:
                    proc.start()
                for proc in procs:
                    proc.join()
            # a worker that died without reporting leaves its cell marked failed
            rows = [shared.get(i, _empty_row(spec, i)) for i in indices]

    report = ExperimentReport(pd.DataFrame(rows, columns=spec.columns))
    if spec.output_path:
        report.to_csv(spec.output_path)
        logger.info("Wrote %s report to %s", spec.scenario_tag, spec.output_path)
    return report
