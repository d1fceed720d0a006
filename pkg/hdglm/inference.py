import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtri

from hdglm.calibrate import Calibrator
from hdglm.estimators.surrogate import SurrogateFitter, fisher_information
from hdglm.exceptions import MissingTruth, NonPositiveMu, OutOfRange, SingularInformation
from hdglm.model_zoo.glm import make_model
from hdglm.state_evolution.solver import SeParams, SeProblem, solve_se

logger = logging.getLogger(__name__)

CI_COLUMNS = ["j", "beta_hat", "center", "lo", "hi", "tau_hat"]


@dataclass(frozen=True)
class CiReport:
    """
    Interval table with columns ``j, beta_hat, center, lo, hi, tau_hat``.
    For linear-predictor reports ``j`` indexes observations, ``beta_hat``
    holds x_i^T beta_hat and ``tau_hat`` is NaN; classical rows also carry
    a NaN ``tau_hat``.
    """

    alpha: float
    rows: pd.DataFrame = field(repr=False)
    method_tag: str
    se_params: SeParams = None
    hyper: object = None
    n: int = None

    def contains(self, truth):
        truth = np.asarray(truth, dtype=float)
        return (self.rows["lo"].to_numpy() <= truth) & (truth <= self.rows["hi"].to_numpy())

    def coverage(self, truth):
        return float(np.mean(self.contains(truth)))

    def as_dict(self):
        return {
            "alpha": float(self.alpha),
            "method": self.method_tag,
            "n": None if self.n is None else int(self.n),
            "se_params": None if self.se_params is None else self.se_params.as_dict(),
            "hyper": None if self.hyper is None else self.hyper.as_dict(),
            "rows": [
                {col: (int(row[col]) if col == "j" else _json_float(row[col])) for col in CI_COLUMNS}
                for _, row in self.rows.iterrows()
            ],
        }

    def to_csv(self, path):
        self.rows.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _json_float(value):
    value = float(value)
    return value if np.isfinite(value) else None


def _frame(j, beta_hat, center, half, tau_hat):
    return pd.DataFrame({
        "j": np.asarray(j, dtype=int),
        "beta_hat": beta_hat,
        "center": center,
        "lo": center - half,
        "hi": center + half,
        "tau_hat": tau_hat,
    }, columns=CI_COLUMNS)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha}")


def _check_mu(se):
    if not se.mu > 0:
        raise NonPositiveMu(f"mu = {se.mu:.4g} is not positive; the state-evolution solve is unusable")


def normal_quantile(q):
    """Inverse standard-normal CDF."""
    if not 0 < q < 1:
        raise OutOfRange(f"Quantile level must lie in (0, 1), got {q}")
    return float(ndtri(q))


def corrected_ci(beta_hat, se, tau2_hat, alpha, n, hyper=None):
    """beta_hat_j / mu -/+ z_{1-alpha/2} sigma / (sqrt(n) mu tau_j)."""
    _check_alpha(alpha)
    _check_mu(se)
    beta_hat = np.asarray(beta_hat, dtype=float)
    tau_hat = np.sqrt(np.asarray(tau2_hat, dtype=float))
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * se.sigma / (np.sqrt(n) * se.mu * tau_hat)
    rows = _frame(np.arange(beta_hat.size), beta_hat, beta_hat / se.mu, half, tau_hat)
    return CiReport(alpha, rows, "Corrected", se, hyper, n)


def _information_inverse(data, link, beta_hat):
    info = fisher_information(data, link, beta_hat)
    try:
        factor = cho_factor(info, check_finite=False)
        return cho_solve(factor, np.eye(data.p), check_finite=False)
    except (LinAlgError, ValueError) as err:
        raise SingularInformation("Empirical Fisher information is singular") from err


def classical_ci(data, link, beta_hat, alpha):
    """beta_hat_j -/+ z (I^-1_jj / n)^(1/2) with the empirical information I."""
    _check_alpha(alpha)
    beta_hat = np.asarray(beta_hat, dtype=float)
    inv = _information_inverse(data, link, beta_hat)
    half = normal_quantile(1.0 - alpha / 2.0) * np.sqrt(np.diag(inv) / data.n)
    rows = _frame(np.arange(data.p), beta_hat, beta_hat, half, np.nan)
    return CiReport(alpha, rows, "Classical", n=data.n)


def classical_linear_predictor_ci(data, link, beta_hat, alpha):
    """x_i^T beta_hat -/+ z (x_i^T I^-1 x_i / n)^(1/2) for every observation."""
    _check_alpha(alpha)
    beta_hat = np.asarray(beta_hat, dtype=float)
    inv = _information_inverse(data, link, beta_hat)
    lin = data.X @ beta_hat
    quad = np.einsum("ij,jk,ik->i", data.X, inv, data.X)
    half = normal_quantile(1.0 - alpha / 2.0) * np.sqrt(quad / data.n)
    rows = _frame(np.arange(data.n), lin, lin, half, np.nan)
    return CiReport(alpha, rows, "Classical", n=data.n)


def linear_predictor_ci(data, beta_hat, se, link, alpha):
    """
    (1/mu_Z) [x_i^T beta_hat + eta (g(x_i^T beta_hat) - y_i) -/+ sigma_Z z]
    with mu_Z = mu and sigma_Z = sqrt(kappa) sigma.
    """
    _check_alpha(alpha)
    _check_mu(se)
    lin = data.X @ np.asarray(beta_hat, dtype=float)
    shifted = lin + se.eta * (link.g(lin) - data.y)
    half = normal_quantile(1.0 - alpha / 2.0) * np.sqrt(data.kappa) * se.sigma / se.mu
    rows = _frame(np.arange(data.n), lin, shifted / se.mu, half, np.nan)
    return CiReport(alpha, rows, "LinearPredictor", se, n=data.n)


def ridge_debias_factor(eta, lam, kappa):
    """
    1 + 2s, where s = lam eta / (kappa - 2 lam eta) is the coefficient-side
    proximal scale of the ridge penalty (lam on the averaged-loss scale).
    """
    if eta == 0 or lam == 0:
        return 1.0
    gap = kappa - 2.0 * lam * eta
    if not gap > 0:
        raise OutOfRange("Ridge state evolution needs kappa > 2 lam eta")
    return 1.0 + 2.0 * lam * eta / gap


def debias_ridge(beta_ridge, eta, lam, kappa):
    """beta_ridge + s J'(beta_ridge) with J(t) = t^2, i.e. (1 + 2s) beta_ridge."""
    return ridge_debias_factor(eta, lam, kappa) * np.asarray(beta_ridge, dtype=float)


def debiased_ridge_se(se, lam, kappa):
    """(mu, sigma^2) of the debiased ridge estimator: both scale by 1 + 2s."""
    c = ridge_debias_factor(se.eta, lam, kappa)
    return SeParams(c * se.mu, c * c * se.sigma2, se.eta)


def debiased_ridge_ci(beta_ridge, se, tau2_hat, alpha, n, lam, kappa, hyper=None):
    _check_mu(se)
    debiased = debias_ridge(beta_ridge, se.eta, lam, kappa)
    report = corrected_ci(debiased, debiased_ridge_se(se, lam, kappa), tau2_hat, alpha, n, hyper)
    return CiReport(alpha, report.rows, "DebiasedRidge", report.se_params, hyper, n)


@dataclass(frozen=True)
class PivotSample:
    values: np.ndarray


def pivot_stats(beta_hat, beta_true, se, tau2_hat, n):
    """sqrt(n) (beta_hat_j - mu beta_j) tau_j / sigma for every coordinate."""
    if beta_true is None:
        raise MissingTruth("Pivots need the true coefficients")
    beta_hat = np.asarray(beta_hat, dtype=float)
    tau_hat = np.sqrt(np.asarray(tau2_hat, dtype=float))
    return PivotSample(np.sqrt(n) * (beta_hat - se.mu * np.asarray(beta_true, dtype=float)) * tau_hat / se.sigma)


class HighDimInference:
    """
    Full pipeline on one dataset: calibrate gamma^2 (and sigma_e^2), solve
    the state evolution at the estimates, fit the surrogate (or ridge)
    estimator and build corrected and classical intervals.

    params:
        model: ``<law>-<link>`` string, plus its link/noise parameters
        alpha: interval level (0.1)
        lambda: raw ridge penalty, 0 for the unpenalized estimator (0)
        mc_samples: state-evolution panel size (200000)
        calibration_samples: simulated-mean panel size (10^6)
        seed: panel seed (0)
    """

    def __init__(self, params):
        self.MODEL_NAME = "HighDimInference"
        self.params = params
        self.model = make_model(params.get("model", "poisson-clippedexp"), params)
        self.alpha = params.get("alpha", 0.1)
        self.lam = params.get("lambda", 0.0)
        self.mc_samples = params.get("mc_samples", 200_000)
        self.seed = params.get("seed", 0)
        self.calibrator = Calibrator({
            "mc_samples": params.get("calibration_samples", 1_000_000),
            "seed": self.seed,
        })
        self.fitter = SurrogateFitter(params.get("fit_options", {}))
        self.hyper = None
        self.se = None
        self.fit_result = None

    def fit(self, data):
        self.hyper = self.calibrator.calibrate(data, self.model)
        model = self.model
        if self.hyper.sigma_e2_hat is not None:
            model = model.with_noise_variance(self.hyper.sigma_e2_hat)
        problem = SeProblem(
            kappa=data.kappa,
            gamma2=self.hyper.gamma2_hat,
            model=model,
            lam=self.lam / data.n,
            mc_samples=self.mc_samples,
            seed=self.seed,
        )
        self.se = solve_se(problem)
        self.fit_result = self.fitter.fit(data, self.model.link, self.lam)
        return self

    def intervals(self, data):
        """Dict of CiReports keyed by method; call ``fit`` first."""
        beta_hat = self.fit_result.beta_hat
        reports = {}
        if self.lam > 0:
            reports["debiased_ridge"] = debiased_ridge_ci(
                beta_hat, self.se, self.hyper.tau2_hat, self.alpha, data.n, self.lam / data.n, data.kappa, self.hyper
            )
        else:
            reports["corrected"] = corrected_ci(beta_hat, self.se, self.hyper.tau2_hat, self.alpha, data.n, self.hyper)
            reports["classical"] = classical_ci(data, self.model.link, beta_hat, self.alpha)
        reports["linear_predictor"] = linear_predictor_ci(data, beta_hat, self.se, self.model.link, self.alpha)
        return reports
