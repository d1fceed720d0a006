"""
Data-driven inputs of the state-evolution system: the signal strength
gamma^2, the Gaussian noise variance sigma_e^2 and the conditional feature
variances tau_j^2.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.linear_model import LinearRegression

from hdglm.exceptions import (
    DegenerateSignal, DimensionMismatch, InsufficientData, NoBracket, OddLink, OutOfRange, RankDeficient
)
from hdglm.model_zoo.responses import GaussianAdditive

logger = logging.getLogger(__name__)

DEFAULT_M = 1_000_000
MAX_DOUBLINGS = 40


@dataclass(frozen=True)
class HyperEstimates:
    gamma2_hat: float
    tau2_hat: np.ndarray = field(repr=False)
    sigma_e2_hat: float = None
    mc_samples_used: int = DEFAULT_M
    split_spec: str = ""

    def as_dict(self):
        return {
            "gamma2_hat": float(self.gamma2_hat),
            "sigma_e2_hat": None if self.sigma_e2_hat is None else float(self.sigma_e2_hat),
            "tau2_hat": [float(t) for t in self.tau2_hat],
            "mc_samples_used": int(self.mc_samples_used),
            "split_spec": self.split_spec,
        }


@lru_cache(maxsize=8)
def _normal_panel(m, seed):
    # antithetic pairs (z, -z): the panel mean of g(varsigma z) is then the
    # panel mean of the even part of g, monotone whenever that part is
    half = np.random.default_rng(seed).standard_normal(m // 2)
    z = np.concatenate([half, -half, np.zeros(m % 2)])
    z.setflags(write=False)
    return z


def _check_m(m):
    if m < 10_000:
        raise OutOfRange(f"Simulated means need m >= 10^4 draws, got {m}")


def simulated_mean_curve(link, varsigma, m=DEFAULT_M, seed=0):
    """
    m^-1 sum_k g(varsigma z_k) over a standard-normal panel fixed by ``seed``.
    The panel is shared by every varsigma, so for links whose even part is
    strictly monotone the curve is exactly monotone in varsigma.
    """
    _check_m(m)
    if varsigma == 0:
        return float(link.g(0.0))
    with np.errstate(over="ignore"):
        return float(np.mean(link.g(varsigma * _normal_panel(m, seed))))


def simulated_second_moment(link, varsigma, m=DEFAULT_M, seed=0):
    _check_m(m)
    with np.errstate(over="ignore"):
        g = link.g(varsigma * _normal_panel(m, seed))
    return float(np.mean(g * g))


def estimate_gamma2(y_mean, link, m=DEFAULT_M, seed=0, bracket_hi=4.0):
    """
    Solve n^-1 sum_i Y_i = E[g(varsigma Z)] for varsigma by bisection on the
    shared-panel curve and return varsigma^2.
    """
    if not link.even_part_strictly_monotone:
        raise OddLink(f"gamma2 is not identifiable: the even part of the '{link.family_tag}' link is constant")
    if not np.isfinite(y_mean):
        raise NoBracket("Response mean is not finite")
    base = float(link.g(0.0))
    if y_mean == base:
        return 0.0

    def gap(s):
        return simulated_mean_curve(link, s, m, seed) - y_mean

    hi = float(bracket_hi)
    for _ in range(MAX_DOUBLINGS + 1):
        if gap(hi) * (base - y_mean) < 0:
            break
        hi *= 2.0
    else:
        raise NoBracket(f"Response mean {y_mean:.6g} is outside the range of E[g(varsigma Z)]")

    lo = 0.0
    lo_gap = base - y_mean
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        mid_gap = gap(mid)
        if abs(mid_gap) <= 1e-10 or hi - lo <= 1e-15 * max(1.0, hi):
            lo = hi = mid
            break
        if mid_gap * lo_gap > 0:
            lo, lo_gap = mid, mid_gap
        else:
            hi = mid
    varsigma = 0.5 * (lo + hi)
    logger.debug("Signal strength: varsigma=%.8g for response mean %.8g", varsigma, y_mean)
    return varsigma ** 2


def split_indices(n):
    """I_n = first floor(n/2) rows, and its complement."""
    half = n // 2
    return np.arange(half), np.arange(half, n)


def split_difference(data, link, moment_rows, gamma_rows, m=DEFAULT_M, seed=0):
    """mean(Y_i^2 over moment_rows) - E[g(gamma_hat Z)^2], gamma_hat from gamma_rows."""
    gamma2 = estimate_gamma2(float(np.mean(data.y[gamma_rows])), link, m, seed)
    second = simulated_second_moment(link, np.sqrt(gamma2), m, seed)
    return float(np.mean(data.y[moment_rows] ** 2)) - second


def estimate_sigma_e2(data, link, m=DEFAULT_M, seed=0, clip=True):
    """
    mean(Y_i^2 over I_n) - E[g(gamma_hat Z)^2], with gamma_hat taken from the
    complementary half. The difference is computed for both orientations of
    the split and averaged; ``clip`` floors the average at 0.
    """
    if data.n < 20:
        raise InsufficientData(f"sigma_e^2 needs at least 20 observations, got {data.n}")
    if not link.even_part_strictly_monotone:
        raise OddLink(f"gamma2 is not identifiable: the even part of the '{link.family_tag}' link is constant")
    first, rest = split_indices(data.n)
    raw = 0.5 * (split_difference(data, link, first, rest, m, seed) + split_difference(data, link, rest, first, m, seed))
    if raw < 0:
        logger.debug("Noise variance difference %.4g is negative", raw)
    return max(raw, 0.0) if clip else raw


def estimate_tau2(data):
    """
    tau_j^2 = RSS_j / (n - p + 1), where RSS_j is the residual sum of squares
    of X_j regressed on the other columns, read off as 1 / [(X^T X)^-1]_jj.
    """
    n, p = data.n, data.p
    if not n > p:
        raise DimensionMismatch(f"tau_j^2 needs n > p, got n={n}, p={p}")
    try:
        factor = cho_factor(data.X.T @ data.X, check_finite=False)
        inv_diag = np.diag(cho_solve(factor, np.eye(p), check_finite=False))
    except (LinAlgError, ValueError) as err:
        raise RankDeficient("X does not have full column rank") from err
    if not np.all(inv_diag > 0):
        raise RankDeficient("X does not have full column rank")
    return 1.0 / inv_diag / (n - p + 1)


def tau2_by_regression(data):
    """Same estimate as ``estimate_tau2`` via p explicit least-squares fits."""
    n, p = data.n, data.p
    rss = np.empty(p)
    for j in range(p):
        target = data.X[:, j]
        if p == 1:
            rss[j] = target @ target
            continue
        others = np.delete(data.X, j, axis=1)
        resid = target - LinearRegression(fit_intercept=False).fit(others, target).predict(others)
        rss[j] = resid @ resid
    return rss / (n - p + 1)


class Calibrator:
    """
    Estimates every hyper-parameter a model needs.

    params:
        mc_samples: panel size for the simulated means (10^6)
        seed: panel seed (0)
        bracket_hi: initial upper end of the varsigma bracket (4.0)
    """

    def __init__(self, params=None):
        params = params or {}
        self.MODEL_NAME = "Calibrator"
        self.mc_samples = params.get("mc_samples", DEFAULT_M)
        self.seed = params.get("seed", 0)
        self.bracket_hi = params.get("bracket_hi", 4.0)

    def calibrate(self, data, model):
        link = model.link
        gamma2 = estimate_gamma2(float(np.mean(data.y)), link, self.mc_samples, self.seed, self.bracket_hi)
        if not gamma2 > 0:
            raise DegenerateSignal("Estimated signal strength is zero")
        sigma_e2, split = None, "none"
        if isinstance(model.law, GaussianAdditive):
            sigma_e2 = estimate_sigma_e2(data, link, self.mc_samples, self.seed)
            split = f"first {data.n // 2} rows / last {data.n - data.n // 2} rows, both orientations averaged"
        tau2 = estimate_tau2(data)
        logger.info("Calibrated gamma2=%.6g sigma_e2=%s mean tau2=%.4g", gamma2, sigma_e2, float(np.mean(tau2)))
        return HyperEstimates(gamma2, tau2, sigma_e2, self.mc_samples, split)
