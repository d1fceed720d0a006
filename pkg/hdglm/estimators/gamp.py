import logging
from dataclasses import dataclass, field

import numpy as np

from hdglm.estimators.prox import prox_batch
from hdglm.exceptions import DimensionMismatch, NoConvergence, NonMonotoneLink

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GampState:
    beta_k: np.ndarray = field(repr=False)
    xi_k: np.ndarray = field(repr=False)
    eta_bar: float
    mu_bar: float
    sigma2_bar: float
    k: int

    def beta_hat(self):
        """Estimator on the data scale: beta^k / sqrt(n)."""
        return self.beta_k / np.sqrt(self.xi_k.shape[0])


class GampSolver:
    """
    Message-passing iteration whose fixed point is the surrogate estimator.
    With X_s = X / sqrt(n):

        s^k       = y - g(prox_{eta G}(xi^k + eta y))
        beta^k+1  = beta^k + (eta / kappa) X_s^T s^k
        xi^k+1    = X_s beta^k+1 - eta s^k

    ``schedule="stationary"`` keeps eta at the state-evolution value;
    ``"adaptive"`` re-estimates it every iteration from the empirical
    average of 1 / (1 + eta g'), a diagnostic mode.
    """

    def __init__(self, params=None):
        params = params or {}
        self.MODEL_NAME = "GAMP"
        self.max_iter = params.get("max_iter", 5000)
        self.tol = params.get("tol", 1e-8)
        self.schedule = params.get("schedule", "stationary")
        self.damping = params.get("damping", 1.0)

    def step(self, state, data, link):
        """One iteration from ``state``; eta stays fixed unless adaptive."""
        n, p = data.n, data.p
        kappa = p / n
        eta = state.eta_bar
        Xs = data.X / np.sqrt(n)
        z = prox_batch(state.xi_k + eta * data.y, eta, link)
        s = data.y - link.g(z)
        beta = state.beta_k + self.damping * (eta / kappa) * (Xs.T @ s)
        xi = Xs @ beta - eta * s

        eta_next, sigma2 = eta, state.sigma2_bar
        if self.schedule == "adaptive":
            inv = np.mean(1.0 / (1.0 + eta * link.dg(z)))
            if inv < 1.0:
                eta_next = kappa * eta / (1.0 - inv)
            sigma2 = eta_next ** 2 / kappa ** 2 * float(np.mean(s * s))
        return GampState(beta, xi, eta_next, state.mu_bar, sigma2, state.k + 1)

    def fit(self, data, link, se):
        if not link.is_monotone:
            raise NonMonotoneLink(f"GAMP needs a monotone link, got '{link.family_tag}'")
        if not 0 < data.kappa < 1:
            raise DimensionMismatch(f"GAMP needs 0 < p/n < 1, got {data.kappa:.4f}")

        state = GampState(np.zeros(data.p), np.zeros(data.n), se.eta, se.mu, se.sigma2, 0)
        for _ in range(self.max_iter):
            new = self.step(state, data, link)
            if not (np.all(np.isfinite(new.beta_k)) and np.all(np.isfinite(new.xi_k))):
                raise NoConvergence(f"GAMP iterate became non-finite at k={new.k}")
            change = np.linalg.norm(new.beta_k - state.beta_k) / max(1.0, np.linalg.norm(state.beta_k))
            state = new
            if state.k % 100 == 0:
                logger.debug("GAMP k=%d relative change %.3e", state.k, change)
            if change < self.tol:
                logger.info("GAMP converged in %d iterations", state.k)
                return state
        raise NoConvergence(f"GAMP did not converge within {self.max_iter} iterations")


def gamp_fit(data, link, se, opts=None):
    return GampSolver(opts).fit(data, link, se)
