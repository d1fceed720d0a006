import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from hdglm.exceptions import (
    DimensionMismatch, MissingTruth, NonMonotoneLink, OutOfRange, SingularHessian
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    final_gradient_norm: float
    diverged: bool
    loss: float = float("nan")
    lam: float = 0.0
    loss_path: tuple = field(default=(), repr=False)

    def summary(self):
        return {
            "converged": bool(self.converged),
            "diverged": bool(self.diverged),
            "iterations": int(self.iterations),
            "final_gradient_norm": float(self.final_gradient_norm),
            "loss": float(self.loss),
            "lambda": float(self.lam),
        }


def _require_monotone(link):
    if not link.is_monotone:
        raise NonMonotoneLink(f"Surrogate loss is not convex for the '{link.family_tag}' link")


def surrogate_loss(b, data, link):
    """sum_i G(x_i^T b) - y_i x_i^T b."""
    _require_monotone(link)
    eta = data.X @ np.asarray(b, dtype=float)
    return float(np.sum(link.G(eta) - data.y * eta))


def surrogate_gradient(b, data, link):
    return data.X.T @ (link.g(data.X @ b) - data.y)


def fisher_information(data, link, b):
    """Empirical information n^-1 sum_i g'(x_i^T b) x_i x_i^T."""
    w = link.dg(data.X @ b)
    return (data.X * w[:, None]).T @ data.X / data.n


class SurrogateFitter:
    """
    Damped Newton minimizer of the surrogate loss plus lam * ||b||^2.

    params:
        max_iter: Newton iterations (100)
        tol: stopping level for ||gradient|| / n (1e-8)
        max_norm: ||b|| beyond which the estimate is flagged as diverged (1e6)
        stall_limit: consecutive non-contracting steps with growing ||b|| that
            also flag divergence (10)
        max_halvings: backtracking halvings per line search (50)
    """

    def __init__(self, params=None):
        params = params or {}
        self.MODEL_NAME = "SurrogateNewton"
        self.max_iter = params.get("max_iter", 100)
        self.tol = params.get("tol", 1e-8)
        self.max_norm = params.get("max_norm", 1e6)
        self.stall_limit = params.get("stall_limit", 10)
        self.max_halvings = params.get("max_halvings", 50)
        self.armijo = params.get("armijo", 1e-4)

    def _objective(self, b, data, link, lam):
        eta = data.X @ b
        return float(np.sum(link.G(eta) - data.y * eta) + lam * (b @ b))

    def fit(self, data, link, lam=0.0):
        _require_monotone(link)
        if lam < 0:
            raise OutOfRange("lambda must be nonnegative")
        n, p = data.n, data.p
        if lam == 0 and n <= p:
            raise DimensionMismatch(f"Unpenalized fit needs n > p, got n={n}, p={p}")

        b = np.zeros(p)
        loss = self._objective(b, data, link, lam)
        path = [loss]
        prev_step_norm = np.inf
        stalls = 0
        gnorm = np.inf
        diverged = converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            eta = data.X @ b
            grad = data.X.T @ (link.g(eta) - data.y) + 2.0 * lam * b
            gnorm = float(np.linalg.norm(grad))
            if gnorm / n <= self.tol:
                converged = True
                break

            hess = (data.X * link.dg(eta)[:, None]).T @ data.X
            hess[np.diag_indices_from(hess)] += 2.0 * lam
            try:
                step = cho_solve(cho_factor(hess, check_finite=False), grad, check_finite=False)
            except (LinAlgError, ValueError):
                if stalls:
                    diverged = True
                    break
                raise SingularHessian("Hessian of the surrogate loss is singular (rank-deficient design?)")

            decrement = float(grad @ step)
            t, accepted = 1.0, False
            for _ in range(self.max_halvings):
                trial = b - t * step
                trial_loss = self._objective(trial, data, link, lam)
                if trial_loss <= loss - self.armijo * t * decrement:
                    accepted = True
                    break
                if decrement <= 1e-14 * max(1.0, abs(loss)) and trial_loss <= loss:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                logger.debug("Line search failed at iteration %d (gradient norm %.3e)", it, gnorm)
                break

            step_norm = t * float(np.linalg.norm(step))
            grew = np.linalg.norm(trial) > np.linalg.norm(b)
            stalls = stalls + 1 if (grew and step_norm >= 0.5 * prev_step_norm) else 0
            b, loss, prev_step_norm = trial, trial_loss, step_norm
            path.append(loss)
            logger.debug("Newton it=%d loss=%.10g |grad|/n=%.3e step=%.3e", it, loss, gnorm / n, step_norm)

            if np.linalg.norm(b) > self.max_norm or stalls >= self.stall_limit:
                diverged = True
                break

        if diverged:
            converged = False
            logger.warning("Surrogate estimate diverged after %d iterations (|b|=%.3e)", it, np.linalg.norm(b))
        elif not converged:
            logger.warning("Newton stopped after %d iterations with |grad|/n=%.3e", it, gnorm / n)
        return FitResult(b, converged, it, gnorm, diverged, loss, lam, tuple(path))


def fit_surrogate(data, link, opts=None):
    return SurrogateFitter(opts).fit(data, link)


def fit_ridge(data, link, lam, opts=None):
    """Minimize the surrogate loss plus lam * sum_j b_j^2 (raw, not n-scaled, lam)."""
    if not lam > 0:
        raise OutOfRange("Ridge penalty must be positive")
    return SurrogateFitter(opts).fit(data, link, lam)


def empirical_se(beta_hat, beta_true, cov, kappa):
    """
    (mu_n, sigma_n^2) of an estimate against the truth, with theta = L^T beta:
    mu_n = theta_hat^T theta / ||theta||^2 and
    sigma_n^2 = ||theta_hat - mu_n theta||^2 / kappa.

    With unscaled N(0, Sigma) rows this is already the SE scale (it equals
    n p^-1 ||theta_hat - mu_n theta||^2), so no extra factor of n applies.
    """
    if beta_true is None:
        raise MissingTruth("empirical_se needs the true coefficients")
    theta = cov.transform(beta_true)
    theta_hat = cov.transform(beta_hat)
    mu_n = float(theta_hat @ theta / (theta @ theta))
    resid = theta_hat - mu_n * theta
    return mu_n, float(resid @ resid / kappa)
