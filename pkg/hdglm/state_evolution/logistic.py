"""
Reference state evolution for logistic regression, written in the
symmetrized form with weights 2 g(Z):

    kappa^2 sigma^2 = E[2 g(Z) (eta g(D))^2]
    0               = E[2 g(Z) Z g(D)]
    1 - kappa       = E[2 g(Z) / (1 + eta g'(D))]

where D = prox_{eta G}(-mu Z + sqrt(kappa) sigma Q2). The -mu Z orientation
folds the Y = 1 branch of the general system onto the Y = 0 branch, so both
systems share their solution.
"""
import logging

import numpy as np

from hdglm.estimators.prox import prox_batch
from hdglm.exceptions import DegenerateSignal, NegativeVariance, NoConvergence, OutOfRange
from hdglm.model_zoo.links import Logistic
from hdglm.state_evolution.solver import MIN_SIGNAL, SeParams, SeResiduals

logger = logging.getLogger(__name__)

LOGISTIC = Logistic()


def _terms(mu, sigma2, eta, kappa, z, q2):
    d = prox_batch(-mu * z + np.sqrt(kappa * sigma2) * q2, eta, LOGISTIC)
    w = 2.0 * LOGISTIC.g(z)
    return w, LOGISTIC.g(d), 1.0 / (1.0 + eta * LOGISTIC.dg(d))


def _panel(gamma2, mc_samples, seed):
    rng = np.random.default_rng(seed)
    q1 = rng.standard_normal(mc_samples)
    q2 = rng.standard_normal(mc_samples)
    return np.sqrt(gamma2) * q1, q2


def logistic_residual_se(params, kappa, gamma2, mc_samples=200_000, seed=0):
    z, q2 = _panel(gamma2, mc_samples, seed)
    w, gd, inv = _terms(params.mu, params.sigma2, params.eta, kappa, z, q2)
    return SeResiduals(
        kappa ** 2 * params.sigma2 - float(np.mean(w * (params.eta * gd) ** 2)),
        -float(np.mean(w * z * gd)),
        1.0 - kappa - float(np.mean(w * inv)),
    )


def logistic_se_reference(kappa, gamma2, mc_samples=200_000, seed=0, damping=0.5, tol=1e-6, max_iter=2000):
    if not 0 < kappa < 0.5:
        raise OutOfRange("The logistic reference system is solved for kappa in (0, 0.5)")
    if gamma2 < MIN_SIGNAL:
        raise DegenerateSignal("gamma2 is numerically zero: mu is not identified")
    z, q2 = _panel(gamma2, mc_samples, seed)
    mu, sigma2, eta = 1.0, kappa * gamma2 + 1.0, 1.0
    prev_step = 0.0

    for k in range(1, max_iter + 1):
        w, gd, inv = _terms(mu, sigma2, eta, kappa, z, q2)
        denom = 1.0 - float(np.mean(w * inv))
        if not denom > 0:
            raise NoConvergence(f"eta update undefined at iteration {k}")
        eta_new = kappa * eta / denom
        sigma2_new = eta_new ** 2 / kappa ** 2 * float(np.mean(w * gd * gd))
        mu_new = mu + eta_new / (kappa * gamma2) * float(np.mean(w * z * gd))
        if not (np.isfinite(sigma2_new) and sigma2_new > 0):
            raise NegativeVariance(f"sigma2 proposal {sigma2_new:.4g} at iteration {k}")

        step = eta_new - eta
        if prev_step * step < 0 and abs(step) > 0.5 * abs(prev_step) and damping > 1.0 / 1024:
            damping *= 0.5
        prev_step = step

        new = (
            (1.0 - damping) * mu + damping * mu_new,
            (1.0 - damping) * sigma2 + damping * sigma2_new,
            (1.0 - damping) * eta + damping * eta_new,
        )
        change = max(abs(a - b) / max(abs(b), 1e-12) for a, b in zip(new, (mu, sigma2, eta)))
        mu, sigma2, eta = new
        if change < tol:
            logger.info("Logistic SE converged in %d iterations", k)
            return SeParams(mu, sigma2, eta)
    raise NoConvergence(f"Logistic state evolution did not converge within {max_iter} iterations")
