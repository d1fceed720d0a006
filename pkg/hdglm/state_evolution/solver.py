import logging
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from hdglm.estimators.prox import prox_batch
from hdglm.exceptions import (
    DegenerateSignal, NegativeVariance, NoConvergence, NonMonotoneLink, OutOfRange
)
from hdglm.model_zoo.glm import GlmModel
from hdglm.state_evolution.panel import McPanel

logger = logging.getLogger(__name__)

MIN_SIGNAL = 1e-8
MIN_DAMPING = 1.0 / 1024


@dataclass(frozen=True)
class SeParams:
    mu: float
    sigma2: float
    eta: float

    def __post_init__(self):
        if not all(np.isfinite([self.mu, self.sigma2, self.eta])):
            raise OutOfRange("State-evolution parameters must be finite")
        if not (self.sigma2 > 0 and self.eta > 0):
            raise OutOfRange("State-evolution parameters need sigma2 > 0 and eta > 0")

    @property
    def sigma(self):
        return float(np.sqrt(self.sigma2))

    def as_dict(self):
        return {"mu": float(self.mu), "sigma2": float(self.sigma2), "eta": float(self.eta)}


@dataclass(frozen=True)
class SeProblem:
    """
    One state-evolution system. ``lam == 0`` is the plain system (needs
    kappa < 1); ``lam > 0`` is the ridge system, with lam the penalty on the
    averaged loss (a raw ridge level divided by n).
    """

    kappa: float
    gamma2: float
    model: GlmModel
    lam: float = 0.0
    mc_samples: int = 200_000
    seed: int = 0
    damping: float = 0.5
    tol: float = 1e-6
    max_iter: int = 2000
    init: tuple = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise OutOfRange("kappa must be positive")
        if self.lam < 0:
            raise OutOfRange("lambda must be nonnegative")
        if self.lam == 0 and not self.kappa < 1:
            raise OutOfRange("The unpenalized system needs kappa < 1")
        if not self.gamma2 >= 0:
            raise OutOfRange("gamma2 must be nonnegative")
        if not 0 < self.damping <= 1:
            raise OutOfRange("damping must lie in (0, 1]")
        if self.mc_samples < 1:
            raise OutOfRange("mc_samples must be positive")
        if not self.model.link.is_monotone:
            raise NonMonotoneLink(f"No state evolution for the '{self.model.link.family_tag}' link")

    @property
    def ridge(self):
        return self.lam > 0

    def initial(self):
        if self.init is not None:
            return tuple(float(v) for v in self.init)
        return 1.0, self.kappa * self.gamma2 + 1.0, 1.0

    def panel(self):
        if self.gamma2 < MIN_SIGNAL:
            raise DegenerateSignal("gamma2 is numerically zero: mu is not identified")
        if self.mc_samples < 10_000:
            logger.warning("Solving with only %d Monte-Carlo draws", self.mc_samples)
        return McPanel.draw(self.model, self.gamma2, self.mc_samples, self.seed)


class SeResiduals(NamedTuple):
    r1: float
    r2: float
    r3: float


def _panel_terms(mu, sigma2, eta, prob, panel):
    link = prob.model.link
    z = np.sqrt(panel.gamma2) * np.asarray(panel.q1, dtype=float)
    arg = mu * z + np.sqrt(prob.kappa * sigma2) * np.asarray(panel.q2, dtype=float) + eta * np.asarray(panel.y_bar, dtype=float)
    d = prox_batch(arg, eta, link)
    res = np.asarray(panel.y_bar, dtype=float) - link.g(d)
    inv = 1.0 / (1.0 + eta * link.dg(d))
    return z, res, inv


def _evaluate(params, prob, panel):
    z, res, inv = _panel_terms(params.mu, params.sigma2, params.eta, prob, panel)
    m = res.shape[0]
    sq = params.eta ** 2 * res * res
    zr = z * res
    residuals = SeResiduals(
        prob.kappa ** 2 * params.sigma2 - float(np.mean(sq)),
        2.0 * panel.gamma2 * prob.lam * params.mu - float(np.mean(zr)),
        1.0 - prob.kappa + 2.0 * prob.lam * params.eta - float(np.mean(inv)),
    )
    errors = SeResiduals(*(float(np.std(v) / np.sqrt(m)) for v in (sq, zr, inv)))
    return residuals, errors


def residual_se(params, prob, panel=None):
    """
    LHS - RHS of the three equations

        kappa^2 sigma^2         = eta^2 E[(Y_bar - g(D))^2]
        2 gamma^2 lam mu        = E[Z (Y_bar - g(D))]
        1 - kappa + 2 lam eta   = E[1 / (1 + eta g'(D))]

    with D = prox_{eta G}(mu Z + sqrt(kappa) sigma Q2 + eta Y_bar), Z = gamma Q1,
    averaged over the panel (lam = 0 for the plain system).
    """
    panel = panel if panel is not None else prob.panel()
    return _evaluate(params, prob, panel)[0]


def mc_standard_errors(params, prob, panel=None):
    """Monte-Carlo standard errors of the three panel averages in ``residual_se``."""
    panel = panel if panel is not None else prob.panel()
    return _evaluate(params, prob, panel)[1]


def solve_se(prob, panel=None):
    """
    Damped fixed-point iteration on a fixed panel:

        eta'    = kappa eta / (1 - E[1/(1 + eta g'(d))] + 2 lam eta)
        sigma2' = eta'^2 / kappa^2 E[(Y_bar - g(d))^2]
        mu'     = mu + eta' / (kappa gamma^2) (E[Z (Y_bar - g(d))] - 2 gamma^2 lam mu)

    The mu update is written as a correction so its fixed points are exactly
    the second equation. Damping halves whenever the eta updates oscillate
    without contracting.
    """
    panel = panel if panel is not None else prob.panel()
    if panel.gamma2 < MIN_SIGNAL:
        raise DegenerateSignal("gamma2 is numerically zero: mu is not identified")
    kappa, lam, gamma2 = prob.kappa, prob.lam, panel.gamma2
    mu, sigma2, eta = prob.initial()
    damping = prob.damping
    prev_step = 0.0

    for k in range(1, prob.max_iter + 1):
        z, res, inv = _panel_terms(mu, sigma2, eta, prob, panel)
        denom = 1.0 - float(np.mean(inv)) + 2.0 * lam * eta
        if not denom > 0:
            raise NoConvergence(f"eta update undefined at iteration {k}")
        eta_new = kappa * eta / denom
        sigma2_new = eta_new ** 2 / kappa ** 2 * float(np.mean(res * res))
        mu_new = mu + eta_new / (kappa * gamma2) * (float(np.mean(z * res)) - 2.0 * gamma2 * lam * mu)
        if not (np.isfinite(sigma2_new) and sigma2_new > 0):
            raise NegativeVariance(f"sigma2 proposal {sigma2_new:.4g} at iteration {k}")
        if not (np.isfinite(eta_new) and np.isfinite(mu_new)):
            raise NoConvergence(f"Non-finite state-evolution update at iteration {k}")

        step = eta_new - eta
        if prev_step * step < 0 and abs(step) > 0.5 * abs(prev_step) and damping > MIN_DAMPING:
            damping *= 0.5
            logger.debug("eta oscillates; damping reduced to %.4g", damping)
        prev_step = step

        # relative change of the undamped proposal
        change = max(
            abs(a - b) / max(abs(b), 1e-12) for a, b in zip((mu_new, sigma2_new, eta_new), (mu, sigma2, eta))
        )
        mu = (1.0 - damping) * mu + damping * mu_new
        sigma2 = (1.0 - damping) * sigma2 + damping * sigma2_new
        eta = (1.0 - damping) * eta + damping * eta_new
        if k % 50 == 0:
            logger.debug("SE k=%d mu=%.6g sigma2=%.6g eta=%.6g change=%.2e", k, mu, sigma2, eta, change)
        if change < prob.tol:
            logger.info("SE converged in %d iterations: mu=%.6g sigma2=%.6g eta=%.6g", k, mu, sigma2, eta)
            params = SeParams(mu, sigma2, eta)
            _check_residuals(params, prob, panel)
            return params
    raise NoConvergence(f"State evolution did not converge within {prob.max_iter} iterations")


def _check_residuals(params, prob, panel):
    residuals, errors = _evaluate(params, prob, panel)
    for name, r, e in zip(SeResiduals._fields, residuals, errors):
        if abs(r) > 5.0 * e:
            logger.warning("SE residual %s=%.3g exceeds five Monte-Carlo errors (%.3g)", name, r, e)


def solve_se_multistart(prob, seeds, rtol=None):
    """
    Solve on one panel per seed and return every distinct fixed point.
    Two solutions are the same when all components agree to ``rtol``
    (default: five Monte-Carlo jitters, 5 / sqrt(m), but at least 1%).
    """
    rtol = rtol if rtol is not None else max(0.01, 5.0 / np.sqrt(prob.mc_samples))
    found = []
    for seed in seeds:
        sol = solve_se(replace(prob, seed=int(seed)))
        vec = np.array([sol.mu, sol.sigma2, sol.eta])
        if not any(np.all(np.abs(vec - other) <= rtol * np.abs(other)) for other, _ in found):
            found.append((vec, sol))
    if len(found) > 1:
        logger.warning("State evolution has %d distinct fixed points across seeds", len(found))
    return [sol for _, sol in found]
