"""
Proximal operator of eta * G for a monotone inverse link g.

prox_{eta G}(x) is the unique root z of z + eta * g(z) = x. The batch entry
point runs a safeguarded Newton iteration on a whole array at once: Newton
steps from z0 = x, with a bisection fallback inside a bracket found by
geometric expansion.
"""
from dataclasses import dataclass

import numpy as np

from hdglm.exceptions import BracketFailure, NonMonotoneLink, OutOfRange
from hdglm.model_zoo.links import LinkSpec

MAX_DOUBLINGS = 60
MAX_ITER = 100
TOL = 1e-12


@dataclass(frozen=True)
class ProxQuery:
    x: float
    eta: float
    link: LinkSpec


def _bracket(x, eta, link):
    # f(z) = z + eta*g(z) - x is increasing and f(x) = eta*g(x)
    gx = link.g(x)
    lo = np.where(gx > 0, np.nan, x)
    hi = np.where(gx > 0, x, np.nan)
    need_lo, need_hi = np.isnan(lo), np.isnan(hi)
    step = np.maximum(1.0, np.abs(x))
    for _ in range(MAX_DOUBLINGS):
        if not (need_lo.any() or need_hi.any()):
            return lo, hi
        if need_lo.any():
            cand = x[need_lo] - step[need_lo]
            ok = cand + eta * link.g(cand) - x[need_lo] <= 0
            idx = np.flatnonzero(need_lo)
            lo[idx[ok]] = cand[ok]
            need_lo[idx[ok]] = False
        if need_hi.any():
            cand = x[need_hi] + step[need_hi]
            ok = cand + eta * link.g(cand) - x[need_hi] >= 0
            idx = np.flatnonzero(need_hi)
            hi[idx[ok]] = cand[ok]
            need_hi[idx[ok]] = False
        step = 2.0 * step
    if need_lo.any() or need_hi.any():
        raise BracketFailure(f"No bracket after {MAX_DOUBLINGS} doublings")
    return lo, hi


def prox_batch(x, eta, link, tol=TOL, max_iter=MAX_ITER):
    """Evaluate prox_{eta G} elementwise over the array ``x``."""
    if not link.is_monotone:
        raise NonMonotoneLink(f"prox needs a monotone link, got '{link.family_tag}'")
    if not eta >= 0:
        raise OutOfRange("eta must be nonnegative")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    if eta == 0 or x.size == 0:
        return x.copy().reshape(shape)

    lo, hi = _bracket(x, eta, link)
    z = x.copy()
    atol = tol * np.maximum(1.0, np.abs(x))
    active = np.arange(x.size)
    for _ in range(max_iter):
        za, xa = z[active], x[active]
        f = za + eta * link.g(za) - xa
        done = np.abs(f) <= atol[active]
        lo[active] = np.where(f < 0, za, lo[active])
        hi[active] = np.where(f > 0, za, hi[active])
        newton = za - f / (1.0 + eta * link.dg(za))
        outside = ~((newton > lo[active]) & (newton < hi[active]))
        z[active] = np.where(done, za, np.where(outside, 0.5 * (lo[active] + hi[active]), newton))
        collapsed = hi[active] - lo[active] <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(za))
        active = active[~(done | collapsed)]
        if not active.size:
            break
    return z.reshape(shape)


def prox(query):
    """Scalar prox_{eta G}(x)."""
    return float(prox_batch(np.array([query.x]), query.eta, query.link)[0])
