from dataclasses import dataclass

import numpy as np
from scipy.special import exp1, expit

from hdglm.exceptions import InvalidLinkParameter


@dataclass(frozen=True)
class LinkSpec:
    """
    Inverse link g together with its antiderivative G and derivative g'.
    All evaluation rules accept scalars or arrays and return float arrays.
    """

    family_tag = "base"
    monotone = True
    even_monotone = True

    def g(self, t):
        raise NotImplementedError

    def dg(self, t):
        raise NotImplementedError

    def G(self, t):
        raise NotImplementedError

    @property
    def is_monotone(self):
        return self.monotone

    @property
    def even_part_strictly_monotone(self):
        return self.even_monotone

    def even_part(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * (self.g(s) + self.g(-s))

    def describe(self):
        return {"family": self.family_tag}


@dataclass(frozen=True)
class Logistic(LinkSpec):
    # g(t) = 1/(1+exp(-(t - shift))); any nonzero shift breaks the odd symmetry
    shift: float = 0.0
    family_tag = "logistic"

    def g(self, t):
        return expit(np.asarray(t, dtype=float) - self.shift)

    def dg(self, t):
        p = self.g(t)
        return p * (1.0 - p)

    def G(self, t):
        return np.logaddexp(0.0, np.asarray(t, dtype=float) - self.shift)

    @property
    def even_part_strictly_monotone(self):
        return self.shift != 0.0

    def describe(self):
        return {"family": self.family_tag, "shift": self.shift}


@dataclass(frozen=True)
class ClippedExp(LinkSpec):
    """
    Exponential inverse link continued linearly beyond t = log(threshold).
    The value and slope both equal ``threshold`` at the knot. An infinite
    threshold gives the plain exponential link.
    """

    threshold: float = 50.0
    family_tag = "clippedexp"

    @property
    def knot(self):
        return np.log(self.threshold)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        if not np.isfinite(self.threshold):
            with np.errstate(over="ignore"):
                return np.exp(t)
        c, knot = self.threshold, self.knot
        return np.where(t <= knot, np.exp(np.minimum(t, knot)), c * (t + 1.0 - knot))

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        if not np.isfinite(self.threshold):
            with np.errstate(over="ignore"):
                return np.exp(t)
        return np.where(t <= self.knot, np.exp(np.minimum(t, self.knot)), self.threshold)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        if not np.isfinite(self.threshold):
            with np.errstate(over="ignore"):
                return np.exp(t)
        c, knot = self.threshold, self.knot
        u = np.maximum(t - knot, 0.0)
        return np.where(t <= knot, np.exp(np.minimum(t, knot)), c * (1.0 + u + 0.5 * u * u))

    def describe(self):
        return {"family": self.family_tag, "threshold": self.threshold}


@dataclass(frozen=True)
class Piecewise(LinkSpec):
    """g(t) = min(slope_pos * t, slope_neg * t); the slope order is irrelevant."""

    slope_pos: float = 5.0
    slope_neg: float = 0.1
    family_tag = "piecewise"

    @property
    def _low(self):
        return min(self.slope_pos, self.slope_neg)

    @property
    def _high(self):
        return max(self.slope_pos, self.slope_neg)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self._low * t, self._high * t)

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self._low, self._high) * np.ones_like(t)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * np.where(t > 0, self._low, self._high) * t * t

    @property
    def is_monotone(self):
        return self._low >= 0.0

    def describe(self):
        return {"family": self.family_tag, "slope_pos": self.slope_pos, "slope_neg": self.slope_neg}


@dataclass(frozen=True)
class Cloglog(LinkSpec):
    family_tag = "cloglog"

    def g(self, t):
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(np.asarray(t, dtype=float)))

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(t - np.exp(t))

    def G(self, t):
        # d/dt E1(e^t) = -exp(-e^t)
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return t + exp1(np.exp(t))


@dataclass(frozen=True)
class Linear(LinkSpec):
    family_tag = "linear"
    even_monotone = False

    def g(self, t):
        return np.asarray(t, dtype=float) * 1.0

    def dg(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def G(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * t * t


@dataclass(frozen=True)
class Square(LinkSpec):
    # calibration experiments only: fitting paths reject it
    family_tag = "square"
    monotone = False

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return t * t

    def dg(self, t):
        return 2.0 * np.asarray(t, dtype=float)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        return t * t * t / 3.0


LINK_FAMILIES = {
    "logistic": Logistic,
    "clippedexp": ClippedExp,
    "piecewise": Piecewise,
    "cloglog": Cloglog,
    "linear": Linear,
    "square": Square,
}


def make_link(family_tag, *args, **kwargs):
    """
    Build a link from its family name, e.g. ``make_link("clippedexp", 50)``
    or ``make_link("piecewise", 5, 0.1)``. ``"exp"`` is the unclipped
    exponential link.
    """
    tag = family_tag.lower()
    if tag == "exp":
        return ClippedExp(np.inf)
    if tag not in LINK_FAMILIES:
        raise InvalidLinkParameter(f"Unknown link family '{family_tag}'")
    try:
        link = LINK_FAMILIES[tag](*args, **kwargs)
    except TypeError as err:
        raise InvalidLinkParameter(f"Bad parameters for link '{family_tag}': {err}") from err

    if isinstance(link, ClippedExp) and not link.threshold > 0:
        raise InvalidLinkParameter("ClippedExp threshold must be positive")
    if isinstance(link, Piecewise) and link.slope_pos == link.slope_neg:
        raise InvalidLinkParameter("Piecewise slopes must differ")
    if isinstance(link, Logistic) and not np.isfinite(link.shift):
        raise InvalidLinkParameter("Logistic shift must be finite")
    return link
