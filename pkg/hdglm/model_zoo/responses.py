"""
Response laws Y = h(z, e) with E[Y | z] = g(z).

Each law draws its noise from an explicit ``numpy.random.Generator`` and
returns both the responses and the primary noise draws, so a Monte-Carlo
panel can keep them fixed for the lifetime of a solve.
"""
from dataclasses import dataclass

import numpy as np

from hdglm.exceptions import InvalidRate, OutOfRange


@dataclass(frozen=True)
class ResponseLaw:
    law_tag = "base"

    def sample(self, mean, rng):
        """Return ``(y, u)`` for the conditional means ``mean``."""
        raise NotImplementedError

    def describe(self):
        return {"law": self.law_tag}


@dataclass(frozen=True)
class Bernoulli(ResponseLaw):
    law_tag = "bernoulli"

    def sample(self, mean, rng):
        mean = np.asarray(mean, dtype=float)
        if np.any((mean < 0.0) | (mean > 1.0)):
            raise InvalidRate("Bernoulli success probability outside [0, 1]")
        u = rng.random(mean.shape)
        # 1{u <= g(z)} keeps E[Y | z] = g(z)
        return (u <= mean).astype(float), u


@dataclass(frozen=True)
class Exponential(ResponseLaw):
    """Y ~ Exp with mean g(z), drawn by inversion as -log(u) * g(z)."""

    law_tag = "exponential"

    def sample(self, mean, rng):
        mean = np.asarray(mean, dtype=float)
        if np.any(mean <= 0.0):
            raise InvalidRate("Exponential response needs g(z) > 0")
        u = 1.0 - rng.random(mean.shape)
        return -np.log(u) * mean, u


@dataclass(frozen=True)
class Poisson(ResponseLaw):
    """
    Unit-rate Poisson process read at time g(z): Y counts the partial sums
    of Exp(1) inter-arrival times that do not exceed g(z). ``u`` holds the
    first inter-arrival time of every draw.
    """

    law_tag = "poisson"

    def sample(self, mean, rng):
        mean = np.asarray(mean, dtype=float)
        if np.any(mean <= 0.0):
            raise InvalidRate("Poisson response needs g(z) > 0")
        flat = mean.ravel()
        u = rng.standard_exponential(flat.shape)
        arrival = u.copy()
        counts = np.zeros(flat.shape)
        active = np.flatnonzero(arrival <= flat)
        while active.size:
            counts[active] += 1.0
            arrival[active] += rng.standard_exponential(active.size)
            active = active[arrival[active] <= flat[active]]
        return counts.reshape(mean.shape), u.reshape(mean.shape)


@dataclass(frozen=True)
class GaussianAdditive(ResponseLaw):
    sigma_e2: float = 0.04
    law_tag = "gaussian"

    def __post_init__(self):
        if not self.sigma_e2 >= 0.0:
            raise OutOfRange("Gaussian noise variance must be nonnegative")

    def sample(self, mean, rng):
        mean = np.asarray(mean, dtype=float)
        u = rng.standard_normal(mean.shape)
        return mean + np.sqrt(self.sigma_e2) * u, u

    def describe(self):
        return {"law": self.law_tag, "sigma_e2": self.sigma_e2}


RESPONSE_LAWS = {
    "bernoulli": Bernoulli,
    "exponential": Exponential,
    "poisson": Poisson,
    "gaussian": GaussianAdditive,
}


def h_sample(law, link, z, rng):
    """Draw responses h(z, e) for scalar or array ``z``."""
    y, _ = law.sample(link.g(np.atleast_1d(np.asarray(z, dtype=float))), rng)
    return float(y[0]) if np.ndim(z) == 0 else y
