import logging
from dataclasses import dataclass, field

import numpy as np

from hdglm.exceptions import DimensionMismatch, InvalidData, OutOfRange

logger = logging.getLogger(__name__)


def derive_seed(base_seed, *keys):
    """
    Counter-keyed child seed: the (base_seed, keys) pair is hashed by
    ``numpy.random.SeedSequence`` so replication streams never overlap.
    """
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    gamma2: float
    seed: int
    p: int = None
    kappa: float = None

    def __post_init__(self):
        if self.p is None and self.kappa is None:
            raise DimensionMismatch("Give either p or kappa")
        if self.n < 1 or self.dim < 1:
            raise DimensionMismatch(f"Need n >= 1 and p >= 1, got n={self.n}, p={self.dim}")
        if not self.gamma2 > 0:
            raise OutOfRange("gamma2 must be positive")

    @property
    def dim(self):
        if self.p is not None:
            return int(self.p)
        return int(round(self.kappa * self.n))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    beta_true: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise DimensionMismatch("X must be a matrix")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidData("Dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.beta_true is not None:
            beta = np.asarray(self.beta_true, dtype=float).ravel()
            if beta.shape[0] != X.shape[1]:
                raise DimensionMismatch("beta_true length differs from the column count of X")
            object.__setattr__(self, "beta_true", beta)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def kappa(self):
        return self.p / self.n


def sample_dataset(config, model, cov):
    """
    Draw X with i.i.d. N_p(0, Sigma) rows, a coefficient vector rescaled so
    that beta^T Sigma beta = gamma2 exactly, and y_i = h(x_i^T beta, e_i).
    Everything comes from one generator seeded by ``config.seed``.
    """
    n, p = config.n, config.dim
    if cov.p != p:
        raise DimensionMismatch(f"Covariance is {cov.p}-dimensional but p={p}")
    rng = np.random.default_rng(config.seed)

    X = cov.sample(rng, n)
    beta = rng.standard_normal(p)
    theta = cov.transform(beta)
    beta = beta * np.sqrt(config.gamma2 / (theta @ theta))
    y = model.sample_y(X @ beta, rng)
    logger.debug("Sampled %s dataset n=%d p=%d seed=%d", model.name, n, p, config.seed)
    return Dataset(X, y, beta)


def augment_with_noise(dataset, extra_p, seed):
    """
    Append ``extra_p`` independent N(0, 1) feature columns (with zero true
    coefficients) to push a real design towards a larger p/n.
    """
    if extra_p < 0:
        raise OutOfRange("extra_p must be nonnegative")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((dataset.n, extra_p))
    beta = None
    if dataset.beta_true is not None:
        beta = np.concatenate([dataset.beta_true, np.zeros(extra_p)])
    return Dataset(np.hstack([dataset.X, noise]), dataset.y, beta)
