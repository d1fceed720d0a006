from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, toeplitz

from hdglm.exceptions import InvalidCovariance


@dataclass(frozen=True)
class CovarianceModel:
    """
    Feature covariance Sigma with its lower Cholesky factor L (Sigma = L L^T).
    Build through ``identity``, ``ar1`` or ``explicit``.
    """

    tag: str
    p: int
    rho: float = 0.0
    chol_lower: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def sigma(self):
        if self.tag == "identity":
            return np.eye(self.p)
        return self.chol_lower @ self.chol_lower.T

    def sample(self, rng, n):
        """n i.i.d. rows N_p(0, Sigma), generated as L times standard normals."""
        z = rng.standard_normal((n, self.p))
        if self.tag == "identity":
            return z
        return z @ self.chol_lower.T

    def transform(self, beta):
        """theta = L^T beta, so that ||theta||^2 = beta^T Sigma beta."""
        beta = np.asarray(beta, dtype=float)
        if self.tag == "identity":
            return beta.copy()
        return self.chol_lower.T @ beta

    def conditional_variances(self):
        """tau_j^2 = Var(X_j | X_-j) = 1 / (Sigma^-1)_jj."""
        if self.tag == "identity":
            return np.ones(self.p)
        linv = np.linalg.inv(self.chol_lower)
        return 1.0 / np.sum(linv * linv, axis=0)

    def describe(self):
        out = {"cov": self.tag, "p": self.p}
        if self.tag == "ar1":
            out["rho"] = self.rho
        return out


def identity(p):
    if p < 1:
        raise InvalidCovariance("p must be a positive integer")
    return CovarianceModel("identity", int(p), chol_lower=np.eye(int(p)))


def ar1(p, rho):
    """Sigma_ij = rho^|i-j|."""
    if p < 1:
        raise InvalidCovariance("p must be a positive integer")
    if not -1.0 < rho < 1.0:
        raise InvalidCovariance("rho must be in (-1, 1)")
    sigma = toeplitz(rho ** np.arange(p))
    return CovarianceModel("ar1", int(p), float(rho), cholesky(sigma, lower=True))


def explicit(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidCovariance("Covariance matrix must be square")
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=1e-12):
        raise InvalidCovariance("Covariance matrix must be symmetric")
    try:
        chol = cholesky(matrix, lower=True)
    except LinAlgError as err:
        raise InvalidCovariance("Covariance matrix is not positive definite") from err
    return CovarianceModel("explicit", matrix.shape[0], chol_lower=chol)


def make_covariance(tag, p, rho=0.5):
    tag = tag.lower()
    if tag == "identity":
        return identity(p)
    if tag == "ar1":
        return ar1(p, rho)
    raise InvalidCovariance(f"Unknown covariance model '{tag}'")
