import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class McPanel:
    """
    Common random numbers for one state-evolution solve: Q1, Q2 ~ N(0, 1),
    the response noise U and Y_bar = h(gamma Q1, U). The panel stays fixed
    across iterations and is redrawn only when the seed or gamma^2 changes.
    """

    q1: np.ndarray = field(repr=False)
    q2: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    y_bar: np.ndarray = field(repr=False)
    gamma2: float
    seed: int = None

    @classmethod
    def draw(cls, model, gamma2, m, seed):
        rng = np.random.default_rng(seed)
        q1 = rng.standard_normal(m)
        q2 = rng.standard_normal(m)
        y_bar, u = model.law.sample(model.link.g(np.sqrt(gamma2) * q1), rng)
        for arr in (q1, q2, u, y_bar):
            arr.setflags(write=False)
        return cls(q1, q2, u, y_bar, float(gamma2), seed)

    @property
    def m(self):
        return self.q1.shape[0]

    @property
    def z(self):
        return np.sqrt(self.gamma2) * self.q1

    @property
    def checksum(self):
        digest = hashlib.sha256()
        for arr in (self.q1, self.q2, self.u, self.y_bar):
            digest.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return digest.hexdigest()
