"""Orthonormal designs, truth specifications and simulated responses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..core import DesignData, DimensionError


@dataclass(frozen=True, eq=False)
class TruthSpec:
    beta0: np.ndarray
    sigma0: float = 1.0

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta0, dtype=float))
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta0 must be a finite vector")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be nonnegative")
        beta.setflags(write=False)
        object.__setattr__(self, "beta0", beta)

    @classmethod
    def leading(cls, p: int, values=(2.0, 2.0), sigma0: float = 1.0) -> "TruthSpec":
        """Nonzero ``values`` on the first coordinates, zeros elsewhere."""
        values = np.asarray(values, dtype=float)
        if values.size > p:
            raise DimensionError(f"{values.size} true coefficients do not fit in p={p}")
        beta = np.zeros(p)
        beta[: values.size] = values
        return cls(beta, sigma0)

    @property
    def gamma0(self) -> np.ndarray:
        return self.beta0 != 0

    @property
    def p(self) -> int:
        return self.beta0.size

    @property
    def s_n(self) -> int:
        return int(np.count_nonzero(self.beta0))


def gen_orthonormal_design(n: int, p: int, seed) -> np.ndarray:
    """``X = sqrt(n) U (U'U)^{-1/2}`` with iid standard normal rows of ``U``; ``X'X = n I``."""
    if p > n:
        raise DimensionError(f"orthonormal design needs p <= n, got p={p}, n={n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    U = rng.standard_normal((n, p))
    evals, evecs = linalg.eigh(U.T @ U)
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    X = np.sqrt(n) * U @ inv_sqrt
    # one polish step against roundoff in the inverse square root
    evals, evecs = linalg.eigh(X.T @ X / n)
    return X @ ((evecs / np.sqrt(evals)) @ evecs.T)


def gen_dataset(X, truth: TruthSpec, seed) -> DesignData:
    """``y = X beta0 + eps`` with iid ``N(0, sigma0^2)`` errors."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != truth.p:
        raise DimensionError(f"X has {X.shape[1]} columns, truth has p={truth.p}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eps = rng.standard_normal(X.shape[0]) * truth.sigma0
    return DesignData(X @ truth.beta0 + eps, X)
