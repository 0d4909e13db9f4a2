"""State vectors and the collapsed model posterior of the spike-and-slab linear model.

The hierarchical model is

    y | beta, sigma^2   ~ N(X beta, sigma^2 I_n)
    beta_j | gamma_j    ~ (1 - gamma_j) delta_0 + gamma_j N(0, c_j sigma^2)
    1 / sigma^2         ~ chi^2_nu
    gamma               ~ p(gamma)

Integrating out ``beta`` and ``sigma`` leaves an unnormalized log posterior over
models ``gamma``

    l(gamma) = -(n/2) log(2 pi) - 1/2 log det W + log p(gamma)
               + (n + nu)/2 * (log 2 - log(1 + S))

with ``U = Sigma^-1 + X'X``, ``W = Sigma^1/2 U Sigma^1/2`` and
``S = y'y - y'X U^-1 X'y`` restricted to the columns in ``gamma``.  The null
model uses ``S = y'y`` and ``log det W = 0``.

Everything here is kept in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))

# S is clamped to zero inside [-S_CLAMP_REL * y'y, 0); anything lower is a bug.
S_CLAMP_REL = 1e-8


class DimensionError(ValueError):
    """Raised when state vectors, designs or hyperparameters disagree in size."""


class NumericalError(ArithmeticError):
    """Raised when a factorization fails or a provably nonnegative quantity is negative."""


class UndefinedOddsError(ValueError):
    """Raised when both models in an odds ratio have zero prior mass."""


# ---------------------------------------------------------------------------
# State vectors
# ---------------------------------------------------------------------------

def as_state(bits: Sequence[int] | np.ndarray) -> np.ndarray:
    """Return ``bits`` as a 1-d boolean inclusion vector."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise DimensionError(f"state vector must be 1-d, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("state vector entries must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def null_state(p: int) -> np.ndarray:
    return np.zeros(p, dtype=bool)


def state_size(gamma) -> int:
    """Number of included coordinates, ``|gamma|``."""
    return int(np.count_nonzero(as_state(gamma)))


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"state vectors differ in length: {a.size} vs {b.size}")


def state_difference(gamma, gamma_prime) -> np.ndarray:
    """Coordinates present in ``gamma`` but absent from ``gamma_prime``."""
    a, b = as_state(gamma), as_state(gamma_prime)
    _check_same_length(a, b)
    return a & ~b


def is_nested(gamma, gamma_prime) -> bool:
    """True when every coordinate of ``gamma`` is also in ``gamma_prime``."""
    return not state_difference(gamma, gamma_prime).any()


def state_union(gamma, gamma_prime) -> np.ndarray:
    a, b = as_state(gamma), as_state(gamma_prime)
    _check_same_length(a, b)
    return a | b


def state_to_index(gamma) -> int:
    """Binary value of ``gamma`` read with the first coordinate most significant."""
    value = 0
    for bit in as_state(gamma):
        value = (value << 1) | int(bit)
    return value


def index_to_state(index: int, p: int) -> np.ndarray:
    if not 0 <= index < (1 << p):
        raise ValueError(f"index {index} out of range for p={p}")
    shifts = np.arange(p - 1, -1, -1)
    return ((index >> shifts) & 1).astype(bool)


def all_states(p: int) -> np.ndarray:
    """All ``2**p`` state vectors in binary counting order, shape ``(2**p, p)``."""
    idx = np.arange(1 << p, dtype=np.int64)[:, None]
    shifts = np.arange(p - 1, -1, -1, dtype=np.int64)[None, :]
    return ((idx >> shifts) & 1).astype(bool)


def state_bits(gamma) -> str:
    """Render ``gamma`` as a string of 0/1 characters."""
    return "".join("1" if b else "0" for b in as_state(gamma))


def parse_bits(text: str) -> np.ndarray:
    text = text.strip()
    if not text or any(ch not in "01" for ch in text):
        raise ValueError(f"not a bit string: {text!r}")
    return np.array([ch == "1" for ch in text], dtype=bool)


# ---------------------------------------------------------------------------
# Data and hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignData:
    """Response ``y`` (length n) and design ``X`` (n x p).

    Sufficient statistics ``X'X``, ``X'y`` and ``y'y`` are cached on first use;
    every score in the package is computed from them.
    """

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DimensionError("y must be 1-d and X 2-d")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError("need n >= 1 and p >= 1")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("y and X must be finite")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def xtx(self) -> np.ndarray:
        return self.X.T @ self.X

    @cached_property
    def xty(self) -> np.ndarray:
        return self.X.T @ self.y

    @cached_property
    def yty(self) -> float:
        return float(self.y @ self.y)


@dataclass(frozen=True, eq=False)
class SlabSpec:
    """Slab variance scales ``c`` (prior var of a nonzero beta_j is c_j sigma^2) and chi^2 dof ``nu``."""

    c: np.ndarray
    nu: int = 4

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if c.ndim != 1:
            raise DimensionError("c must be a vector")
        if not np.all(c > 0) or not np.all(np.isfinite(c)):
            raise ValueError("slab scales must be positive and finite")
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError("nu must be a positive integer")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "nu", int(self.nu))

    @classmethod
    def constant(cls, p: int, phi: float, nu: int = 4) -> "SlabSpec":
        return cls(np.full(p, float(phi)), nu)

    @property
    def p(self) -> int:
        return self.c.size

    @cached_property
    def log_c(self) -> np.ndarray:
        return np.log(self.c)

    def scaled(self, factor: float) -> "SlabSpec":
        return SlabSpec(self.c * factor, self.nu)

    def permuted(self, perm) -> "SlabSpec":
        return SlabSpec(self.c[np.asarray(perm)], self.nu)


@dataclass(frozen=True, eq=False)
class ModelPrior:
    """Prior over models: ``flat`` (2^-p each) or independent ``bernoulli`` inclusions.

    Weights of exactly 0 or 1 exclude or force a coordinate; contradicting
    states get a log prior of ``-inf``.
    """

    kind: str
    weights: np.ndarray | None = None
    p: int | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "bernoulli"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "bernoulli":
            if self.weights is None:
                raise ValueError("bernoulli prior needs weights")
            w = np.atleast_1d(np.asarray(self.weights, dtype=float))
            if w.ndim != 1 or np.any((w < 0) | (w > 1)) or not np.all(np.isfinite(w)):
                raise ValueError("weights must lie in [0, 1]")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "p", w.size)
        elif self.p is None or self.p < 1:
            raise ValueError("flat prior needs p >= 1")

    @classmethod
    def flat(cls, p: int) -> "ModelPrior":
        return cls("flat", p=p)

    @classmethod
    def bernoulli(cls, weights) -> "ModelPrior":
        return cls("bernoulli", weights=weights)

    @cached_property
    def log_w(self) -> np.ndarray:
        """Per-coordinate log prior of inclusion."""
        if self.kind == "flat":
            return np.full(self.p, -LOG_2)
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    @cached_property
    def log_1mw(self) -> np.ndarray:
        """Per-coordinate log prior of exclusion."""
        if self.kind == "flat":
            return np.full(self.p, -LOG_2)
        with np.errstate(divide="ignore"):
            return np.log1p(-self.weights)

    @cached_property
    def log_inclusion_odds(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.log_w - self.log_1mw

    def log_prob(self, gamma) -> float:
        g = as_state(gamma)
        if g.size != self.p:
            raise DimensionError(f"state has length {g.size}, prior has p={self.p}")
        if self.kind == "flat":
            return -self.p * LOG_2
        # avoid 0 * -inf for forced coordinates
        return float(np.sum(np.where(g, self.log_w, self.log_1mw)))

    def permuted(self, perm) -> "ModelPrior":
        if self.kind == "flat":
            return self
        return ModelPrior.bernoulli(self.weights[np.asarray(perm)])


@dataclass(frozen=True)
class PosteriorKernelResult:
    log_score: float
    s_gamma: float
    log_det_w: float
    log_prior: float = 0.0

    @property
    def log_marginal(self) -> float:
        """Log score without the model prior term (up to a model-free constant)."""
        return self.log_score - self.log_prior


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def _check_dims(data: DesignData, slab: SlabSpec, prior: ModelPrior | None, gamma: np.ndarray) -> None:
    if slab.p != data.p:
        raise DimensionError(f"slab has {slab.p} scales, design has p={data.p}")
    if prior is not None and prior.p != data.p:
        raise DimensionError(f"prior has p={prior.p}, design has p={data.p}")
    if gamma.size != data.p:
        raise DimensionError(f"state has length {gamma.size}, design has p={data.p}")


def clamp_s(s: float, yty: float) -> float:
    if s >= 0.0:
        return s
    if s >= -S_CLAMP_REL * max(yty, 1.0):
        return 0.0
    raise NumericalError(f"S_gamma = {s:.6g} is negative beyond roundoff (y'y = {yty:.6g})")


def log_det_w_and_s(gamma, data: DesignData, slab: SlabSpec) -> tuple[float, float]:
    """``(log det W_gamma, S_gamma)`` via a Cholesky factorization of ``U_gamma``."""
    g = as_state(gamma)
    idx = np.flatnonzero(g)
    if idx.size == 0:
        return 0.0, data.yty
    U = data.xtx[np.ix_(idx, idx)].copy()
    U[np.diag_indices_from(U)] += 1.0 / slab.c[idx]
    try:
        L = linalg.cholesky(U, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"U_gamma not positive definite for gamma={state_bits(g)}") from exc
    log_det_u = 2.0 * float(np.sum(np.log(np.diag(L))))
    z = linalg.solve_triangular(L, data.xty[idx], lower=True, check_finite=False)
    s = clamp_s(data.yty - float(z @ z), data.yty)
    return float(np.sum(slab.log_c[idx])) + log_det_u, s


def score_from_parts(n: int, nu: int, log_det_w: float, s_gamma: float, log_prior: float) -> float:
    return (-0.5 * n * LOG_2PI - 0.5 * log_det_w + log_prior
            + 0.5 * (n + nu) * (LOG_2 - np.log1p(s_gamma)))


def posterior_kernel(gamma, data: DesignData, slab: SlabSpec, prior: ModelPrior) -> PosteriorKernelResult:
    """Unnormalized log posterior ``l(gamma)`` and its ingredients.

    A state with zero prior mass gets ``log_score = -inf``; ``s_gamma`` and
    ``log_det_w`` are still reported.
    """
    g = as_state(gamma)
    _check_dims(data, slab, prior, g)
    log_det_w, s = log_det_w_and_s(g, data, slab)
    log_prior = prior.log_prob(g)
    if log_prior == -np.inf:
        return PosteriorKernelResult(-np.inf, s, log_det_w, log_prior)
    return PosteriorKernelResult(score_from_parts(data.n, slab.nu, log_det_w, s, log_prior),
                                 s, log_det_w, log_prior)


def log_score(gamma, data: DesignData, slab: SlabSpec, prior: ModelPrior) -> float:
    return posterior_kernel(gamma, data, slab, prior).log_score


def log_marginal_likelihood(gamma, data: DesignData, slab: SlabSpec) -> float:
    """``log p(Z | gamma)`` up to an additive constant shared by all models."""
    g = as_state(gamma)
    _check_dims(data, slab, None, g)
    log_det_w, s = log_det_w_and_s(g, data, slab)
    return score_from_parts(data.n, slab.nu, log_det_w, s, 0.0)


def log_posterior_odds(gamma, gamma_ref, data: DesignData, slab: SlabSpec, prior: ModelPrior) -> float:
    """``log p(gamma | Z) - log p(gamma_ref | Z)``."""
    a = log_score(gamma, data, slab, prior)
    b = log_score(gamma_ref, data, slab, prior)
    if a == -np.inf and b == -np.inf:
        raise UndefinedOddsError("both models have zero prior mass")
    if np.array_equal(as_state(gamma), as_state(gamma_ref)):
        return 0.0
    return a - b


def log_bayes_factor(gamma, gamma_ref, data: DesignData, slab: SlabSpec) -> float:
    """Log Bayes factor ``log p(Z | gamma) - log p(Z | gamma_ref)``."""
    if np.array_equal(as_state(gamma), as_state(gamma_ref)):
        _check_dims(data, slab, None, as_state(gamma))
        return 0.0
    return log_marginal_likelihood(gamma, data, slab) - log_marginal_likelihood(gamma_ref, data, slab)


def log_prior_odds(gamma, gamma_ref, prior: ModelPrior) -> float:
    a, b = prior.log_prob(gamma), prior.log_prob(gamma_ref)
    if a == -np.inf and b == -np.inf:
        raise UndefinedOddsError("both models have zero prior mass")
    return a - b


def residual_sum_of_squares(gamma, data: DesignData) -> float:
    """``y'(I - P_gamma) y`` with ``P_empty = 0``; rank-deficient designs use the pseudo-inverse."""
    g = as_state(gamma)
    if g.size != data.p:
        raise DimensionError(f"state has length {g.size}, design has p={data.p}")
    if not g.any():
        return data.yty
    Xg = data.X[:, g]
    coef, *_ = np.linalg.lstsq(Xg, data.y, rcond=None)
    r = data.y - Xg @ coef
    return float(r @ r)
