"""Model scores under a prior ``g(c)`` on a shared slab scale.

The integrated score is ``log int exp(l(gamma; c)) g(c) dc`` where
``l(gamma; c)`` is the fixed-scale log score with every ``c_j = c * r_j`` for
template ratios ``r_j`` (all ones by default).  Integration is Gauss-Legendre
in ``log c`` over the support with log-sum-exp accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .core import DesignData, ModelPrior, SlabSpec, all_states, as_state
from .enumeration import (
    DEFAULT_P_LIMIT,
    CapacityError,
    PosteriorTable,
    score_many,
    table_from_scores,
)

DEFAULT_NODES = 64
DEFAULT_TAIL_MASS = 1e-4


class ZeroMassError(ValueError):
    """Raised when the prior on c has no mass on its support."""


@dataclass(frozen=True, eq=False)
class GPriorDensity:
    """Prior on the common slab scale.

    ``kind`` is ``point_mass`` (uses ``atom``), ``uniform`` or ``generic``
    (``density`` evaluated on ``[support_lo, support_hi]``).
    """

    kind: str
    support_lo: float | None = None
    support_hi: float | None = None
    density: Callable[[np.ndarray], np.ndarray] | None = None
    atom: float | None = None

    def __post_init__(self):
        if self.kind == "point_mass":
            if self.atom is None or not self.atom > 0:
                raise ValueError("point mass needs a positive atom")
            return
        if self.kind not in ("uniform", "generic"):
            raise ValueError(f"unknown g-prior kind {self.kind!r}")
        lo, hi = self.support_lo, self.support_hi
        if lo is None or hi is None or not 0 < lo < hi or not np.isfinite(hi):
            raise ValueError("need 0 < support_lo < support_hi < inf")
        if self.kind == "generic" and self.density is None:
            raise ValueError("generic g-prior needs a density")

    @classmethod
    def point_mass(cls, c0: float) -> "GPriorDensity":
        return cls("point_mass", atom=float(c0))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "GPriorDensity":
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def from_distribution(cls, dist, tail_mass: float = DEFAULT_TAIL_MASS) -> "GPriorDensity":
        """Truncate a frozen ``scipy.stats`` distribution at its tail quantiles.

        The density is renormalized to the retained mass so it integrates to
        one on the truncated support.
        """
        lo, hi = float(dist.ppf(tail_mass)), float(dist.ppf(1.0 - tail_mass))
        lo = max(lo, np.finfo(float).tiny)
        kept = float(dist.cdf(hi) - dist.cdf(lo))
        return cls("generic", lo, hi, density=lambda c: dist.pdf(c) / kept)

    def pdf(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if self.kind == "uniform":
            inside = (c >= self.support_lo) & (c <= self.support_hi)
            return np.where(inside, 1.0 / (self.support_hi - self.support_lo), 0.0)
        if self.kind == "generic":
            return np.asarray(self.density(c), dtype=float)
        raise TypeError("point mass has no density")

    def nodes(self, count: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes in c and log weights of ``g(c) dc``.

        Point masses return the atom with log weight 0.
        """
        if self.kind == "point_mass":
            return np.array([self.atom]), np.zeros(1)
        if count < 2:
            raise ValueError("need at least 2 quadrature nodes")
        x, w = np.polynomial.legendre.leggauss(count)
        a, b = np.log(self.support_lo), np.log(self.support_hi)
        half = 0.5 * (b - a)
        u = a + half * (x + 1.0)
        c = np.exp(u)
        with np.errstate(divide="ignore"):
            # dc = c du
            log_wt = np.log(w * half) + u + np.log(self.pdf(c))
        return c, log_wt

    def total_mass(self, count: int = DEFAULT_NODES) -> float:
        if self.kind == "point_mass":
            return 1.0
        _, log_wt = self.nodes(count)
        return float(np.exp(logsumexp(log_wt)))


def _node_scores(states: np.ndarray, data: DesignData, slab_template: SlabSpec, prior: ModelPrior,
                 g: GPriorDensity, nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c, log_wt = g.nodes(nodes)
    if not np.any(np.isfinite(log_wt)):
        raise ZeroMassError("g has zero mass on its support")
    scores = np.stack([score_many(states, data, slab_template.scaled(ck), prior) for ck in c], axis=1)
    return c, log_wt, scores


def gprior_log_score(gamma, data: DesignData, prior: ModelPrior, g: GPriorDensity,
                     nodes: int = DEFAULT_NODES, slab_template: SlabSpec | None = None) -> float:
    """Log of ``int exp(l(gamma; c)) g(c) dc``."""
    if slab_template is None:
        slab_template = SlabSpec(np.ones(data.p))
    states = as_state(gamma)[None, :]
    _, log_wt, scores = _node_scores(states, data, slab_template, prior, g, nodes)
    return float(logsumexp(scores[0] + log_wt))


def gprior_node_scores(gamma, data: DesignData, prior: ModelPrior, g: GPriorDensity,
                       nodes: int = DEFAULT_NODES, slab_template: SlabSpec | None = None):
    """Quadrature nodes and the fixed-scale scores ``l(gamma; c_k)`` at each."""
    if slab_template is None:
        slab_template = SlabSpec(np.ones(data.p))
    c, _, scores = _node_scores(as_state(gamma)[None, :], data, slab_template, prior, g, nodes)
    return c, scores[0]


def gprior_posterior(data: DesignData, slab_template: SlabSpec, prior: ModelPrior, g: GPriorDensity,
                     p_limit: int = DEFAULT_P_LIMIT, nodes: int = DEFAULT_NODES) -> PosteriorTable:
    """Exact posterior table with c integrated against ``g``."""
    if data.p > p_limit:
        raise CapacityError(f"p={data.p} exceeds enumeration limit {p_limit}")
    states = all_states(data.p)
    _, log_wt, scores = _node_scores(states, data, slab_template, prior, g, nodes)
    with np.errstate(invalid="ignore"):
        integrated = logsumexp(scores + log_wt[None, :], axis=1)
    return table_from_scores(states, np.asarray(integrated, dtype=float))
