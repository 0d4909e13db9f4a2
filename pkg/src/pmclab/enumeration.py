"""Exact posterior over all 2^p models, MAP selection and dominance summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .core import (
    DimensionError,
    DesignData,
    ModelPrior,
    NumericalError,
    SlabSpec,
    all_states,
    as_state,
    state_bits,
    state_to_index,
)

DEFAULT_P_LIMIT = 20


class CapacityError(ValueError):
    """Raised when a model space is too large to enumerate."""


class DegeneratePriorError(ValueError):
    """Raised when every model has zero prior mass."""


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """Normalized posterior over all models, indexed in binary counting order.

    Row ``i`` of ``states`` is the model whose bit string, read with the first
    coordinate most significant, equals ``i``.
    """

    states: np.ndarray
    log_scores: np.ndarray
    probabilities: np.ndarray

    @property
    def p(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def log_normalizer(self) -> float:
        return float(logsumexp(self.log_scores))

    def probability(self, gamma) -> float:
        return float(self.probabilities[self.index(gamma)])

    def log_score(self, gamma) -> float:
        return float(self.log_scores[self.index(gamma)])

    def index(self, gamma) -> int:
        g = as_state(gamma)
        if g.size != self.p:
            raise DimensionError(f"state has length {g.size}, table has p={self.p}")
        return state_to_index(g)

    def entries(self):
        """Yield ``(state, log_score, probability)`` triples."""
        for i in range(len(self)):
            yield self.states[i], float(self.log_scores[i]), float(self.probabilities[i])

    def inclusion_probabilities(self) -> np.ndarray:
        return self.probabilities @ self.states

    def to_csv(self, path) -> None:
        write_table_csv(self, path)


@dataclass(frozen=True)
class PmcSummary:
    true_model_prob: float
    max_incorrect_odds: float
    log_max_incorrect_odds: float
    map_model: np.ndarray


def score_many(states: np.ndarray, data: DesignData, slab: SlabSpec, prior: ModelPrior) -> np.ndarray:
    """Log scores for each row of a boolean ``(m, p)`` state matrix."""
    states = np.ascontiguousarray(states, dtype=bool)
    if states.ndim != 2 or states.shape[1] != data.p:
        raise DimensionError(f"states must have shape (m, {data.p})")
    if slab.p != data.p or prior.p != data.p:
        raise DimensionError("slab, prior and design disagree on p")
    scores, _, _, status = _kernels.score_states(
        states, data.xtx, data.xty, data.yty, slab.c, slab.log_c,
        float(data.n), float(slab.nu), prior.log_w, prior.log_1mw)
    if status == _kernels.NOT_PD:
        raise NumericalError("U_gamma not positive definite during batch scoring")
    if status == _kernels.NEGATIVE_S:
        raise NumericalError("S_gamma negative beyond roundoff during batch scoring")
    return scores


def normalize_log_scores(log_scores: np.ndarray) -> np.ndarray:
    top = np.max(log_scores)
    if top == -np.inf:
        raise DegeneratePriorError("every model has zero prior mass")
    w = np.exp(log_scores - top)
    return w / w.sum()


def table_from_scores(states: np.ndarray, log_scores: np.ndarray) -> PosteriorTable:
    probs = normalize_log_scores(log_scores)
    for arr in (states, log_scores, probs):
        arr.setflags(write=False)
    return PosteriorTable(states, log_scores, probs)


def enumerate_posterior(data: DesignData, slab: SlabSpec, prior: ModelPrior,
                        p_limit: int = DEFAULT_P_LIMIT) -> PosteriorTable:
    """Score every model and normalize with a max-shifted log-sum-exp."""
    if data.p > p_limit:
        raise CapacityError(f"p={data.p} exceeds enumeration limit {p_limit}")
    states = all_states(data.p)
    return table_from_scores(states, score_many(states, data, slab, prior))


def map_model(table: PosteriorTable) -> np.ndarray:
    """Highest-probability model; ties go to the smallest binary value."""
    if len(table) == 0:
        raise ValueError("empty table")
    # np.argmax returns the first maximum, i.e. the smallest index
    return table.states[int(np.argmax(table.log_scores))].copy()


def pmc_summary(table: PosteriorTable, gamma0) -> PmcSummary:
    """Probability of ``gamma0`` and the largest posterior odds against it."""
    i0 = table.index(gamma0)
    others = np.delete(table.log_scores, i0)
    if others.size == 0:
        log_max = -np.inf
    else:
        log_max = float(np.max(others) - table.log_scores[i0])
    with np.errstate(over="ignore"):
        max_odds = float(np.exp(log_max))
    return PmcSummary(
        true_model_prob=float(table.probabilities[i0]),
        max_incorrect_odds=max_odds,
        log_max_incorrect_odds=log_max,
        map_model=map_model(table),
    )


def write_table_csv(table: PosteriorTable, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma_bits", "log_score", "probability"])
        for state, score, prob in table.entries():
            w.writerow([state_bits(state), repr(score), repr(prob)])


def read_table_csv(path) -> PosteriorTable:
    from .core import parse_bits

    rows = list(csv.DictReader(Path(path).open(newline="")))
    states = np.array([parse_bits(r["gamma_bits"]) for r in rows])
    scores = np.array([float(r["log_score"]) for r in rows])
    order = np.argsort([state_to_index(s) for s in states], kind="stable")
    return table_from_scores(states[order], scores[order])
