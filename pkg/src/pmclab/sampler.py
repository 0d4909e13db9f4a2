"""Collapsed Gibbs sampling over models, with conditional draws of sigma and beta.

Each sweep visits coordinates ``j = 1..p`` in order and resamples ``gamma_j``
from its exact full conditional (``beta`` and ``sigma`` integrated out).  After
the sweep ``tau = 1/sigma^2`` and ``beta_gamma`` are drawn from their
conditionals given the current model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import _kernels
from .core import (
    DesignData,
    DimensionError,
    ModelPrior,
    NumericalError,
    SlabSpec,
    as_state,
    log_score,
    state_bits,
)


@dataclass(frozen=True)
class GibbsConfig:
    sweeps: int = 2000
    burnin: int = 1000
    chains: int = 5
    seed: int = 0
    thin: int = 1

    def __post_init__(self):
        if self.sweeps < 1 or self.chains < 1 or self.thin < 1:
            raise ValueError("sweeps, chains and thin must be positive")
        if not 0 <= self.burnin < self.sweeps:
            raise ValueError("need 0 <= burnin < sweeps")
        if (self.sweeps - self.burnin) % self.thin:
            raise ValueError("sweeps - burnin must be a multiple of thin")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def kept(self) -> int:
        return (self.sweeps - self.burnin) // self.thin


@dataclass(frozen=True, eq=False)
class ChainOutput:
    """Post-burn-in, thinned draws of one chain.

    ``beta_samples`` is dense ``(kept, p)`` with exact zeros off each model's
    support.
    """

    gamma_samples: np.ndarray
    beta_samples: np.ndarray
    sigma_samples: np.ndarray
    log_scores: np.ndarray
    sweep_index: np.ndarray
    chain_id: int = 0

    def __len__(self) -> int:
        return self.gamma_samples.shape[0]

    def to_csv(self, path) -> None:
        write_chain_csv(self, path)


def conditional_inclusion_prob(j: int, gamma, data: DesignData, slab: SlabSpec, prior: ModelPrior) -> float:
    """``P(gamma_j = 1 | gamma_-j, Z)`` with ``j`` zero-based.

    Raises ValueError when both completions of ``gamma_-j`` have zero prior mass.
    """
    g = as_state(gamma).copy()
    if not 0 <= j < g.size:
        raise IndexError(f"coordinate {j} out of range for p={g.size}")
    g[j] = True
    on = log_score(g, data, slab, prior)
    g[j] = False
    off = log_score(g, data, slab, prior)
    if on == -np.inf and off == -np.inf:
        raise ValueError("gamma_-j has zero prior mass")
    if on == -np.inf:
        return 0.0
    if off == -np.inf:
        return 1.0
    return float(expit(on - off))


def chain_rng(seed: int, chain_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_id,)))


def default_init(prior: ModelPrior) -> np.ndarray:
    """Start from the forced coordinates only (empty model for interior weights)."""
    if prior.kind == "flat":
        return np.zeros(prior.p, dtype=bool)
    return prior.weights == 1.0


def run_chain(data: DesignData, slab: SlabSpec, prior: ModelPrior, cfg: GibbsConfig,
              chain_id: int = 0, init=None) -> ChainOutput:
    """Run one chain; deterministic given ``(cfg.seed, chain_id)``."""
    p = data.p
    if slab.p != p or prior.p != p:
        raise DimensionError("slab, prior and design disagree on p")
    start = default_init(prior) if init is None else as_state(init)
    if start.size != p:
        raise DimensionError("initial state has wrong length")
    if prior.log_prob(start) == -np.inf:
        raise ValueError("initial state has zero prior mass")

    rng = chain_rng(cfg.seed, chain_id)
    uniforms = rng.random((cfg.sweeps, p))
    gamma_draws = rng.standard_gamma(0.5 * (data.n + slab.nu), size=cfg.sweeps)
    normals = rng.standard_normal((cfg.sweeps, p))

    gam, beta, sig, sc, status = _kernels.gibbs_chain(
        data.xtx, data.xty, data.yty, slab.c, slab.log_c, float(data.n), float(slab.nu),
        prior.log_w, prior.log_1mw, prior.log_inclusion_odds, np.ascontiguousarray(start),
        uniforms, gamma_draws, normals, cfg.burnin, cfg.thin)
    if status != _kernels.OK:
        reason = "U_gamma not positive definite" if status == _kernels.NOT_PD else "negative S_gamma"
        raise NumericalError(f"chain {chain_id} aborted: {reason}")
    sweeps = np.arange(cfg.burnin, cfg.sweeps, cfg.thin)
    return ChainOutput(gam, beta, sig, sc, sweeps, chain_id)


def run_chains(data: DesignData, slab: SlabSpec, prior: ModelPrior, cfg: GibbsConfig,
               init=None) -> list[ChainOutput]:
    return [run_chain(data, slab, prior, cfg, chain_id=i, init=init) for i in range(cfg.chains)]


def estimate_model_prob(samples, gamma) -> float:
    """Fraction of sampled states exactly equal to ``gamma``."""
    arr = np.asarray(samples, dtype=bool)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need a nonempty (m, p) sample array")
    g = as_state(gamma)
    if g.size != arr.shape[1]:
        raise DimensionError("state length does not match samples")
    return float(np.mean(np.all(arr == g, axis=1)))


def pooled_samples(chains: Sequence[ChainOutput]) -> np.ndarray:
    return np.concatenate([ch.gamma_samples for ch in chains], axis=0)


def model_frequencies(samples) -> dict[int, float]:
    """Empirical distribution over visited models keyed by binary index."""
    arr = np.asarray(samples, dtype=bool)
    p = arr.shape[1]
    weights = 1 << np.arange(p - 1, -1, -1, dtype=np.int64)
    keys = arr.astype(np.int64) @ weights
    uniq, counts = np.unique(keys, return_counts=True)
    return {int(k): c / arr.shape[0] for k, c in zip(uniq, counts)}


def gelman_rubin(chains) -> float:
    """Potential scale reduction factor of equal-length scalar chains.

    Uses the between-chain variance ``B`` and the mean within-chain variance
    ``W`` (both unbiased); returns 1.0 when both vanish and ``inf`` when only
    ``W`` does.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least 2 chains")
    m, length = x.shape
    if length < 2:
        raise ValueError("chains need at least 2 draws")
    means = x.mean(axis=1)
    W = float(np.mean(x.var(axis=1, ddof=1)))
    B = float(length * means.var(ddof=1))
    # constant chains leave roundoff-sized variances
    scale = max(1.0, float(np.max(np.abs(x))))
    if W <= 1e-24 * scale**2:
        return 1.0 if B <= 1e-24 * scale**2 * length else np.inf
    V = (length - 1) / length * W + B / length
    return float(np.sqrt(V / W))


def chains_psrf(chains: Sequence[ChainOutput]) -> float:
    return gelman_rubin([ch.log_scores for ch in chains])


def write_chain_csv(chain: ChainOutput, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "gamma_bits", "sigma", "log_score"])
        for t, g, s, sc in zip(chain.sweep_index, chain.gamma_samples,
                               chain.sigma_samples, chain.log_scores):
            w.writerow([int(t), state_bits(g), repr(float(s)), repr(float(sc))])
