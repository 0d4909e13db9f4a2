"""Replicated simulation experiments: the growth-rate table, phi regimes and consistency sweeps.

Every random quantity comes from a substream keyed by labels under the
master seed, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..core import DesignData, ModelPrior, SlabSpec, state_to_index
from ..enumeration import enumerate_posterior, pmc_summary, score_many
from ..gprior import GPriorDensity, gprior_posterior
from ..sampler import GibbsConfig, chains_psrf, pooled_samples, run_chains
from .data import TruthSpec, gen_dataset, gen_orthonormal_design
from .streams import derive_seed, rng_for

ENGINES = ("enumerate_if_possible", "gibbs_always")
# log phi above this overflows exp() in double precision
MAX_LOG_PHI = 700.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PriorCase:
    """Inclusion weights: ``true_weight`` on the true coordinates, ``null_weight`` elsewhere."""

    label: str
    true_weight: float
    null_weight: float

    def prior(self, gamma0: np.ndarray) -> ModelPrior:
        return ModelPrior.bernoulli(np.where(gamma0, self.true_weight, self.null_weight))


CASE_I = PriorCase("CaseI", 0.5, 0.5)
CASE_II = PriorCase("CaseII", 0.3, 0.7)


def parse_case(spec) -> PriorCase:
    if isinstance(spec, PriorCase):
        return spec
    if isinstance(spec, dict):
        return PriorCase(str(spec.get("label", "custom")), float(spec["true_weight"]),
                         float(spec["null_weight"]))
    key = str(spec).replace(" ", "").lower()
    if key in ("i", "casei", "1"):
        return CASE_I
    if key in ("ii", "caseii", "2"):
        return CASE_II
    raise ConfigError(f"unknown prior case {spec!r}")


def setting_label(setting) -> str:
    if isinstance(setting, GPriorDensity):
        if setting.kind == "point_mass":
            return f"g=point[{setting.atom:g}]"
        return f"g={setting.kind}[{setting.support_lo:g},{setting.support_hi:g}]"
    return f"phi={float(setting):g}"


def parse_setting(spec):
    if isinstance(spec, (GPriorDensity, int, float)):
        return spec
    if isinstance(spec, dict):
        if "phi" in spec:
            return float(spec["phi"])
        g = spec.get("g")
        if isinstance(g, dict):
            kind = g.get("kind", "uniform")
            if kind == "uniform":
                return GPriorDensity.uniform(g["lo"], g["hi"])
            if kind == "point_mass":
                return GPriorDensity.point_mass(g["atom"])
    raise ConfigError(f"cannot parse setting {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid, replication and engine choices for a replicated experiment.

    ``p = round(n ** r)`` clamped to at least ``len(beta_true) + 1`` for each
    growth exponent ``r``.  An empty ``beta_true`` runs the null-truth variant.
    """

    n_grid: tuple[int, ...] = (100,)
    growth_exponents: tuple[float, ...] = (0.25,)
    replicates: int = 20
    settings: tuple = (10.0, 100.0, 1000.0)
    prior_cases: tuple = (CASE_I, CASE_II)
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    engine: str = "enumerate_if_possible"
    seed: int = 20240101
    p_limit: int = 20
    beta_true: tuple[float, ...] = (2.0, 2.0)
    sigma0: float = 1.0
    nu: int = 4
    fixed_design: bool = False
    psrf_threshold: float = 1.1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "growth_exponents", tuple(float(r) for r in self.growth_exponents))
        object.__setattr__(self, "settings", tuple(parse_setting(s) for s in self.settings))
        object.__setattr__(self, "prior_cases", tuple(parse_case(c) for c in self.prior_cases))
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        self.validate()

    def validate(self) -> None:
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be nonempty and strictly increasing")
        if not self.growth_exponents or not self.settings or not self.prior_cases:
            raise ConfigError("need at least one growth exponent, setting and prior case")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for n in self.n_grid:
            for r in self.growth_exponents:
                p = self.dimension(n, r)
                if p > n:
                    raise ConfigError(f"p={p} exceeds n={n}")
                if self.needs_gibbs(p) and any(isinstance(s, GPriorDensity) for s in self.settings):
                    raise ConfigError(f"g-prior settings need enumeration but p={p} > p_limit")

    @property
    def s_n(self) -> int:
        return sum(1 for b in self.beta_true if b != 0)

    def dimension(self, n: int, r: float) -> int:
        return max(int(round(n**r)), len(self.beta_true) + 1)

    def needs_gibbs(self, p: int) -> bool:
        return self.engine == "gibbs_always" or p > self.p_limit


@dataclass(frozen=True)
class ResultRecord:
    n: int
    p: int
    growth_exponent: float
    setting_label: str
    case_label: str
    replicate_id: int
    seed: int
    true_model_prob: float
    map_hit: bool
    max_incorrect_odds: float
    null_odds: float
    psrf: float | None
    engine_used: str
    excluded: bool
    wall_time: float = field(default=0.0, compare=False)

    @property
    def cell(self) -> tuple:
        return (self.n, self.growth_exponent, self.p, self.case_label, self.setting_label)


# ---------------------------------------------------------------------------
# per-dataset evaluation
# ---------------------------------------------------------------------------

def _exp(x: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(x))


def directed_models(gamma0: np.ndarray) -> np.ndarray:
    """The null model plus every model at Hamming distance one from ``gamma0``."""
    p = gamma0.size
    flips = np.tile(gamma0, (p, 1))
    flips[np.arange(p), np.arange(p)] ^= True
    return np.vstack([np.zeros((1, p), dtype=bool), flips])


def _unique_rows(states: np.ndarray, return_counts: bool = False):
    """Distinct boolean rows, via packed bytes (much faster than ``np.unique(axis=0)``)."""
    states = np.ascontiguousarray(states, dtype=bool)
    packed = np.packbits(states, axis=1)
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, first, counts = np.unique(keys, return_index=True, return_counts=True)
    rows = states[first]
    return (rows, counts) if return_counts else rows


def _odds_from_candidates(candidates: np.ndarray, gamma0: np.ndarray, data, slab, prior):
    """Largest log odds against gamma0 over candidates, and the null model's log odds."""
    keep = ~np.all(candidates == gamma0, axis=1)
    cand = _unique_rows(candidates[keep])
    scores = score_many(np.vstack([gamma0[None, :], np.zeros((1, gamma0.size), bool), cand]),
                        data, slab, prior)
    base = scores[0]
    log_null = scores[1] - base
    log_max = float(np.max(scores[2:]) - base) if cand.shape[0] else -np.inf
    return log_max, float(log_null)


def _most_frequent(samples: np.ndarray) -> np.ndarray:
    uniq, counts = _unique_rows(samples, return_counts=True)
    best = counts == counts.max()
    # ties go to the smallest binary value
    candidates = uniq[best]
    keys = [state_to_index(s) for s in candidates]
    return candidates[int(np.argmin(keys))]


def evaluate_dataset(data: DesignData, gamma0: np.ndarray, slab: SlabSpec | None, prior: ModelPrior,
                     *, use_gibbs: bool, gibbs: GibbsConfig, g: GPriorDensity | None = None,
                     p_limit: int = 20, extra_candidates: np.ndarray | None = None) -> dict:
    """Posterior summaries of ``gamma0`` by exact enumeration or pooled Gibbs chains."""
    if not use_gibbs:
        if g is not None:
            table = gprior_posterior(data, SlabSpec(np.ones(data.p), slab.nu if slab else 4),
                                     prior, g, p_limit=p_limit)
        else:
            table = enumerate_posterior(data, slab, prior, p_limit=p_limit)
        summ = pmc_summary(table, gamma0)
        null_log = table.log_score(np.zeros(data.p, bool)) - table.log_score(gamma0)
        return dict(true_model_prob=summ.true_model_prob,
                    map_hit=bool(np.array_equal(summ.map_model, gamma0)),
                    log_max_odds=summ.log_max_incorrect_odds, log_null_odds=float(null_log),
                    psrf=None, engine="enumerate")
    if g is not None:
        raise ConfigError("g-prior settings are only supported with enumeration")
    chains = run_chains(data, slab, prior, gibbs)
    samples = pooled_samples(chains)
    prob = float(np.mean(np.all(samples == gamma0, axis=1)))
    visited = _unique_rows(samples)
    pieces = [visited, directed_models(gamma0)]
    if extra_candidates is not None:
        pieces.append(extra_candidates)
    log_max, log_null = _odds_from_candidates(np.vstack(pieces), gamma0, data, slab, prior)
    return dict(true_model_prob=prob,
                map_hit=bool(np.array_equal(_most_frequent(samples), gamma0)),
                log_max_odds=log_max, log_null_odds=log_null,
                psrf=chains_psrf(chains), engine="gibbs")


# ---------------------------------------------------------------------------
# replicated grid (Table 1 protocol and consistency sweeps)
# ---------------------------------------------------------------------------

def _replicate_job(args) -> list[ResultRecord]:
    cfg, n, r, rep = args
    p = cfg.dimension(n, r)
    rep_seed = derive_seed(cfg.seed, "replicate", n, r, rep)
    truth = TruthSpec.leading(p, cfg.beta_true, cfg.sigma0)
    design_rng = rng_for(cfg.seed, "design", n, r) if cfg.fixed_design else rng_for(rep_seed, "design")
    X = gen_orthonormal_design(n, p, design_rng)
    data = gen_dataset(X, truth, rng_for(rep_seed, "noise"))
    gamma0 = truth.gamma0
    use_gibbs = cfg.needs_gibbs(p)
    out = []
    for case in cfg.prior_cases:
        prior = case.prior(gamma0)
        for setting in cfg.settings:
            label = setting_label(setting)
            t0 = time.perf_counter()
            gcfg = replace(cfg.gibbs, seed=derive_seed(rep_seed, "gibbs", case.label, label))
            if isinstance(setting, GPriorDensity):
                res = evaluate_dataset(data, gamma0, SlabSpec(np.ones(p), cfg.nu), prior,
                                       use_gibbs=use_gibbs, gibbs=gcfg, g=setting, p_limit=cfg.p_limit)
            else:
                res = evaluate_dataset(data, gamma0, SlabSpec.constant(p, setting, cfg.nu), prior,
                                       use_gibbs=use_gibbs, gibbs=gcfg, p_limit=cfg.p_limit)
            psrf = res["psrf"]
            excluded = psrf is not None and not psrf < cfg.psrf_threshold
            out.append(ResultRecord(
                n=n, p=p, growth_exponent=r, setting_label=label, case_label=case.label,
                replicate_id=rep, seed=rep_seed, true_model_prob=res["true_model_prob"],
                map_hit=res["map_hit"], max_incorrect_odds=_exp(res["log_max_odds"]),
                null_odds=_exp(res["log_null_odds"]), psrf=psrf, engine_used=res["engine"],
                excluded=excluded, wall_time=time.perf_counter() - t0))
    return out


def _run_jobs(fn, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [rec for job in jobs for rec in fn(job)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [rec for chunk in pool.map(fn, jobs) for rec in chunk]


def _sort_key(rec: ResultRecord, cfg: ExperimentConfig):
    cases = [c.label for c in cfg.prior_cases]
    labels = [setting_label(s) for s in cfg.settings]
    return (rec.n, rec.growth_exponent, cases.index(rec.case_label),
            labels.index(rec.setting_label), rec.replicate_id)


def run_grid(cfg: ExperimentConfig) -> list[ResultRecord]:
    """One record per (n, growth exponent, case, setting, replicate), in that order."""
    jobs = [(cfg, n, r, rep) for n in cfg.n_grid for r in cfg.growth_exponents
            for rep in range(cfg.replicates)]
    records = _run_jobs(_replicate_job, jobs, cfg.workers)
    return sorted(records, key=lambda rec: _sort_key(rec, cfg))


@dataclass(frozen=True)
class CellSummary:
    n: int
    p: int
    growth_exponent: float
    case_label: str
    setting_label: str
    mean: float
    std: float
    count: int
    excluded: int

    @property
    def key(self) -> str:
        return (f"n={self.n}|r={self.growth_exponent:g}|p={self.p}|"
                f"{self.case_label}|{self.setting_label}")


def summarize(records: Sequence[ResultRecord]) -> list[CellSummary]:
    """Mean and sample standard deviation of true_model_prob per cell, over PSRF-passing records."""
    cells: dict[tuple, list[ResultRecord]] = {}
    for rec in records:
        cells.setdefault(rec.cell, []).append(rec)
    out = []
    for (n, r, p, case, label), recs in cells.items():
        vals = np.array([x.true_model_prob for x in recs if not x.excluded])
        n_excl = sum(x.excluded for x in recs)
        mean = float(vals.mean()) if vals.size else float("nan")
        std = float(vals.std(ddof=1)) if vals.size > 1 else (0.0 if vals.size else float("nan"))
        out.append(CellSummary(n, p, r, case, label, mean, std, int(vals.size), int(n_excl)))
    return out


def run_table1(cfg: ExperimentConfig) -> tuple[list[ResultRecord], list[CellSummary]]:
    """Replicated growth-rate experiment; returns all records and per-cell summaries."""
    records = run_grid(cfg)
    return records, summarize(records)


def table1_config(**overrides) -> ExperimentConfig:
    """Desk-scale defaults: three sample sizes, three growth rates, three slab scales, both cases."""
    base = dict(n_grid=(100, 200, 400), growth_exponents=(0.25, 0.5, 0.75), replicates=20,
                settings=(10.0, 100.0, 1000.0), prior_cases=(CASE_I, CASE_II))
    base.update(overrides)
    return ExperimentConfig(**base)


def run_consistency_sweep(cfg: ExperimentConfig) -> tuple[list[ResultRecord], dict]:
    """Mean posterior probability of the true model per n for a fixed scenario family.

    Returns the records and ``{(case, setting, r): [(n, mean, mean max odds), ...]}``.
    """
    if cfg.replicates < 1:
        raise ConfigError("replicates must be at least 1")
    records = run_grid(cfg)
    trends: dict[tuple, list] = {}
    for cell in summarize(records):
        odds = [x.max_incorrect_odds for x in records
                if x.cell == (cell.n, cell.growth_exponent, cell.p, cell.case_label, cell.setting_label)
                and not x.excluded]
        trends.setdefault((cell.case_label, cell.setting_label, cell.growth_exponent), []).append(
            (cell.n, cell.mean, float(np.mean(odds)) if odds else float("nan")))
    for v in trends.values():
        v.sort()
    return records, trends


# ---------------------------------------------------------------------------
# phi regimes on a square orthogonal design
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeParams:
    """Constants for the p = n orthogonal-design regimes.

    Signal ``psi_n^2 = c1 n^(1+delta1) (log n)^2`` on ``s`` coordinates with
    alternating signs.  Regime a uses ``phi = c2 n^delta2``; b a huge phi
    (``log phi = min(n (log n)^2, 700)`` unless ``log_phi_b`` is given); c uses
    ``phi = eta / n`` for each eta (``eta = 0`` is realized as ``phi = 1/n^2``).
    """

    delta1: float = 1.5
    delta2: float = 1.5
    c1: float = 1.0
    c2: float = 1.0
    etas: tuple[float, ...] = (0.0, 1.0)
    s: int = 2
    log_phi_b: float | None = None
    regimes: tuple[str, ...] = ("a", "b", "c")

    def __post_init__(self):
        object.__setattr__(self, "etas", tuple(float(e) for e in self.etas))
        object.__setattr__(self, "regimes", tuple(str(r) for r in self.regimes))
        if not self.delta1 > 1:
            raise ConfigError("delta1 must exceed 1")
        if not self.c1 > 0 or not self.c2 > 0:
            raise ConfigError("c1 and c2 must be positive")
        if not self.delta2 > -1:
            raise ConfigError("delta2 must exceed -1")
        if any(e < 0 for e in self.etas):
            raise ConfigError("eta must be nonnegative")
        if self.s < 1:
            raise ConfigError("s must be a positive integer")
        if set(self.regimes) - {"a", "b", "c"}:
            raise ConfigError("regimes must be drawn from a, b, c")

    def psi(self, n: int) -> float:
        return math.sqrt(self.c1 * n ** (1 + self.delta1) * math.log(n) ** 2)

    def phis(self, n: int) -> list[tuple[str, float]]:
        out = []
        if "a" in self.regimes:
            out.append((f"a:phi=c2*n^{self.delta2:g}", self.c2 * n**self.delta2))
        if "b" in self.regimes:
            log_phi = self.log_phi_b if self.log_phi_b is not None else min(n * math.log(n) ** 2, MAX_LOG_PHI)
            out.append((f"b:log_phi={log_phi:g}", math.exp(log_phi)))
        if "c" in self.regimes:
            for eta in self.etas:
                out.append((f"c:eta={eta:g}", eta / n if eta > 0 else 1.0 / n**2))
        return out


def _regime_job(args) -> list[ResultRecord]:
    n, params, rep, seed, gibbs, psrf_threshold, nu = args
    if params.s > n:
        raise ConfigError(f"s={params.s} exceeds n={n}")
    rep_seed = derive_seed(seed, "regime", n, rep)
    X = gen_orthonormal_design(n, n, rng_for(rep_seed, "design"))
    beta = np.zeros(n)
    beta[: params.s] = params.psi(n) * np.where(np.arange(params.s) % 2 == 0, 1.0, -1.0)
    truth = TruthSpec(beta, 1.0)
    data = gen_dataset(X, truth, rng_for(rep_seed, "noise"))
    gamma0 = truth.gamma0
    prior = ModelPrior.flat(n)
    out = []
    for label, phi in params.phis(n):
        t0 = time.perf_counter()
        gcfg = replace(gibbs, seed=derive_seed(rep_seed, "gibbs", label))
        res = evaluate_dataset(data, gamma0, SlabSpec.constant(n, phi, nu), prior,
                               use_gibbs=True, gibbs=gcfg)
        psrf = res["psrf"]
        out.append(ResultRecord(
            n=n, p=n, growth_exponent=1.0, setting_label=label, case_label="flat",
            replicate_id=rep, seed=rep_seed, true_model_prob=res["true_model_prob"],
            map_hit=res["map_hit"], max_incorrect_odds=_exp(res["log_max_odds"]),
            null_odds=_exp(res["log_null_odds"]), psrf=psrf, engine_used="gibbs+directed",
            excluded=not psrf < psrf_threshold, wall_time=time.perf_counter() - t0))
    return out


def run_regimes(n_grid, params: RegimeParams, replicates: int, seed: int,
                gibbs: GibbsConfig | None = None, *, psrf_threshold: float = 1.1,
                nu: int = 4, workers: int = 1) -> list[ResultRecord]:
    """Posterior behaviour under too-small, moderate and too-large slab scales.

    ``max_incorrect_odds`` is exact over the null model, the Hamming-1
    neighbours of the truth and every model the chains visited, so it is a
    lower bound on the maximum over all models.
    """
    if isinstance(n_grid, int):
        n_grid = (n_grid,)
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    gibbs = gibbs or GibbsConfig()
    jobs = [(int(n), params, rep, seed, gibbs, psrf_threshold, nu)
            for n in n_grid for rep in range(replicates)]
    records = _run_jobs(_regime_job, jobs, workers)
    labels = {}
    for n in n_grid:
        for i, (lab, _) in enumerate(params.phis(int(n))):
            labels[(int(n), lab)] = i
    return sorted(records, key=lambda r: (r.n, labels[(r.n, r.setting_label)], r.replicate_id))
