"""Numerical checks of the identifiability, prior and rate conditions behind selection consistency.

Conditions phrased as limits are reported as finite-n inequalities with
margins; nothing here asserts an asymptotic statement.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .core import (
    DesignData,
    DimensionError,
    ModelPrior,
    SlabSpec,
    as_state,
    index_to_state,
    is_nested,
    log_det_w_and_s,
    residual_sum_of_squares,
    state_difference,
    state_to_index,
)

EXACT_P_LIMIT = 15
# relative slack for eigenvalue comparisons in the rate flags
EIG_TOL = 1e-9


@dataclass(frozen=True)
class RateConfig:
    """Constants for the orthogonal-design rate condition.

    ``a_n`` is derived as ``n + k_n / (sigma0^2 (1/n + phi_n))``.
    """

    zeta: float = 2.0
    sigma0: float = 1.0
    phi_n: float = 1.0

    def __post_init__(self):
        if not self.zeta > 1:
            raise ValueError("zeta must exceed 1")
        if not self.sigma0 > 0 or not self.phi_n > 0:
            raise ValueError("sigma0 and phi_n must be positive")

    def a_n(self, n: int, k_n: float) -> float:
        return n + k_n / (self.sigma0**2 * (1.0 / n + self.phi_n))


@dataclass
class AssumptionReport:
    prior_odds_bound: float
    phi_min: float
    phi_max: float
    phi_estimated: bool
    psi_n: float
    k_n: float
    s_n: int
    schur_min: float
    schur_estimated: bool
    rate_flags: dict[str, bool | None]
    margins: dict[str, float]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x
        return json.dumps(clean(self.to_dict()), **kw)


# ---------------------------------------------------------------------------
# eigenvalue functionals
# ---------------------------------------------------------------------------

def _gram(X: np.ndarray) -> np.ndarray:
    return X.T @ X / X.shape[0]


def _residual_gram(G: np.ndarray, target: np.ndarray, given: np.ndarray) -> np.ndarray:
    """``G_tt - G_tg G_gg^+ G_gt``: the Gram of target columns after projecting out ``given``."""
    Gtt = G[np.ix_(target, target)]
    if given.size == 0:
        return Gtt
    Ggg = G[np.ix_(given, given)]
    Ggt = G[np.ix_(given, target)]
    try:
        cf = linalg.cho_factor(Ggg, lower=True, check_finite=False)
        sol = linalg.cho_solve(cf, Ggt, check_finite=False)
    except linalg.LinAlgError:
        sol = np.linalg.pinv(Ggg) @ Ggt
    M = Gtt - Ggt.T @ sol
    return 0.5 * (M + M.T)


def _eig_extremes(M: np.ndarray) -> tuple[float, float]:
    ev = linalg.eigvalsh(M, check_finite=False)
    return float(ev[0]), float(ev[-1])


def schur_min_eig(X, gamma, gamma_bar) -> float:
    """Smallest eigenvalue of ``(1/n) X_D' (I - P_gamma) X_D`` with ``D = gamma_bar minus gamma``."""
    X = np.asarray(X, dtype=float)
    g, gb = as_state(gamma), as_state(gamma_bar)
    if g.size != X.shape[1] or gb.size != X.shape[1]:
        raise DimensionError("state length does not match X")
    if not is_nested(g, gb) or np.array_equal(g, gb):
        raise ValueError("need gamma strictly nested in gamma_bar")
    target = np.flatnonzero(state_difference(gb, g))
    return _eig_extremes(_residual_gram(_gram(X), target, np.flatnonzero(g)))[0]


def _s2_functionals(G: np.ndarray, gamma0: np.ndarray, gamma: np.ndarray) -> tuple[float, float]:
    target = np.flatnonzero(gamma0 & ~gamma)
    lo = _eig_extremes(_residual_gram(G, target, np.flatnonzero(gamma)))[0]
    hi = _eig_extremes(G[np.ix_(target, target)])[1]
    return lo, hi


def _s2_indices(gamma0: np.ndarray) -> np.ndarray:
    """Binary indices of models that do not contain ``gamma0``."""
    p = gamma0.size
    mask = state_to_index(gamma0)
    idx = np.arange(1 << p, dtype=np.int64)
    return idx[(idx & mask) != mask]


def _sample_s2(gamma0: np.ndarray, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Uniform subset of S2 without replacement (all of S2 if ``count`` covers it)."""
    p = gamma0.size
    if p <= 20:
        pool = _s2_indices(gamma0)
        if count < pool.size:
            pool = np.sort(rng.choice(pool, size=count, replace=False))
        return [index_to_state(int(i), p) for i in pool]
    seen: dict[bytes, np.ndarray] = {}
    while len(seen) < count:
        g = rng.random(p) < 0.5
        if not is_nested(gamma0, g):
            seen.setdefault(g.tobytes(), g)
    return list(seen.values())


def phi_min_max(data_or_X, gamma0, mode: str = "exact", sample_count: int = 10_000,
                seed: int = 0) -> tuple[float, float]:
    """Extremal eigenvalue functionals over models that miss part of ``gamma0``.

    ``phi_min`` is the smallest eigenvalue of the projected Gram of the missed
    true columns; ``phi_max`` the largest eigenvalue of their raw Gram.  In
    ``sampled`` mode a uniform subset of size ``sample_count`` is scanned and
    the result is an estimate (an upper bound on ``phi_min`` and a lower bound
    on ``phi_max``).
    """
    X = data_or_X.X if isinstance(data_or_X, DesignData) else np.asarray(data_or_X, dtype=float)
    g0 = as_state(gamma0)
    if g0.size != X.shape[1]:
        raise DimensionError("gamma0 length does not match X")
    if not g0.any():
        raise ValueError("phi_min and phi_max are undefined for a null true model")
    G = _gram(X)
    if mode == "exact":
        if g0.size > EXACT_P_LIMIT:
            raise ValueError(f"exact mode needs p <= {EXACT_P_LIMIT}")
        models = [index_to_state(int(i), g0.size) for i in _s2_indices(g0)]
    elif mode == "sampled":
        models = _sample_s2(g0, sample_count, np.random.default_rng(seed))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    lo, hi = np.inf, -np.inf
    for g in models:
        a, b = _s2_functionals(G, g0, g)
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


def schur_min_s1(X, gamma0, mode: str = "exact", sample_count: int = 10_000, seed: int = 0) -> float:
    """Infimum over strict supermodels of ``gamma0`` of the projected Gram's smallest eigenvalue."""
    X = np.asarray(X, dtype=float)
    g0 = as_state(gamma0)
    p = g0.size
    free = np.flatnonzero(~g0)
    if free.size == 0:
        return np.nan
    G = _gram(X)
    given = np.flatnonzero(g0)
    if mode == "exact":
        if p > EXACT_P_LIMIT:
            raise ValueError(f"exact mode needs p <= {EXACT_P_LIMIT}")
        subsets = [index_to_state(i, free.size) for i in range(1, 1 << free.size)]
    else:
        rng = np.random.default_rng(seed)
        total = (1 << free.size) - 1 if free.size < 63 else np.inf
        picks = set()
        while len(picks) < min(sample_count, total):
            bits = rng.random(free.size) < 0.5
            if bits.any():
                picks.add(bits.tobytes())
        subsets = [np.frombuffer(b, dtype=bool) for b in sorted(picks)]
    best = np.inf
    for sub in subsets:
        best = min(best, _eig_extremes(_residual_gram(G, free[sub], given))[0])
    return best


# ---------------------------------------------------------------------------
# log-odds decomposition
# ---------------------------------------------------------------------------

def odds_decomposition(gamma, gamma0, data: DesignData, slab: SlabSpec,
                       prior: ModelPrior) -> tuple[float, float, float, float, float]:
    """Split ``-log(p(gamma|Z)/p(gamma0|Z))`` into five terms.

    T1 prior odds, T2 determinant ratio, T3 shrinkage excess of ``gamma`` over
    its least-squares fit, T4 minus that excess for ``gamma0``, T5 the
    least-squares residual ratio.
    """
    g, g0 = as_state(gamma), as_state(gamma0)
    if np.array_equal(g, g0):
        return 0.0, 0.0, 0.0, 0.0, 0.0
    half_df = 0.5 * (data.n + slab.nu)
    ld, s = log_det_w_and_s(g, data, slab)
    ld0, s0 = log_det_w_and_s(g0, data, slab)
    rss = residual_sum_of_squares(g, data)
    rss0 = residual_sum_of_squares(g0, data)
    t1 = -(prior.log_prob(g) - prior.log_prob(g0))
    t2 = 0.5 * (ld - ld0)
    t3 = half_df * (np.log1p(s) - np.log1p(rss))
    t4 = -half_df * (np.log1p(s0) - np.log1p(rss0))
    t5 = half_df * (np.log1p(rss) - np.log1p(rss0))
    return float(t1), float(t2), float(t3), float(t4), float(t5)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def max_prior_odds(prior: ModelPrior, gamma0) -> float:
    """``max over gamma of p(gamma)/p(gamma0)``; closed form for independent inclusions."""
    g0 = as_state(gamma0)
    if prior.kind == "flat":
        return 1.0
    best = np.maximum(prior.log_w, prior.log_1mw)
    own = np.where(g0, prior.log_w, prior.log_1mw)
    if np.any(own == -np.inf):
        return np.inf
    return float(np.exp(np.sum(best - own)))


def _flag(lhs: float, rhs: float, margins: dict, name: str, *, rel_tol: float = 0.0) -> bool | None:
    """Record ``rhs - lhs`` and report whether ``lhs <= rhs`` (within tolerance)."""
    if not (np.isfinite(lhs) or np.isfinite(rhs)) or np.isnan(lhs) or np.isnan(rhs):
        margins[name] = float("nan")
        return None
    margins[name] = float(rhs - lhs)
    return bool(lhs <= rhs + rel_tol * max(1.0, abs(lhs), abs(rhs)))


def check_assumptions(data: DesignData, truth, slab: SlabSpec, prior: ModelPrior,
                      rate: RateConfig | None = None, *, phi_upper: float | None = None,
                      phi_lower: float | None = None, C0: float = 1.0, C1: float = 1.0,
                      C2: float = 1.0, C3: float = 1.0, delta: float = 0.0,
                      alpha0: float = 2.1, k_tol: float = 1.0, sample_count: int = 10_000,
                      seed: int = 0) -> AssumptionReport:
    """Evaluate the prior, eigenvalue and rate conditions at the observed ``n``.

    ``truth`` needs ``beta0`` and ``gamma0`` attributes.  Bounds on the slab
    scales default to the extremes of ``slab.c``.  Each flag in ``rate_flags``
    has a matching entry in ``margins`` (positive means satisfied with room);
    ``None`` marks a condition that does not apply.
    """
    n, p = data.n, data.p
    beta0 = np.asarray(truth.beta0, dtype=float)
    g0 = as_state(truth.gamma0)
    if g0.size != p or beta0.size != p:
        raise DimensionError("truth does not match the design")
    s_n = int(g0.sum())
    notes: list[str] = []
    flags: dict[str, bool | None] = {}
    margins: dict[str, float] = {}
    phi_hi = float(np.max(slab.c)) if phi_upper is None else float(phi_upper)
    phi_lo = float(np.min(slab.c)) if phi_lower is None else float(phi_lower)
    mode = "exact" if p <= EXACT_P_LIMIT else "sampled"

    k_n = float(np.sum(beta0[g0] ** 2))
    prior_bound = max_prior_odds(prior, g0)
    flags["A1"] = _flag(prior_bound, C0, margins, "A1", rel_tol=1e-12)

    if s_n == 0:
        psi_n = phi_min = phi_max = float("nan")
        notes.append("true model is null: S2 is empty, phi_min/phi_max and psi_n not applicable")
        for name in ("A2_min", "A2_max", "A3", "A4"):
            flags[name] = None
            margins[name] = float("nan")
    else:
        psi_n = float(np.min(np.abs(beta0[g0])))
        phi_min, phi_max = phi_min_max(data, g0, mode=mode, sample_count=sample_count, seed=seed)
        flags["A2_min"] = _flag(C1, phi_min, margins, "A2_min", rel_tol=EIG_TOL)
        flags["A2_max"] = _flag(phi_max, C2, margins, "A2_max", rel_tol=EIG_TOL)
        # psi_n sqrt(n) -> inf; finite-n proxy: it exceeds 1
        flags["A3"] = _flag(1.0, psi_n * math.sqrt(n), margins, "A3")
        flags["A4"] = _flag(p * math.log(n), n * math.log1p(min(psi_n**2, 1.0)), margins, "A4")
    if mode == "sampled":
        notes.append(f"p={p} > {EXACT_P_LIMIT}: eigenvalue scans sampled with {sample_count} models")

    flags["A5"] = _flag(p * math.log(p), n, margins, "A5")
    flags["A6"] = _flag(float(np.max(slab.c)), phi_hi, margins, "A6", rel_tol=1e-12)
    flags["A6_min"] = _flag(phi_lo, float(np.min(slab.c)), margins, "A6_min", rel_tol=1e-12)
    flags["A7"] = _flag(k_n, k_tol * phi_lo, margins, "A7")

    schur = schur_min_s1(data.X, g0, mode=mode, sample_count=sample_count, seed=seed)
    if np.isnan(schur):
        notes.append("true model is full: S1 is empty")
        flags["A8"] = None
        margins["A8"] = float("nan")
    else:
        flags["A8"] = _flag(C3 * n ** (-delta), schur, margins, "A8", rel_tol=EIG_TOL)
    rho = n ** (1.0 - delta) * phi_lo
    flags["A8_rate"] = _flag(1.0, rho, margins, "A8_rate")
    flags["odds_rate"] = _flag(p**alpha0, rho, margins, "odds_rate")
    flags["pmc_rate"] = _flag(p ** (alpha0 + 2.0), rho, margins, "pmc_rate")

    if rate is not None:
        a_n = rate.a_n(n, k_n)
        margins["a_n"] = a_n
        if s_n == 0:
            flags["A9_signal"] = flags["A9_i"] = None
            margins["A9_signal"] = margins["A9_i"] = float("nan")
        else:
            signal = n * psi_n**2
            gap = rate.sigma0**2 * rate.zeta * a_n
            flags["A9_signal"] = _flag(gap, signal, margins, "A9_signal")
            if signal > gap:
                bound = min((n + slab.nu) * math.log(signal / gap) / math.log1p(n * rate.phi_n),
                            signal, float(n))
                flags["A9_i"] = _flag(float(s_n), bound, margins, "A9_i")
            else:
                flags["A9_i"] = False
                margins["A9_i"] = float("nan")
        flags["A9_ii"] = _flag(p * math.log(p), a_n, margins, "A9_ii")

    return AssumptionReport(
        prior_odds_bound=prior_bound, phi_min=phi_min, phi_max=phi_max,
        phi_estimated=mode == "sampled" and s_n > 0, psi_n=psi_n, k_n=k_n, s_n=s_n,
        schur_min=schur, schur_estimated=mode == "sampled", rate_flags=flags,
        margins=margins, notes=notes)


def lemma_t2_bound(gamma, gamma0, n: int, phi_lower: float, C3: float = 1.0, delta: float = 0.0) -> float:
    """Lower bound on T2 for a strict supermodel ``gamma`` of ``gamma0``."""
    extra = int(as_state(gamma).sum() - as_state(gamma0).sum())
    return 0.5 * extra * math.log1p(C3 * n ** (1.0 - delta) * phi_lower)
