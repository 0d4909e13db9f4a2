import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import orthonormal_instance, random_instance
from pmclab.assumptions import (
    RateConfig,
    check_assumptions,
    lemma_t2_bound,
    max_prior_odds,
    odds_decomposition,
    phi_min_max,
    schur_min_eig,
    schur_min_s1,
)
from pmclab.core import DesignData, ModelPrior, SlabSpec, all_states, log_posterior_odds
from pmclab.simlab.data import TruthSpec, gen_dataset, gen_orthonormal_design


def _brute_phi(X, g0):
    n = X.shape[0]
    lo, hi = np.inf, -np.inf
    for g in all_states(X.shape[1]):
        if np.all(g[g0]):
            continue
        D = X[:, g0 & ~g]
        Xg = X[:, g]
        P = Xg @ np.linalg.pinv(Xg) if g.any() else np.zeros((n, n))
        lo = min(lo, np.linalg.eigvalsh(D.T @ (np.eye(n) - P) @ D / n)[0])
        hi = max(hi, np.linalg.eigvalsh(D.T @ D / n)[-1])
    return lo, hi


class TestPhi:
    def test_orthonormal_is_one(self):
        X = gen_orthonormal_design(40, 6, 0)
        lo, hi = phi_min_max(X, [1, 1, 0, 0, 0, 0])
        assert lo == pytest.approx(1.0, abs=1e-10) and hi == pytest.approx(1.0, abs=1e-10)

    def test_scaling(self):
        X = np.random.default_rng(1).standard_normal((30, 5))
        g0 = [1, 0, 1, 0, 0]
        a = np.array(phi_min_max(X, g0))
        b = np.array(phi_min_max(np.sqrt(2) * X, g0))
        np.testing.assert_allclose(b, 2 * a, rtol=1e-10)

    def test_matches_projection_oracle(self):
        X = np.random.default_rng(2).standard_normal((25, 6))
        g0 = np.array([1, 1, 0, 1, 0, 0], bool)
        np.testing.assert_allclose(phi_min_max(X, g0), _brute_phi(X, g0), rtol=1e-9)

    def test_closed_forms(self):
        # extremes are attained at gamma = empty (phi_max) and at the complement of gamma0 (phi_min)
        X = np.random.default_rng(3).standard_normal((30, 6))
        g0 = np.array([1, 0, 1, 0, 0, 0], bool)
        G = X.T @ X / 30
        lo, hi = phi_min_max(X, g0)
        assert hi == pytest.approx(np.linalg.eigvalsh(G[np.ix_(g0, g0)])[-1], rel=1e-10)
        Ginv = np.linalg.inv(G)
        assert lo == pytest.approx(1 / np.linalg.eigvalsh(Ginv[np.ix_(g0, g0)])[-1], rel=1e-9)

    def test_sampled_full_count_equals_exact(self):
        X = np.random.default_rng(4).standard_normal((30, 6))
        g0 = [0, 1, 1, 0, 0, 0]
        exact = phi_min_max(X, g0)
        sampled = phi_min_max(X, g0, mode="sampled", sample_count=2**6)
        np.testing.assert_allclose(sampled, exact, rtol=1e-12)

    def test_errors(self):
        X = np.ones((10, 3))
        with pytest.raises(ValueError):
            phi_min_max(X, [0, 0, 0])
        with pytest.raises(ValueError):
            phi_min_max(np.ones((20, 16)), [1] + [0] * 15)


class TestSchur:
    def test_empty_gamma_convention(self):
        X = np.random.default_rng(5).standard_normal((20, 4))
        gb = np.array([1, 1, 0, 1], bool)
        expect = np.linalg.eigvalsh(X[:, gb].T @ X[:, gb] / 20)[0]
        assert schur_min_eig(X, [0, 0, 0, 0], gb) == pytest.approx(expect, rel=1e-10)

    def test_orthonormal_is_one(self):
        X = gen_orthonormal_design(30, 5, 1)
        assert schur_min_eig(X, [1, 0, 0, 0, 0], [1, 1, 0, 1, 0]) == pytest.approx(1.0, abs=1e-10)

    def test_nesting_required(self):
        X = np.ones((5, 3))
        with pytest.raises(ValueError):
            schur_min_eig(X, [1, 0, 0], [0, 1, 0])
        with pytest.raises(ValueError):
            schur_min_eig(X, [1, 0, 0], [1, 0, 0])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_eigenvalue_lower_bound(self, seed):
        rng = np.random.default_rng(seed)
        n, p = int(rng.integers(8, 30)), int(rng.integers(2, 7))
        X = rng.standard_normal((n, p))
        c = np.linalg.eigvalsh(X.T @ X / n)[0]
        gb = rng.random(p) < 0.7
        gb[rng.integers(p)] = True
        g = gb & (rng.random(p) < 0.5)
        g[np.flatnonzero(gb)[0]] = False
        assert schur_min_eig(X, g, gb) >= c - 1e-8

    def test_s1_infimum_at_full_model(self):
        X = np.random.default_rng(6).standard_normal((30, 5))
        g0 = np.array([1, 0, 0, 1, 0], bool)
        assert schur_min_s1(X, g0) == pytest.approx(schur_min_eig(X, g0, np.ones(5, bool)), rel=1e-10)
        assert np.isnan(schur_min_s1(X, np.ones(5, bool)))


class TestDecomposition:
    def test_identity_case(self):
        data, slab, prior = random_instance(0)
        g = np.array([1, 1, 0, 0, 0], bool)
        assert odds_decomposition(g, g, data, slab, prior) == (0.0,) * 5

    def test_sum_and_t3_sign(self):
        for seed in range(10):
            data, slab, prior = random_instance(seed)
            g0 = np.array([1, 1, 0, 0, 0], bool)
            for g in all_states(5):
                t = odds_decomposition(g, g0, data, slab, prior)
                lo = log_posterior_odds(g, g0, data, slab, prior)
                assert sum(t) == pytest.approx(-lo, abs=1e-9)
                assert t[2] >= -1e-12

    def test_lemma_bound_orthonormal(self):
        data, truth = orthonormal_instance(7, n=50, p=6)
        phi = 3.0
        slab, prior = SlabSpec.constant(6, phi), ModelPrior.flat(6)
        g0 = truth.gamma0
        for g in all_states(6):
            if np.array_equal(g, g0) or not np.all(g[g0]):
                continue
            t1, t2, *_ = odds_decomposition(g, g0, data, slab, prior)
            bound = lemma_t2_bound(g, g0, data.n, phi)
            assert t1 == 0.0
            assert t2 >= bound - 1e-9
            assert t2 == pytest.approx(bound, rel=1e-10)


class TestReport:
    def test_prior_odds(self):
        prior = ModelPrior.bernoulli([0.3, 0.3, 0.7])
        g0 = [1, 1, 0]
        brute = max(np.exp(prior.log_prob(g) - prior.log_prob(g0)) for g in all_states(3))
        assert max_prior_odds(prior, g0) == pytest.approx(brute, rel=1e-12)
        assert max_prior_odds(ModelPrior.flat(3), g0) == 1.0

    def test_example_configuration_at_n400(self):
        n = 400
        p = round(n**0.2)
        psi = n**-0.25 * np.sqrt(np.log(n))
        truth = TruthSpec.leading(p, (psi, -psi), 1.0)
        X = gen_orthonormal_design(n, p, 11)
        data = gen_dataset(X, truth, 12)
        rep = check_assumptions(data, truth, SlabSpec.constant(p, 10.0), ModelPrior.flat(p))
        assert rep.k_n >= rep.s_n * rep.psi_n**2 - 1e-12
        assert rep.phi_min <= rep.phi_max + 1e-12
        checked = {k: v for k, v in rep.rate_flags.items() if v is not None}
        assert checked and all(checked.values()), rep.rate_flags

    def test_orthonormal_margins(self):
        data, truth = orthonormal_instance(8, n=80, p=5)
        rep = check_assumptions(data, truth, SlabSpec.constant(5, 10.0), ModelPrior.flat(5))
        assert rep.margins["A2_min"] == pytest.approx(rep.phi_min - 1.0)
        assert rep.margins["A2_max"] == pytest.approx(1.0 - rep.phi_max)
        assert rep.margins["A8"] == pytest.approx(rep.schur_min - 1.0)
        assert abs(rep.margins["A8"]) < 1e-10

    def test_null_truth(self):
        data, truth = orthonormal_instance(9, n=40, p=4, values=())
        rep = check_assumptions(data, truth, SlabSpec.constant(4, 10.0), ModelPrior.flat(4),
                                RateConfig())
        assert np.isnan(rep.psi_n)
        assert rep.rate_flags["A2_min"] is None and rep.rate_flags["A9_signal"] is None
        assert any("S2 is empty" in note for note in rep.notes)
        json.loads(rep.to_json())

    def test_sampled_mode_flagged(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((60, 18))
        truth = TruthSpec.leading(18, (1.0, 1.0))
        data = DesignData(X @ truth.beta0 + rng.standard_normal(60), X)
        rep = check_assumptions(data, truth, SlabSpec.constant(18, 5.0), ModelPrior.flat(18),
                                sample_count=300)
        assert rep.phi_estimated and rep.schur_estimated

    def test_rate_config(self):
        with pytest.raises(ValueError):
            RateConfig(zeta=1.0)
        r = RateConfig(zeta=2.0, sigma0=1.0, phi_n=1.0)
        assert r.a_n(100, 8.0) >= 100
