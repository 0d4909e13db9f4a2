import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import orthonormal_instance, random_instance
from oracles import exact_log_marginal, quadrature_log_marginal
from pmclab.core import (
    DesignData,
    DimensionError,
    ModelPrior,
    NumericalError,
    SlabSpec,
    UndefinedOddsError,
    all_states,
    as_state,
    clamp_s,
    index_to_state,
    is_nested,
    log_bayes_factor,
    log_det_w_and_s,
    log_marginal_likelihood,
    log_posterior_odds,
    log_prior_odds,
    log_score,
    parse_bits,
    posterior_kernel,
    residual_sum_of_squares,
    state_bits,
    state_difference,
    state_size,
    state_to_index,
    state_union,
)
from pmclab.enumeration import enumerate_posterior, score_many


class TestStates:
    def test_difference_examples(self):
        assert state_difference([1, 0, 1], [1, 1, 0]).tolist() == [False, False, True]
        g = as_state([1, 0, 1, 1])
        assert not state_difference(g, g).any()
        assert not state_difference([0, 0], [1, 1]).any()

    def test_nesting_examples(self):
        assert is_nested([1, 0, 0], [1, 1, 0])
        assert not is_nested([1, 1, 0], [1, 0, 0])
        assert is_nested([0, 1, 1], [0, 1, 1])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            state_difference([1, 0], [1, 0, 0])
        with pytest.raises(DimensionError):
            is_nested([1], [1, 0])

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            as_state([0, 2, 1])

    def test_index_order(self):
        states = all_states(3)
        assert [state_bits(s) for s in states] == [format(i, "03b") for i in range(8)]
        assert state_to_index([1, 0, 0]) == 4

    @given(st.integers(1, 12).flatmap(lambda p: st.tuples(st.just(p), st.integers(0, 2**p - 1))))
    def test_index_roundtrip(self, pi):
        p, i = pi
        g = index_to_state(i, p)
        assert state_to_index(g) == i
        assert np.array_equal(parse_bits(state_bits(g)), g)

    @given(st.lists(st.booleans(), min_size=1, max_size=10), st.data())
    def test_set_algebra(self, a, data):
        b = data.draw(st.lists(st.booleans(), min_size=len(a), max_size=len(a)))
        u = state_union(a, b)
        assert is_nested(a, u) and is_nested(b, u)
        assert is_nested(a, b) == (not state_difference(a, b).any())
        assert state_size(u) <= state_size(a) + state_size(b)


class TestTypes:
    def test_design_validation(self):
        with pytest.raises(DimensionError):
            DesignData(np.zeros(3), np.zeros((4, 2)))
        with pytest.raises(ValueError):
            DesignData(np.array([1.0, np.nan]), np.ones((2, 1)))

    def test_slab_validation(self):
        with pytest.raises(ValueError):
            SlabSpec([1.0, 0.0])
        with pytest.raises(ValueError):
            SlabSpec([1.0], nu=0)

    def test_flat_prior(self):
        prior = ModelPrior.flat(4)
        assert prior.log_prob([1, 0, 1, 0]) == pytest.approx(-4 * np.log(2))

    def test_bernoulli_prior(self):
        w = np.array([0.3, 0.7, 0.5])
        prior = ModelPrior.bernoulli(w)
        g = np.array([1, 0, 1], bool)
        assert prior.log_prob(g) == pytest.approx(np.log(0.3) + np.log(0.3) + np.log(0.5))

    def test_forced_coordinates(self):
        prior = ModelPrior.bernoulli([1.0, 0.0, 0.5])
        assert prior.log_prob([1, 0, 1]) == pytest.approx(np.log(0.5))
        assert prior.log_prob([0, 0, 1]) == -np.inf
        assert prior.log_prob([1, 1, 0]) == -np.inf

    def test_weights_in_unit_interval(self):
        with pytest.raises(ValueError):
            ModelPrior.bernoulli([0.5, 1.2])


class TestKernel:
    def test_null_model_convention(self, small_data):
        data, slab, prior = small_data
        g = np.zeros(data.p, bool)
        res = posterior_kernel(g, data, slab, prior)
        n, nu = data.n, slab.nu
        expect = (-0.5 * n * np.log(2 * np.pi) + prior.log_prob(g)
                  + 0.5 * (n + nu) * (np.log(2) - np.log1p(data.yty)))
        assert res.s_gamma == data.yty and res.log_det_w == 0.0
        assert res.log_score == pytest.approx(expect, rel=1e-14)

    def test_zero_prior_mass_flagged(self, small_data):
        data, slab, _ = small_data
        prior = ModelPrior.bernoulli(np.r_[0.0, np.full(data.p - 1, 0.5)])
        res = posterior_kernel(np.r_[True, np.zeros(data.p - 1, bool)], data, slab, prior)
        assert res.log_score == -np.inf and np.isfinite(res.s_gamma)

    def test_dimension_checks(self, small_data):
        data, slab, prior = small_data
        with pytest.raises(DimensionError):
            posterior_kernel(np.zeros(data.p + 1, bool), data, slab, prior)
        with pytest.raises(DimensionError):
            posterior_kernel(np.zeros(data.p, bool), data, SlabSpec(np.ones(data.p + 1)), prior)

    def test_quadrature_ratio_fixed_instance(self):
        # n=4, p=2 fixed dataset
        X = np.array([[1.0, 0.2], [-0.5, 1.1], [0.3, -0.7], [1.2, 0.4]])
        y = np.array([1.4, -0.2, 0.9, 2.1])
        data = DesignData(y, X)
        c = np.array([3.0, 5.0])
        slab = SlabSpec(c)
        for g1, g2 in [([1, 0], [0, 1]), ([1, 1], [0, 0]), ([1, 1], [1, 0])]:
            kernel = np.exp(log_marginal_likelihood(g1, data, slab) - log_marginal_likelihood(g2, data, slab))
            oracle = np.exp(quadrature_log_marginal(g1, data, c) - quadrature_log_marginal(g2, data, c))
            assert kernel == pytest.approx(oracle, rel=0.01)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_kernel_matches_exact_marginal_up_to_constant(self, seed):
        data, slab, _ = random_instance(seed, n=8, p=4)
        diffs = [log_marginal_likelihood(g, data, slab) - exact_log_marginal(g, data, slab.c, slab.nu)
                 for g in all_states(4)]
        assert np.ptp(diffs) < 1e-9

    def test_orthonormal_closed_form(self):
        data, _ = orthonormal_instance(3, n=50, p=8)
        phi = 7.0
        slab = SlabSpec.constant(data.p, phi)
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = rng.random(data.p) < 0.5
            _, s = log_det_w_and_s(g, data, slab)
            expect = data.yty - np.sum(data.xty[g] ** 2) / (1 / phi + data.n)
            assert s == pytest.approx(expect, rel=1e-10)

    def test_s_bounds_and_logdet_nonnegative(self):
        data, slab, _ = random_instance(5, n=12, p=6)
        for g in all_states(6):
            log_det_w, s = log_det_w_and_s(g, data, slab)
            assert 0.0 <= s <= data.yty * (1 + 1e-12)
            assert log_det_w >= -1e-12

    def test_more_coefficients_than_rows(self):
        rng = np.random.default_rng(2)
        data = DesignData(rng.standard_normal(3), rng.standard_normal((3, 5)))
        res = posterior_kernel(np.ones(5, bool), data, SlabSpec(np.ones(5)), ModelPrior.flat(5))
        assert np.isfinite(res.log_score) and res.s_gamma >= 0

    def test_monotone_slab_limit(self, small_data):
        data, _, prior = small_data
        g = np.r_[True, np.zeros(data.p - 1, bool)]
        null = np.zeros(data.p, bool)
        diffs = [log_score(g, data, SlabSpec.constant(data.p, phi), prior)
                 - log_score(null, data, SlabSpec.constant(data.p, phi), prior)
                 for phi in (1e2, 1e6, 1e10)]
        assert diffs[0] > diffs[1] > diffs[2]

    def test_permutation_equivariance(self):
        data, slab, prior = random_instance(9, n=25, p=6)
        perm = np.random.default_rng(0).permutation(6)
        pdata = DesignData(data.y, data.X[:, perm])
        for g in all_states(6)[::7]:
            a = log_score(g, data, slab, prior)
            b = log_score(g[perm], pdata, slab.permuted(perm), prior.permuted(perm))
            assert a == pytest.approx(b, abs=1e-10)

    def test_batch_scores_match_reference(self):
        data, slab, prior = random_instance(4, n=20, p=7)
        states = all_states(7)
        ref = np.array([log_score(g, data, slab, prior) for g in states])
        np.testing.assert_allclose(score_many(states, data, slab, prior), ref, rtol=1e-12, atol=1e-9)

    def test_clamp(self):
        assert clamp_s(-1e-12, 10.0) == 0.0
        assert clamp_s(3.0, 10.0) == 3.0
        with pytest.raises(NumericalError):
            clamp_s(-1.0, 10.0)

    def test_rss_matches_least_squares(self, small_data):
        data, _, _ = small_data
        g = np.array([1, 1, 0, 0, 1], bool)
        coef, *_ = np.linalg.lstsq(data.X[:, g], data.y, rcond=None)
        assert residual_sum_of_squares(g, data) == pytest.approx(np.sum((data.y - data.X[:, g] @ coef) ** 2))
        assert residual_sum_of_squares(np.zeros(5, bool), data) == pytest.approx(data.yty)


class TestOdds:
    def test_identity_case(self, small_data):
        data, slab, prior = small_data
        g = np.array([1, 0, 1, 0, 0], bool)
        assert log_posterior_odds(g, g, data, slab, prior) == 0.0
        assert log_bayes_factor(g, g, data, slab) == 0.0

    def test_flat_prior_equals_bayes_factor(self, small_data):
        data, slab, _ = small_data
        flat = ModelPrior.flat(data.p)
        a, b = np.array([1, 1, 0, 0, 0], bool), np.array([0, 1, 0, 1, 1], bool)
        assert log_posterior_odds(a, b, data, slab, flat) == log_bayes_factor(a, b, data, slab)

    def test_odds_bayes_factor_prior_identity(self):
        for seed in range(10):
            data, slab, prior = random_instance(seed)
            rng = np.random.default_rng(seed)
            a, b = rng.random(data.p) < 0.5, rng.random(data.p) < 0.5
            lhs = log_posterior_odds(a, b, data, slab, prior)
            rhs = log_bayes_factor(a, b, data, slab) + log_prior_odds(a, b, prior)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_case_two_prior_term(self, small_data):
        data, slab, _ = small_data
        w = np.array([0.3, 0.3, 0.7, 0.7, 0.7])
        prior = ModelPrior.bernoulli(w)
        a, b = np.array([1, 1, 0, 0, 0], bool), np.array([1, 0, 1, 1, 0], bool)
        diff = log_posterior_odds(a, b, data, slab, prior) - log_bayes_factor(a, b, data, slab)
        expect = sum(np.log(w[j] / (1 - w[j])) * (1 if a[j] else -1) for j in np.flatnonzero(a != b))
        assert diff == pytest.approx(expect, abs=1e-12)

    def test_odds_match_enumerated_ratio(self):
        data, slab, prior = random_instance(11, n=20, p=3)
        table = enumerate_posterior(data, slab, prior)
        for a in all_states(3):
            for b in all_states(3):
                ratio = table.probability(a) / table.probability(b)
                assert np.exp(log_posterior_odds(a, b, data, slab, prior)) == pytest.approx(ratio, rel=1e-12)

    def test_three_model_additivity(self, small_data):
        data, slab, prior = small_data
        g1, g2, g3 = (np.array(x, bool) for x in ([1, 0, 0, 0, 1], [0, 1, 1, 0, 0], [1, 1, 1, 1, 0]))
        lhs = log_posterior_odds(g1, g3, data, slab, prior)
        rhs = log_posterior_odds(g1, g2, data, slab, prior) + log_posterior_odds(g2, g3, data, slab, prior)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_undefined_odds(self, small_data):
        data, slab, _ = small_data
        prior = ModelPrior.bernoulli([0.0, 0.5, 0.5, 0.5, 0.5])
        a, b = np.array([1, 0, 0, 0, 0], bool), np.array([1, 1, 0, 0, 0], bool)
        with pytest.raises(UndefinedOddsError):
            log_posterior_odds(a, b, data, slab, prior)
