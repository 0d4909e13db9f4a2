import numpy as np
import pytest
from scipy import stats

from conftest import orthonormal_instance
from oracles import monte_carlo_gprior_ratio
from pmclab.core import DesignData, ModelPrior, SlabSpec, all_states, log_score
from pmclab.enumeration import enumerate_posterior, pmc_summary
from pmclab.gprior import (
    GPriorDensity,
    ZeroMassError,
    gprior_log_score,
    gprior_node_scores,
    gprior_posterior,
)


@pytest.fixture(scope="module")
def instance():
    data, truth = orthonormal_instance(21, n=40, p=4, values=(0.6, 0.4))
    return data, truth, ModelPrior.flat(4)


def test_point_mass_equals_fixed_scale(instance):
    data, _, prior = instance
    g = GPriorDensity.point_mass(25.0)
    for gamma in all_states(4):
        fixed = log_score(gamma, data, SlabSpec.constant(4, 25.0), prior)
        assert gprior_log_score(gamma, data, prior, g) == pytest.approx(fixed, abs=1e-12)


def test_narrow_uniform_near_point_mass(instance):
    data, _, prior = instance
    narrow = GPriorDensity.uniform(25.0, 25.0 * (1 + 1e-9))
    point = GPriorDensity.point_mass(25.0)
    gamma = np.array([1, 1, 0, 0], bool)
    assert gprior_log_score(gamma, data, prior, narrow) == pytest.approx(
        gprior_log_score(gamma, data, prior, point), abs=1e-6)


def test_density_integrates_to_one():
    assert GPriorDensity.uniform(10, 1000).total_mass() == pytest.approx(1.0, abs=1e-6)
    g = GPriorDensity.from_distribution(stats.lognorm(s=1.0, scale=50.0))
    assert g.total_mass(256) == pytest.approx(1.0, abs=1e-6)


def test_node_doubling_and_monte_carlo(instance):
    data, _, prior = instance
    g = GPriorDensity.uniform(10, 1000)
    a, b = np.array([1, 1, 0, 0], bool), np.array([1, 0, 0, 0], bool)
    s64 = gprior_log_score(a, data, prior, g, nodes=64)
    s512 = gprior_log_score(a, data, prior, g, nodes=512)
    assert abs(s64 - s512) < 1e-6
    ratio = np.exp(s64 - gprior_log_score(b, data, prior, g, nodes=64))
    mc = monte_carlo_gprior_ratio(a, b, data, 10, 1000, draws=1_000_000, seed=0)
    assert ratio == pytest.approx(mc, rel=0.005)


def test_refinement_converges(instance):
    data, _, prior = instance
    g = GPriorDensity.from_distribution(stats.lognorm(s=1.5, scale=30.0))
    gamma = np.array([1, 1, 1, 0], bool)
    vals = [gprior_log_score(gamma, data, prior, g, nodes=n) for n in (4, 8, 16, 32)]
    steps = np.abs(np.diff(vals))
    assert np.all(np.diff(steps) < 0)


def test_bracketing(instance):
    data, _, prior = instance
    g = GPriorDensity.uniform(1, 1e4)
    for gamma in all_states(4):
        _, node_scores = gprior_node_scores(gamma, data, prior, g)
        s = gprior_log_score(gamma, data, prior, g)
        assert node_scores.min() - 1e-12 <= s <= node_scores.max() + 1e-12


def test_integrated_odds_bounded_by_sup(instance):
    data, truth, prior = instance
    g = GPriorDensity.uniform(10, 1000)
    g0 = truth.gamma0
    _, s0 = gprior_node_scores(g0, data, prior, g)
    for gamma in all_states(4):
        _, s = gprior_node_scores(gamma, data, prior, g)
        integrated = gprior_log_score(gamma, data, prior, g) - gprior_log_score(g0, data, prior, g)
        assert integrated <= np.max(s - s0) + 1e-10


def test_point_mass_table_matches_enumeration(instance):
    data, _, prior = instance
    table = gprior_posterior(data, SlabSpec(np.ones(4)), prior, GPriorDensity.point_mass(50.0))
    fixed = enumerate_posterior(data, SlabSpec.constant(4, 50.0), prior)
    np.testing.assert_allclose(table.probabilities, fixed.probabilities, rtol=0, atol=1e-12)


def test_duplicate_columns_symmetric_under_g():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(25)
    data = DesignData(x + rng.standard_normal(25), np.column_stack([x, x, rng.standard_normal(25)]))
    table = gprior_posterior(data, SlabSpec(np.ones(3)), ModelPrior.flat(3), GPriorDensity.uniform(1, 100))
    assert table.probability([1, 0, 0]) == pytest.approx(table.probability([0, 1, 0]), abs=1e-10)


def test_uniform_between_endpoint_tables():
    data, truth = orthonormal_instance(30, n=100, p=3)
    prior = ModelPrior.flat(3)
    mid = pmc_summary(gprior_posterior(data, SlabSpec(np.ones(3)), prior, GPriorDensity.uniform(10, 1000)),
                      truth.gamma0).true_model_prob
    lo = pmc_summary(enumerate_posterior(data, SlabSpec.constant(3, 10.0), prior), truth.gamma0).true_model_prob
    hi = pmc_summary(enumerate_posterior(data, SlabSpec.constant(3, 1000.0), prior), truth.gamma0).true_model_prob
    assert min(lo, hi) <= mid <= max(lo, hi)


def test_errors(instance):
    data, _, prior = instance
    with pytest.raises(ValueError):
        GPriorDensity.uniform(10, 5)
    with pytest.raises(ValueError):
        GPriorDensity.point_mass(0.0)
    zero = GPriorDensity("generic", 1.0, 2.0, density=lambda c: np.zeros_like(c))
    with pytest.raises(ZeroMassError):
        gprior_log_score(np.ones(4, bool), data, prior, zero)
    with pytest.raises(ValueError):
        GPriorDensity.uniform(1, 2).nodes(1)
