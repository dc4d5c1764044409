import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from exchange_mcmc import diagnostics as dg
from exchange_mcmc import exact_analysis as ea
from exchange_mcmc import kernels as kn
from exchange_mcmc import models as md


@pytest.fixture(scope="module")
def gauss():
    return md.make_gaussian_location(1.0)[0]


@pytest.fixture(scope="module")
def poisson():
    return md.make_poisson(md.gamma_prior(1.0, 1.0))


@pytest.fixture(scope="module")
def ising2():
    return md.make_ising([[0, 1, 1.0]])


@pytest.fixture(scope="module")
def expo():
    return md.make_exponential_gamma()[0]


# total variation


def test_gaussian_tv_value(gauss):
    assert dg.tv_distance(gauss, 0.0, 1.0) == pytest.approx(2 * stats.norm.cdf(0.5) - 1, abs=1e-4)
    assert dg.tv_distance(gauss, 0.0, 1.0) == pytest.approx(0.38292, abs=1e-4)


def test_poisson_tv_below_coupling_bound(poisson):
    assert dg.tv_distance(poisson, 2.0, 2.5) <= -math.expm1(-0.5)


def test_tv_zero_on_diagonal(gauss, poisson):
    assert dg.tv_distance(gauss, 1.3, 1.3) == 0.0
    assert dg.tv_distance(poisson, 4.0, 4.0) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_tv_symmetry_and_triangle(a, b, c):
    model = md.make_poisson(md.gamma_prior(1.0, 1.0))
    ab, ba = dg.tv_distance(model, a, b), dg.tv_distance(model, b, a)
    assert ab == ba
    assert ab <= dg.tv_distance(model, a, c) + dg.tv_distance(model, c, b) + 1e-12


def test_tv_equals_one_minus_overlap(gauss, poisson, expo):
    for model, a, b in ((gauss, 0.0, 0.7), (poisson, 1.0, 3.0), (expo, 1.0, 2.5)):
        assert dg.tv_distance(model, a, b) == pytest.approx(1 - dg.overlap_expectation(model, a, b), abs=1e-9)


@pytest.mark.parametrize("tag,factory", [
    ("location-profile", lambda: md.make_gaussian_location(1.0)[0]),
    ("poisson-coupling", lambda: md.make_poisson(md.gamma_prior(1.0, 1.0))),
    ("pinsker-expfam", lambda: md.make_ising([[0, 1, 1.0]])),
])
def test_modulus_checks_hold(tag, factory):
    res = dg.tv_modulus_check(factory(), tag, [0.3, 1.0, 2.0], [0.05, 0.5, 1.5])
    assert res.satisfied and len(res.lhs) == 9


def test_location_profile_is_equality(gauss):
    res = dg.tv_modulus_check(gauss, "location-profile", [-2.0, 0.0, 3.0], [0.4])
    assert res.estimate <= 1e-10
    np.testing.assert_allclose(res.lhs, res.rhs, atol=1e-10)


def test_modulus_model_mismatch(gauss, poisson, expo):
    with pytest.raises(dg.ModelMismatchError):
        dg.tv_modulus_check(poisson, "location-profile", [1.0], [0.1])
    with pytest.raises(dg.ModelMismatchError):
        dg.tv_modulus_check(gauss, "poisson-coupling", [1.0], [0.1])
    with pytest.raises(dg.ModelMismatchError):
        dg.tv_modulus_check(expo, "pinsker-expfam", [1.0], [0.1])
    with pytest.raises(ValueError):
        dg.tv_modulus_check(gauss, "no-such-tag", [1.0], [0.1])


def test_pinsker_chain(ising2):
    pairs = [(a, a + s) for a in (-1.5, 0.0, 1.0) for s in (0.01, 0.3, 1.0)]
    res = dg.pinsker_chain_check(ising2, pairs)
    assert res.satisfied and res.worst_margin >= 0


def test_kl_identity_ising(ising2):
    assert dg.kl_divergence(ising2, 0.0, 0.0) == 0.0
    lhs = dg.symmetrized_kl(ising2, 0.0, 1.0)
    assert lhs == pytest.approx(math.tanh(1.0), abs=1e-10)


def test_kl_support_mismatch():
    model, _ = md.make_beta_binomial(4, 0.2, 0.8, 1.0, 1.0)
    broken = md.UnnormalizedModel(
        "broken", model.param_space, model.sample_space,
        lambda t, x: np.where((np.asarray(x) == 0) & (np.asarray(t) > 0.5), -np.inf, model.log_f(t, x)),
        model.log_Z, model.sample, model.sufficient_stat)
    with pytest.raises(dg.SupportMismatchError):
        dg.kl_divergence(broken, 0.3, 0.6, check_identity=False)


def test_kl_matches_gaussian_closed_form(gauss):
    assert dg.kl_divergence(gauss, 0.0, 1.2) == pytest.approx(0.5 * 1.2 ** 2, abs=1e-8)


# non-negligibility


def test_exponential_non_negligibility_decays(expo):
    vals = [dg.negligibility_probability(expo, 1.0, t2, 0.5) for t2 in (1.0, 10.0, 100.0)]
    np.testing.assert_allclose(vals, [1.0, 0.167, 0.0192], rtol=0.02)
    assert dg.negligibility_probability(expo, 1.0, 1000.0, 0.5) < 1e-15


def test_non_negligibility_monotone_in_delta(poisson):
    pairs = [(1.0, 2.0), (2.0, 5.0), (0.5, 1.5)]
    infs = [dg.non_negligibility(poisson, d, pairs).estimate for d in (0.01, 0.1, 0.5, 0.9)]
    assert all(x >= y - 1e-15 for x, y in zip(infs, infs[1:]))


def test_beta_binomial_non_negligibility_positive():
    model, _ = md.make_beta_binomial(10, 0.2, 0.8, 2.0, 3.0)
    grid = np.linspace(0.2, 0.8, 13)
    res = dg.non_negligibility(model, 0.1, [(a, b) for a in grid for b in grid])
    assert res.satisfied and 0.0 < res.estimate < 0.2


def test_non_negligibility_rejects_bad_delta(poisson):
    for d in (0.0, 1.0):
        with pytest.raises(ValueError):
            dg.negligibility_probability(poisson, 1.0, 2.0, d)


# tail conditions


def test_tail_gamma_posterior():
    model, prior = md.make_exponential_gamma()
    rep = dg.tail_condition_check(md.PosteriorSpec(model, prior, 1.0), [0.5, 1.0, 2.0, 4.0], [0.0, 1.0, 5.0])
    # log t - 2t + alpha t is eventually non-increasing only for alpha < 2
    assert rep.passed and rep.alpha == 1.0 and rep.sides == (1,) and rep.x1 == {"right": 1.0}
    assert rep.per_alpha[2.0] is False and rep.per_alpha[4.0] is False


def test_tail_gaussian_two_sided():
    rep = dg.tail_condition_check(lambda t: -0.5 * np.asarray(t) ** 2, [1.0, 3.0], [0.0, 1.0, 3.0, 10.0])
    assert rep.passed and rep.sides == (1, -1)
    assert rep.alpha == 3.0 and rep.x1 == {"right": 3.0, "left": 3.0}


def test_tail_truncated_gaussian_support():
    prior = md.truncated_gaussian_prior(0.0, 1.0, 0.0)
    rep = dg.tail_condition_check(prior.log_density, [1.0], [0.0, 2.0], support=(0.0, math.inf))
    assert rep.passed and rep.sides == (1,)


def test_tail_cauchy_fails():
    rep = dg.tail_condition_check(md.cauchy_log_density, [0.01, 0.1, 1.0], [0.0, 10.0, 100.0])
    assert not rep.passed and rep.alpha is None


def test_tail_compact_support(beta_binomial_grid):
    model, prior = md.make_beta_binomial(10, 0.2, 0.8, 2.0, 3.0)
    assert dg.tail_condition_check(md.PosteriorSpec(model, prior, 4), [1.0], [0.0]).passed


def test_proposal_tails():
    uni = dg.proposal_tail_check(kn.uniform_random_walk(1.0), 1.0)
    assert uni.finite and uni.b == pytest.approx(0.5 * math.e, rel=1e-9)
    g = dg.proposal_tail_check(kn.gaussian_random_walk(1.0), 1.0)
    assert g.finite and g.b == pytest.approx(math.exp(0.5) / math.sqrt(2 * math.pi), rel=1e-9)
    assert g.argmax == pytest.approx(1.0, abs=1e-6)
    c = dg.proposal_tail_check(kn.cauchy_random_walk(1.0), 0.5)
    assert not c.finite and c.b == math.inf
    with pytest.raises(dg.ModelMismatchError):
        dg.proposal_tail_check(kn.gamma_independence(2.0, 2.0), 1.0)


# rejection probability


def test_rejection_two_point(two_point):
    post, prop = two_point
    assert dg.rejection_probability(post, prop, 0.25) == pytest.approx(0.5, abs=1e-12)


def test_exponential_rejection_increases():
    model, prior = md.make_exponential_gamma()
    post = md.PosteriorSpec(model, prior, 1.0)
    prop = kn.gamma_independence(2.0, 2.0)
    vals = [dg.rejection_probability(post, prop, t) for t in (1.0, 10.0, 100.0, 1000.0)]
    np.testing.assert_allclose(vals, [0.2204, 0.7192, 0.9475, 0.9924], atol=5e-4)
    assert np.all(np.diff(vals) > 0)


def test_rejection_discrete_non_grid_proposal(beta_binomial_grid):
    post, prop = beta_binomial_grid
    ex = ea.build_exchange_matrix(post, prop)
    generic = kn.Proposal("table", lambda a, b: prop.log_q(a, b), prop.sample, True)
    assert dg.rejection_probability(post, generic, prop.grid[4]) == pytest.approx(ex.P[4, 4], abs=1e-12)


# output analysis


def test_batch_means_constant_is_zero():
    assert dg.batch_means_variance(np.full(10_000, 3.0)) == 0.0


def test_batch_means_iid():
    x = np.random.default_rng(0).standard_normal(400_000)
    assert dg.batch_means_variance(x) == pytest.approx(1.0, rel=0.1)


def test_batch_means_ar1():
    rng = np.random.default_rng(1)
    n, rho = 400_000, 0.5
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    exact = 1 / (1 - rho) ** 2
    assert dg.batch_means_variance(x, batch_count=200) == pytest.approx(exact, rel=0.15)


def test_batch_means_rejects_bad_batches():
    with pytest.raises(ValueError):
        dg.batch_means_variance(np.arange(10.0), batch_count=1)


def test_clt_two_point_exchange(two_point):
    post, prop = two_point
    rep = dg.clt_check(kn.KernelSpec("exchange", prop, post), lambda t: np.where(t > 0.5, 1.0, -1.0),
                       replications=1000, steps=2000, seed=1)
    assert rep.passed and not rep.degenerate and rep.sigma2 == pytest.approx(1.0)


def test_clt_two_point_mh_degenerate(two_point):
    post, prop = two_point
    rep = dg.clt_check(kn.KernelSpec("mh", prop, post), lambda t: np.where(t > 0.5, 1.0, -1.0),
                       replications=100, steps=100, seed=1)
    assert rep.degenerate and rep.max_abs_scaled_sum <= 0.11


def test_chi_square_marginal(beta_binomial_grid):
    post, prop = beta_binomial_grid
    spec = kn.KernelSpec("exchange", prop, post)
    chain = dg.exact_chain_for(spec)
    tr = kn.run_chain(spec, 0.5, 100_000, seed=2)
    _, p = dg.chi_square_marginal(tr, chain)
    assert p > 1e-3


def test_decorrelation_lag():
    P = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert dg.decorrelation_lag(ea.FiniteChain(np.arange(2.0), P, np.array([0.5, 0.5]))) == 1
    P = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert dg.decorrelation_lag(ea.FiniteChain(np.arange(2.0), P, np.array([0.5, 0.5]))) == math.ceil(
        math.log(1e-3) / math.log(0.8))


def test_claims_report(ising2):
    res = dg.claims_report({"pinsker": dg.pinsker_chain_check(ising2, [(0.0, 0.5)])})
    assert res["pinsker"]["status"] == "holds on tested grid"
