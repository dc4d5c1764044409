import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from exchange_mcmc import models as md


# two-point


def test_two_point_posterior_is_uniform():
    model, prior, x = md.make_two_point_bernoulli()
    post = md.PosteriorSpec(model, prior, x)
    lp = post.log_unnormalized(np.array([0.25, 0.75]))
    w = np.exp(lp - lp.max())
    np.testing.assert_allclose(w / w.sum(), [0.5, 0.5], atol=1e-15)


def test_two_point_bernoulli_mass():
    model, _, _ = md.make_two_point_bernoulli()
    assert math.exp(model.log_p(0.75, 1)) == pytest.approx(0.75, abs=1e-15)


def test_two_point_sampler_mean():
    model, _, _ = md.make_two_point_bernoulli()
    draws = model.sample(np.full(100_000, 0.75), np.random.default_rng(0))
    assert abs(draws.mean() - 0.75) < 0.005


# Beta-Binomial


def test_beta_binomial_normalizes():
    model, _ = md.make_beta_binomial(10, 0.2, 0.8, 2.0, 3.0)
    _, probs = model.pmf_table([0.5])
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_beta_binomial_small_case():
    model, _ = md.make_beta_binomial(2, 0.2, 0.8, 1.0, 1.0)
    assert math.exp(model.log_p(0.5, 1)) == pytest.approx(0.5, abs=1e-14)


def test_beta_binomial_posterior_shape():
    n, a, b, x = 10, 2.0, 3.0, 4
    model, prior = md.make_beta_binomial(n, 0.2, 0.8, a, b)
    post = md.PosteriorSpec(model, prior, x)
    ts = np.linspace(0.21, 0.79, 15)
    diff = post.log_unnormalized(ts) - stats.beta.logpdf(ts, a + x, n - x + b)
    np.testing.assert_allclose(diff - diff[0], 0.0, atol=1e-12)
    assert post.log_unnormalized(0.1) == -np.inf


@pytest.mark.parametrize("bounds", [(0.5, 0.5), (0.6, 0.4), (0.0, 0.5), (0.5, 1.0)])
def test_beta_binomial_rejects_bad_bounds(bounds):
    with pytest.raises(md.ModelError):
        md.make_beta_binomial(10, bounds[0], bounds[1], 1.0, 1.0)


# exponential-Gamma


def test_exponential_posterior_is_gamma():
    model, prior = md.make_exponential_gamma()
    post = md.PosteriorSpec(model, prior, 1.0)
    dens = post.normalized_density()
    ts = np.linspace(0.05, 8.0, 25)
    np.testing.assert_allclose(dens(ts), stats.gamma.pdf(ts, 2.0, scale=0.5), rtol=1e-8)
    mass, _ = integrate.quad(dens, 0.0, np.inf, epsabs=1e-12)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_exponential_normalizer_is_one():
    model, _ = md.make_exponential_gamma()
    np.testing.assert_array_equal(model.log_Z(np.array([0.1, 1.0, 50.0])), 0.0)


def test_crossing_point():
    assert md.crossing_point(1.0, 2.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert md.crossing_point(3.0, 3.0 + 1e-10) == pytest.approx(1.0 / 3.0, rel=1e-9)
    assert md.crossing_point(2.0, 5.0) == pytest.approx(md.crossing_point(5.0, 2.0), rel=1e-14)


def test_exponential_overlap_matches_quadrature():
    model, _ = md.make_exponential_gamma()
    for t1, t2, lc in [(1.0, 2.0, 0.3), (2.0, 1.0, -0.5), (1.0, 1.0, 0.2), (0.5, 7.0, 0.0)]:
        c = math.exp(lc)
        ref, _ = integrate.quad(lambda w: min(t2 * math.exp(-t2 * w), c * t1 * math.exp(-t1 * w)), 0, 200.0,
                                points=[md.crossing_point(t1, t2)], limit=200)
        assert model.overlap(t1, t2, lc) == pytest.approx(ref, abs=1e-9)


# Poisson


def test_poisson_pmf_and_truncation():
    model = md.make_poisson(md.gamma_prior(1.0, 1.0))
    assert math.exp(model.log_p(2.0, 0)) == pytest.approx(math.exp(-2.0), rel=1e-14)
    for theta in (0.3, 2.0, 25.0):
        _, probs = model.pmf_table([theta])
        assert probs.sum() >= 1.0 - 1e-12


def test_poisson_rejects_negative_support():
    with pytest.raises(md.ModelError):
        md.make_poisson(md.gaussian_prior(0.0, 1.0))


# Gaussian location


def test_gaussian_location_conjugate_posterior():
    sigma, x = 2.0, 1.3
    model, prior = md.make_gaussian_location(sigma)
    post = md.PosteriorSpec(model, prior, x)
    dens = post.normalized_density((-30.0, 30.0))
    var = 1.0 / (1.0 + 1.0 / sigma ** 2)
    ts = np.linspace(-2.0, 3.0, 10)
    np.testing.assert_allclose(dens(ts), stats.norm.pdf(ts, var * x, math.sqrt(var)), atol=1e-10)


def test_gaussian_location_mode_value():
    model, _ = md.make_gaussian_location(1.0)
    assert math.exp(model.log_p(0.7, 0.7)) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)


# Ising and ERGM


def test_ising_single_edge():
    model = md.make_ising([[0, 1, 1.0]])
    _, probs = model.pmf_table([0.0])
    np.testing.assert_allclose(probs[0], 0.25, atol=1e-15)
    for theta in (-1.5, 0.3, 2.0):
        expected = math.log(2 * math.exp(theta) + 2 * math.exp(-theta))
        assert model.log_Z(theta) == pytest.approx(expected, abs=1e-13)


def test_ising_statistic_bound():
    model = md.make_ising([[0, 1, 0.5], [1, 2, -1.0], [0, 2, 2.0]], M=0.3)
    T = model.sufficient_stat(model.sample_space.points)
    assert model.stat_bound == np.max(np.abs(T))
    assert model.stat_bound <= model.meta["triangle_bound"]


def test_ising_vertex_budget():
    with pytest.raises(md.BudgetError):
        md.make_ising([[0, 20]])


def test_ergm_edge_count():
    model = md.make_ergm(3)
    _, probs = model.pmf_table([0.0])
    np.testing.assert_allclose(probs[0], 1 / 8, atol=1e-15)
    for theta in (-1.0, 0.4, 2.5):
        assert model.log_Z(theta) == pytest.approx(3 * math.log1p(math.exp(theta)), abs=1e-13)
    assert md.make_ergm(4).stat_bound == 6


def test_ergm_vertex_budget():
    with pytest.raises(md.BudgetError):
        md.make_ergm(6)


def test_ergm_triangle_statistic():
    model = md.make_ergm(3, "triangle-count")
    T = model.sufficient_stat(model.sample_space.points)
    assert T.max() == 1 and T.sum() == 1


# conjugate prior


def test_conjugate_prior_properties():
    model = md.make_ising([[0, 1, 1.0]])
    prior = md.make_conjugate_prior(model, 1.0, 0.0)
    ts = np.linspace(-3.0, 3.0, 100)
    lp = prior.log_density(ts)
    assert np.all(np.isfinite(lp))
    np.testing.assert_allclose(lp, lp[::-1], atol=1e-12)

    def grid_var(n0):
        w = np.exp(md.make_conjugate_prior(model, n0, 0.5).log_density(ts))
        w /= w.sum()
        m = w @ ts
        return w @ (ts - m) ** 2

    assert grid_var(10.0) < grid_var(1.0)


@pytest.mark.parametrize("t", [-1.0, 1.0, 3.0])
def test_conjugate_prior_rejects_boundary(t):
    with pytest.raises(md.ModelError):
        md.make_conjugate_prior(md.make_ising([[0, 1, 1.0]]), 1.0, t)


# invariants


def _discrete_models():
    return [
        md.make_two_point_bernoulli()[0],
        md.make_beta_binomial(10, 0.2, 0.8, 2.0, 3.0)[0],
        md.make_poisson(md.gamma_prior(1.0, 1.0)),
        md.make_ising([[0, 1, 1.0], [1, 2, 1.0], [2, 0, 0.5]], M=0.2),
        md.make_ergm(4),
        md.make_ergm(4, "triangle-count"),
    ]


def _theta_for(model, u):
    space = model.param_space
    if isinstance(space, md.FiniteSet):
        return space.values[int(u * len(space.values)) % len(space.values)]
    lo = space.lo if math.isfinite(space.lo) else -3.0
    hi = space.hi if math.isfinite(space.hi) else 3.0
    if model.name == "poisson":
        lo, hi = 0.1, 20.0
    return lo + (hi - lo) * (0.02 + 0.96 * u)


@pytest.mark.parametrize("model", _discrete_models(), ids=lambda m: m.name)
def test_normalization_random_theta(model):
    rng = np.random.default_rng(1)
    for u in rng.random(20):
        _, probs = model.pmf_table([_theta_for(model, u)])
        assert probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_continuous_normalization_random_theta():
    rng = np.random.default_rng(2)
    for model in (md.make_exponential_gamma()[0], md.make_gaussian_location(1.0)[0]):
        for u in rng.random(20):
            theta = 0.1 + 5 * u
            lo, hi = model.sample_space.bounds(theta)
            mass, _ = integrate.quad(lambda w: math.exp(model.log_p(theta, w)), lo, hi, epsabs=1e-12, limit=200)
            assert mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("model", _discrete_models(), ids=lambda m: m.name)
def test_sampler_chi_square(model):
    theta = _theta_for(model, 0.37)
    points, probs = model.pmf_table([theta])
    draws = model.sample(np.full(100_000, theta), np.random.default_rng(3))
    if points.ndim == 1:
        counts = np.bincount(np.asarray(draws, dtype=int), minlength=len(points))[: len(points)]
    else:
        codes = points.astype(np.int64) @ (1 << np.arange(points.shape[1]))
        lookup = {c: k for k, c in enumerate(codes)}
        dcodes = np.asarray(draws, dtype=np.int64) @ (1 << np.arange(points.shape[1]))
        counts = np.bincount([lookup[c] for c in dcodes], minlength=len(points))
    p = probs[0]
    keep = p * 100_000 >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(p[keep], p[~keep].sum()) * 100_000
    if exp[-1] < 1e-9:
        obs, exp = obs[:-1], exp[:-1]
    exp *= obs.sum() / exp.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


@pytest.mark.parametrize("model", [md.make_ising([[0, 1, 1.0], [1, 2, -0.5]], M=0.4), md.make_ergm(4),
                                   md.make_ergm(4, "triangle-count")], ids=["ising", "ergm-edge", "ergm-tri"])
def test_exponential_family_derivative_identity(model):
    for theta in (-1.2, 0.0, 0.7):
        h = 1e-5
        deriv = (model.log_Z(theta + h) - model.log_Z(theta - h)) / (2 * h)
        assert deriv == pytest.approx(model.mean_stat(theta), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_prior_off_support_is_minus_inf(a, b):
    prior = md.truncated_beta_prior(2.0, 3.0, 0.2, 0.8)
    for t in (a, b):
        val = prior.log_density(t)
        if 0.2 <= t <= 0.8:
            assert math.isfinite(val)
        else:
            assert val == -math.inf


def test_likelihood_view_has_no_normalizer():
    model, _ = md.make_exponential_gamma()
    assert not hasattr(model.likelihood, "log_Z")
