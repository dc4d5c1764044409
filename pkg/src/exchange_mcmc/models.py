"""Model zoo for doubly-intractable posteriors.

Every likelihood family is written as an unnormalized density ``f_theta(x)``
together with an exact normalizer and an exact sampler.  The normalizer is
only ever read by the analysis code; the exchange kernels see a
:class:`Likelihood` view which carries no normalizer at all.

Parameters are scalar reals.  Sample points are whatever the family needs:
integers for Bernoulli/Binomial/Poisson, floats for continuous families,
spin vectors for Ising models and edge-indicator vectors for ERGMs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

MAX_ISING_VERTICES = 20
MAX_ERGM_VERTICES = 5
POISSON_TAIL_MASS = 1e-12


class ModelError(ValueError):
    """Invalid model or prior construction."""


class BudgetError(ModelError):
    """Requested instance exceeds the enumeration budget."""


# --------------------------------------------------------------------------
# Space descriptors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed interval of reals; infinite ends allowed."""

    lo: float = -math.inf
    hi: float = math.inf

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (theta >= self.lo) & (theta <= self.hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


@dataclass(frozen=True)
class FiniteSet:
    """Finite set of real parameter values, kept sorted."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(sorted(float(v) for v in self.values)))

    def contains(self, theta):
        return np.isin(np.asarray(theta, dtype=float), np.asarray(self.values))

    @property
    def lo(self) -> float:
        return self.values[0]

    @property
    def hi(self) -> float:
        return self.values[-1]

    @property
    def bounded(self) -> bool:
        return True


REALS = Interval()
POSITIVE = Interval(0.0, math.inf)


@dataclass(frozen=True)
class FiniteSpace:
    """Enumerable sample space given by an explicit array of points."""

    points: np.ndarray = field(repr=False)

    def support(self, thetas=None) -> np.ndarray:
        return self.points

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CountableSpace:
    """Non-negative integers, truncated per parameter at tail mass 1e-12."""

    upper: Callable[[float], int]

    def support(self, thetas) -> np.ndarray:
        top = max(self.upper(float(t)) for t in np.atleast_1d(thetas))
        return np.arange(top + 1)


@dataclass(frozen=True)
class ContinuousSpace:
    """One-dimensional continuum integrated with adaptive quadrature.

    ``bounds(theta)`` returns an interval holding all but a negligible
    amount of ``p_theta``'s mass; ``breakpoints(theta, theta2)`` lists points
    where the two densities cross (kinks of ``min`` and ``abs`` integrands).
    """

    lo: float
    hi: float
    bounds: Callable[[float], tuple]
    breakpoints: Optional[Callable[[float, float], list]] = None
    epsabs: float = 1e-10

    def window(self, *thetas) -> tuple:
        los, his = zip(*(self.bounds(float(t)) for t in thetas))
        return max(self.lo, min(los)), min(self.hi, max(his))

    def kinks(self, theta, theta2) -> list:
        if self.breakpoints is None:
            return []
        return [float(b) for b in self.breakpoints(float(theta), float(theta2))]


def is_discrete(space) -> bool:
    return isinstance(space, (FiniteSpace, CountableSpace))


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Likelihood:
    """Normalizer-free view of a model, the only thing exchange kernels see."""

    name: str
    log_f: Callable
    sample: Callable
    sample_space: object
    param_space: object


@dataclass(frozen=True)
class UnnormalizedModel:
    """Likelihood family ``p_theta = f_theta / Z(theta)``.

    Attributes:
        name: short identifier.
        param_space: :class:`Interval` or :class:`FiniteSet`.
        sample_space: :class:`FiniteSpace`, :class:`CountableSpace` or
            :class:`ContinuousSpace`.
        log_f: ``(theta, x) -> log f_theta(x)``; broadcasts ``theta`` against
            the leading axis of ``x``.
        log_Z: ``theta -> log Z(theta)``, vectorized.
        sample: ``(theta_array, rng) -> points``, one exact draw per entry.
        sufficient_stat: ``x -> T(x)`` for exponential families.
        canonical: ``log_f(theta, x) == theta * T(x) + log h(x)``.
        stat_bound: ``max |T(x)|`` over the sample space, when finite.
        overlap: optional closed form of
            ``integral min(p_theta2(w), c * p_theta(w)) dw`` with signature
            ``(theta, theta2, log_c)``.
    """

    name: str
    param_space: object
    sample_space: object
    log_f: Callable
    log_Z: Callable
    sample: Callable
    sufficient_stat: Optional[Callable] = None
    canonical: bool = False
    stat_bound: Optional[float] = None
    overlap: Optional[Callable] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def likelihood(self) -> Likelihood:
        return Likelihood(self.name, self.log_f, self.sample, self.sample_space, self.param_space)

    def f(self, theta, x):
        return np.exp(self.log_f(theta, x))

    def log_p(self, theta, x):
        """Normalized log density/mass ``log p_theta(x)``."""
        return self.log_f(theta, x) - self.log_Z(theta)

    def pmf_table(self, thetas) -> tuple:
        """Exact masses over the (truncated) support for each theta.

        Returns ``(points, probs)`` with ``probs[k, s] = p_{thetas[k]}(points[s])``.
        Only valid for discrete sample spaces.
        """
        if not is_discrete(self.sample_space):
            raise ModelError(f"{self.name}: pmf_table needs a discrete sample space")
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        points = self.sample_space.support(thetas)
        logp = np.stack([self.log_f(t, points) for t in thetas]) - np.asarray(self.log_Z(thetas)).reshape(-1, 1)
        return points, np.exp(logp)

    def mean_stat(self, theta) -> float:
        """``E_theta[T(x)]`` by exact enumeration."""
        if self.sufficient_stat is None:
            raise ModelError(f"{self.name} has no sufficient statistic")
        points, probs = self.pmf_table([theta])
        return float(probs[0] @ self.sufficient_stat(points))

    def with_overlap(self, fn) -> "UnnormalizedModel":
        return replace(self, overlap=fn)


def _finite_sampler(points, log_f, log_Z):
    """Exact sampler by inverse CDF over an enumerated space."""

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out_idx = np.empty(theta.shape[0], dtype=np.int64)
        uniq, inv = np.unique(theta, return_inverse=True)
        u = rng.random(theta.shape[0])
        for k, t in enumerate(uniq):
            cdf = np.cumsum(np.exp(log_f(t, points) - log_Z(t)))
            sel = inv == k
            out_idx[sel] = np.minimum(np.searchsorted(cdf, u[sel] * cdf[-1], side="right"), len(points) - 1)
        return points[out_idx]

    return sample


def _enumerated_log_Z(points, stat):
    def log_Z(theta):
        theta = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(theta)
        vals = special.logsumexp(np.outer(flat, stat), axis=1)
        return vals.reshape(theta.shape) if theta.ndim else float(vals[0])

    return log_Z


def _canonical_log_f(stat_fn):
    def log_f(theta, x):
        return np.asarray(theta, dtype=float) * stat_fn(x)

    return log_f


# --------------------------------------------------------------------------
# Priors and posteriors
# --------------------------------------------------------------------------

PRIOR_FAMILIES = (
    "gamma",
    "truncated-beta",
    "gaussian",
    "truncated-gaussian",
    "mixture",
    "conjugate-exponential-family",
    "discrete",
)


@dataclass(frozen=True)
class Prior:
    """Prior density (possibly unnormalized), ``-inf`` off its support."""

    log_density_fn: Callable
    support: object
    family: str
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.family not in PRIOR_FAMILIES:
            raise ModelError(f"unknown prior family {self.family!r}")

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        inside = self.support.contains(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(inside, self.log_density_fn(np.where(inside, theta, self._anchor)), -np.inf)
        return float(vals) if vals.ndim == 0 else vals

    @property
    def _anchor(self) -> float:
        lo, hi = self.support.lo, self.support.hi
        if math.isfinite(lo) and math.isfinite(hi):
            return 0.5 * (lo + hi)
        if math.isfinite(lo):
            return lo + 1.0
        if math.isfinite(hi):
            return hi - 1.0
        return 0.0

    @property
    def is_discrete(self) -> bool:
        return self.family == "discrete"

    def discretize(self, grid, weights=None) -> "Prior":
        """Discrete prior on ``grid`` with masses proportional to density times weight."""
        grid = np.asarray(grid, dtype=float)
        weights = np.ones_like(grid) if weights is None else np.asarray(weights, dtype=float)
        logm = self.log_density(grid) + np.log(weights)
        return discrete_prior(grid, np.exp(logm - logm.max()))


def discrete_prior(values, masses) -> Prior:
    values = np.asarray(values, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if values.shape != masses.shape or np.any(masses < 0) or masses.sum() <= 0:
        raise ModelError("discrete prior needs matching non-negative masses")
    order = np.argsort(values)
    values, masses = values[order], masses[order]
    with np.errstate(divide="ignore"):
        logm = np.log(masses / masses.sum())

    def log_density(theta):
        theta = np.asarray(theta, dtype=float)
        idx = np.clip(np.searchsorted(values, theta), 0, len(values) - 1)
        return np.where(values[idx] == theta, logm[idx], -np.inf)

    return Prior(log_density, FiniteSet(tuple(values)), "discrete",
                 {"values": values.tolist(), "masses": (masses / masses.sum()).tolist()})


def _normal_logpdf(mean: float, sd: float):
    const = -math.log(sd) - 0.5 * math.log(2.0 * math.pi)

    def log_density(t):
        return const - 0.5 * np.square((np.asarray(t, dtype=float) - mean) / sd)

    return log_density


def gamma_prior(shape: float, rate: float) -> Prior:
    if shape <= 0 or rate <= 0:
        raise ModelError("gamma prior needs positive shape and rate")
    const = shape * math.log(rate) - special.gammaln(shape)

    def log_density(t):
        t = np.asarray(t, dtype=float)
        return const + special.xlogy(shape - 1.0, t) - rate * t

    return Prior(log_density, Interval(0.0, math.inf), "gamma", {"shape": shape, "rate": rate})


def gaussian_prior(mean: float, sd: float) -> Prior:
    if sd <= 0:
        raise ModelError("gaussian prior needs sd > 0")
    return Prior(_normal_logpdf(mean, sd), REALS, "gaussian", {"mean": mean, "sd": sd})


def truncated_gaussian_prior(mean: float, sd: float, lower: float = 0.0) -> Prior:
    if sd <= 0:
        raise ModelError("truncated gaussian prior needs sd > 0")
    log_mass = stats.norm.logsf(lower, mean, sd)
    base = _normal_logpdf(mean, sd)
    return Prior(lambda t: base(t) - log_mass, Interval(lower, math.inf),
                 "truncated-gaussian", {"mean": mean, "sd": sd, "lower": lower})


def truncated_beta_prior(a: float, b: float, lo: float, hi: float) -> Prior:
    if not (0.0 < lo < hi < 1.0):
        raise ModelError(f"truncated beta needs 0 < lo < hi < 1, got [{lo}, {hi}]")
    if a <= 0 or b <= 0:
        raise ModelError("beta prior needs a, b > 0")
    log_norm = math.log(stats.beta.cdf(hi, a, b) - stats.beta.cdf(lo, a, b)) + special.betaln(a, b)

    def log_density(t):
        t = np.asarray(t, dtype=float)
        return special.xlogy(a - 1.0, t) + special.xlog1py(b - 1.0, -t) - log_norm

    return Prior(log_density, Interval(lo, hi),
                 "truncated-beta", {"a": a, "b": b, "lo": lo, "hi": hi})


def mixture_prior(priors: Sequence[Prior], weights: Sequence[float]) -> Prior:
    """Finite mixture of normalized priors sharing one support."""
    weights = np.asarray(weights, dtype=float)
    if len(priors) != len(weights) or np.any(weights <= 0):
        raise ModelError("mixture needs one positive weight per component")
    logw = np.log(weights / weights.sum())
    support = priors[0].support

    def log_density(theta):
        comps = np.stack([p.log_density(theta) for p in priors])
        return special.logsumexp(comps + logw.reshape((-1,) + (1,) * (comps.ndim - 1)), axis=0)

    return Prior(log_density, support, "mixture", {"weights": weights.tolist()})


def cauchy_log_density(theta):
    """Heavy-tailed control density proportional to ``1 / (1 + theta^2)``."""
    return -np.log1p(np.square(theta))


@dataclass(frozen=True)
class BlindPosterior:
    """Prior, normalizer-free likelihood and data: all the exchange step may read."""

    prior: Prior
    likelihood: Likelihood
    data: object


@dataclass(frozen=True)
class PosteriorSpec:
    model: UnnormalizedModel
    prior: Prior
    data: object

    def blind(self) -> BlindPosterior:
        return BlindPosterior(self.prior, self.model.likelihood, self.data)

    def log_unnormalized(self, theta):
        """``log pi(theta) + log p_theta(x)``; reads the normalizer."""
        theta = np.asarray(theta, dtype=float)
        lp = np.atleast_1d(self.prior.log_density(theta))
        flat = np.atleast_1d(theta)
        out = np.full(flat.shape, -np.inf)
        ok = np.isfinite(lp)
        if ok.any():
            out[ok] = lp[ok] + self.model.log_p(flat[ok], self.data)
        return out.reshape(theta.shape) if theta.ndim else float(out[0])

    def normalized_density(self, quad_range=None) -> Callable:
        """Posterior density for a continuous parameter, normalized by quadrature."""
        lo, hi = quad_range or (self.prior.support.lo, self.prior.support.hi)
        peak = _log_peak(self, lo, hi)
        mass, _ = integrate.quad(lambda t: math.exp(self.log_unnormalized(t) - peak), lo, hi,
                                 epsabs=1e-13, epsrel=1e-12, limit=400)
        log_norm = peak + math.log(mass)
        return lambda t: np.exp(self.log_unnormalized(t) - log_norm)


def _log_peak(post: PosteriorSpec, lo: float, hi: float) -> float:
    a = lo if math.isfinite(lo) else -50.0
    b = hi if math.isfinite(hi) else 50.0
    ts = np.linspace(a, b, 2001)
    vals = post.log_unnormalized(ts)
    return float(np.max(vals[np.isfinite(vals)]))


# --------------------------------------------------------------------------
# Factories
# --------------------------------------------------------------------------


def _bernoulli_model(param_space) -> UnnormalizedModel:
    points = np.array([0, 1])

    def log_f(theta, x):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x)
        return special.xlogy(x, theta) + special.xlog1py(1 - x, -theta)

    def log_Z(theta):
        return np.zeros_like(np.asarray(theta, dtype=float)) + 0.0

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return (rng.random(theta.shape[0]) < theta).astype(np.int64)

    return UnnormalizedModel("bernoulli", param_space, FiniteSpace(points), log_f, log_Z, sample,
                             sufficient_stat=lambda x: np.asarray(x, dtype=float))


def make_two_point_bernoulli():
    """Bernoulli likelihood on the parameter set {1/4, 3/4} with a lopsided prior.

    With data ``x = 1`` the prior (3/4, 1/4) exactly cancels the likelihood
    ratio, so the posterior is uniform on the two points.

    Returns:
        (model, prior, data)
    """
    thetas = (0.25, 0.75)
    model = _bernoulli_model(FiniteSet(thetas))
    prior = discrete_prior(thetas, [0.75, 0.25])
    return model, prior, 1


def make_beta_binomial(n: int, theta1: float, theta2: float, a: float, b: float):
    """Binomial(n, theta) likelihood with a Beta(a, b) prior truncated to [theta1, theta2]."""
    if not (0.0 < theta1 < theta2 < 1.0):
        raise ModelError(f"need 0 < theta1 < theta2 < 1, got {theta1}, {theta2}")
    if n < 1:
        raise ModelError("n must be >= 1")
    points = np.arange(n + 1)
    log_binom = special.gammaln(n + 1) - special.gammaln(points + 1) - special.gammaln(n - points + 1)

    def log_f(theta, x):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x)
        return log_binom[x] + special.xlogy(x, theta) + special.xlog1py(n - x, -theta)

    def log_Z(theta):
        return np.zeros_like(np.asarray(theta, dtype=float)) + 0.0

    def sample(theta, rng):
        return rng.binomial(n, np.atleast_1d(np.asarray(theta, dtype=float)))

    model = UnnormalizedModel("binomial", Interval(theta1, theta2), FiniteSpace(points), log_f, log_Z,
                              sample, sufficient_stat=lambda x: np.asarray(x, dtype=float),
                              meta={"n": n})
    return model, truncated_beta_prior(a, b, theta1, theta2)


def _exp_overlap(theta, theta2, log_c):
    """``integral_0^inf min(p_theta2(w), c p_theta(w)) dw`` for exponential densities."""
    c = math.exp(log_c)
    if theta == theta2:
        return min(c, 1.0)
    # log(c p_theta) - log(p_theta2) = log_c + log(theta/theta2) + (theta2 - theta) w
    w_star = max(0.0, (math.log(theta2) - math.log(theta) - log_c) / (theta2 - theta))
    if theta2 > theta:
        return c * -math.expm1(-theta * w_star) + math.exp(-theta2 * w_star)
    return -math.expm1(-theta2 * w_star) + c * math.exp(-theta * w_star)


def crossing_point(theta: float, theta2: float) -> float:
    """Where ``theta e^{-theta w}`` and ``theta2 e^{-theta2 w}`` cross.

    Uses ``log1p`` so nearly equal rates keep full precision; within 1e-8 the
    limit ``1 / theta`` is returned.
    """
    s = theta - theta2
    if abs(s) < 1e-8:
        return 1.0 / theta
    return math.log1p(s / theta2) / s


def make_exponential_gamma():
    """Exponential(theta) likelihood with an Exp(1) prior (Gamma(1, 1))."""

    def log_f(theta, x):
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(theta) - theta * np.asarray(x, dtype=float)

    def log_Z(theta):
        return np.zeros_like(np.asarray(theta, dtype=float)) + 0.0

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return rng.exponential(1.0 / theta)

    def bounds(theta):
        return 0.0, 40.0 / theta

    def kinks(theta, theta2):
        return [crossing_point(theta, theta2)] if theta != theta2 else []

    space = ContinuousSpace(0.0, math.inf, bounds, kinks)
    model = UnnormalizedModel("exponential", Interval(0.0, math.inf), space, log_f, log_Z, sample,
                              sufficient_stat=lambda x: -np.asarray(x, dtype=float), overlap=_exp_overlap)
    return model, gamma_prior(1.0, 1.0)


def _poisson_upper(theta: float) -> int:
    if theta <= 0:
        return 0
    k = int(stats.poisson.isf(POISSON_TAIL_MASS, theta))
    while stats.poisson.sf(k, theta) > POISSON_TAIL_MASS:
        k += 1
    return k


def make_poisson(prior: Prior) -> UnnormalizedModel:
    """Poisson(theta) likelihood; support truncated where the tail mass drops below 1e-12."""
    if prior.support.lo < 0:
        raise ModelError("poisson mean parameter needs a prior supported on [0, inf)")

    def log_f(theta, x):
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x)
        return special.xlogy(x, theta) - theta - special.gammaln(x + 1)

    def log_Z(theta):
        return np.zeros_like(np.asarray(theta, dtype=float)) + 0.0

    def sample(theta, rng):
        return rng.poisson(np.atleast_1d(np.asarray(theta, dtype=float)))

    return UnnormalizedModel("poisson", Interval(0.0, math.inf), CountableSpace(_poisson_upper), log_f, log_Z,
                             sample, sufficient_stat=lambda x: np.asarray(x, dtype=float))


def make_gaussian_location(sigma_prior: float):
    """N(theta, 1) likelihood with a N(0, sigma_prior^2) prior."""
    if sigma_prior <= 0:
        raise ModelError("sigma_prior must be positive")
    half_log_2pi = 0.5 * math.log(2 * math.pi)

    def log_f(theta, x):
        return -0.5 * np.square(np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)) - half_log_2pi

    def log_Z(theta):
        return np.zeros_like(np.asarray(theta, dtype=float)) + 0.0

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta + rng.standard_normal(theta.shape[0])

    def bounds(theta):
        return theta - 12.0, theta + 12.0

    def kinks(theta, theta2):
        return [0.5 * (theta + theta2)] if theta != theta2 else []

    space = ContinuousSpace(-math.inf, math.inf, bounds, kinks)
    model = UnnormalizedModel("gaussian-location", REALS, space, log_f, log_Z, sample,
                              sufficient_stat=lambda x: np.asarray(x, dtype=float))
    return model, gaussian_prior(0.0, sigma_prior)


def _check_edges(edges, n_vertices):
    out = []
    for e in edges:
        if len(e) == 2:
            i, j, J = e[0], e[1], 1.0
        elif len(e) == 3:
            i, j, J = e
        else:
            raise ModelError(f"edge {e!r} must be [i, j] or [i, j, J]")
        i, j = int(i), int(j)
        if i == j or min(i, j) < 0:
            raise ModelError(f"bad edge {e!r}")
        out.append((i, j, float(J)))
    n = n_vertices if n_vertices is not None else 1 + max(max(i, j) for i, j, _ in out)
    if any(max(i, j) >= n for i, j, _ in out):
        raise ModelError("edge refers to a vertex outside the graph")
    return out, n


def make_ising(edges, M: float = 0.0, n_vertices: Optional[int] = None) -> UnnormalizedModel:
    """Ising model ``P_theta(s) ∝ exp(-theta H(s))`` on a small graph.

    Args:
        edges: iterable of ``(i, j, J_ij)`` (or ``(i, j)`` with ``J_ij = 1``).
        M: external field.
        n_vertices: vertex count; inferred from the edges when omitted.

    The sufficient statistic is ``-H(s) = sum J s_i s_j + M sum s_i`` and
    the sample space is all ``2^n`` spin configurations.
    """
    edges, n = _check_edges(edges, n_vertices)
    if n > MAX_ISING_VERTICES:
        raise BudgetError(f"Ising enumeration limited to {MAX_ISING_VERTICES} vertices, got {n}")
    I = np.array([e[0] for e in edges], dtype=np.int64)
    Jdx = np.array([e[1] for e in edges], dtype=np.int64)
    Jw = np.array([e[2] for e in edges], dtype=float)

    def stat(x):
        x = np.asarray(x, dtype=float)
        return (x[..., I] * x[..., Jdx]) @ Jw + M * x.sum(axis=-1)

    points = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)
    T = stat(points)
    log_f = _canonical_log_f(stat)
    log_Z = _enumerated_log_Z(points, T)
    model = UnnormalizedModel("ising", REALS, FiniteSpace(points), log_f, log_Z,
                              _finite_sampler(points, log_f, log_Z), sufficient_stat=stat, canonical=True,
                              stat_bound=float(np.max(np.abs(T))),
                              meta={"n": n, "edges": [list(e) for e in edges], "M": M,
                                    "triangle_bound": float(np.abs(Jw).sum() + abs(M) * n)})
    return model


def make_ergm(n: int, stat: str = "edge-count") -> UnnormalizedModel:
    """ERGM on simple undirected graphs with ``n <= 5`` vertices.

    Graphs are edge-indicator vectors over the ``n(n-1)/2`` vertex pairs in
    lexicographic order.  ``stat`` is ``"edge-count"`` or ``"triangle-count"``.
    """
    if n > MAX_ERGM_VERTICES:
        raise BudgetError(f"ERGM enumeration limited to {MAX_ERGM_VERTICES} vertices, got {n}")
    if n < 2:
        raise ModelError("ERGM needs at least 2 vertices")
    pairs = list(itertools.combinations(range(n), 2))
    pair_index = {p: k for k, p in enumerate(pairs)}
    if stat == "edge-count":
        def stat_fn(x):
            return np.asarray(x, dtype=float).sum(axis=-1)
    elif stat == "triangle-count":
        tri = np.array([[pair_index[(a, b)], pair_index[(a, c)], pair_index[(b, c)]]
                        for a, b, c in itertools.combinations(range(n), 3)], dtype=np.int64).reshape(-1, 3)

        def stat_fn(x):
            x = np.asarray(x, dtype=float)
            return (x[..., tri[:, 0]] * x[..., tri[:, 1]] * x[..., tri[:, 2]]).sum(axis=-1)
    else:
        raise ModelError(f"unknown ERGM statistic {stat!r}")
    points = np.array(list(itertools.product((0, 1), repeat=len(pairs))), dtype=np.int8)
    T = stat_fn(points)
    log_f = _canonical_log_f(stat_fn)
    log_Z = _enumerated_log_Z(points, T)
    return UnnormalizedModel("ergm", REALS, FiniteSpace(points), log_f, log_Z,
                             _finite_sampler(points, log_f, log_Z), sufficient_stat=stat_fn, canonical=True,
                             stat_bound=float(np.max(np.abs(T))), meta={"n": n, "stat": stat})


def stat_range(model: UnnormalizedModel) -> tuple:
    """``(min T, max T)`` over an enumerable sample space."""
    if model.sufficient_stat is None or not isinstance(model.sample_space, FiniteSpace):
        raise ModelError("stat_range needs a finite exponential-family model")
    T = model.sufficient_stat(model.sample_space.points)
    return float(T.min()), float(T.max())


def make_conjugate_prior(model: UnnormalizedModel, n0: float, t: float) -> Prior:
    """Conjugate prior ``exp(n0 (theta t - eta(theta)))`` for a canonical family.

    ``eta`` is the model's log normalizer, captured once here.  ``t`` must lie
    strictly between the smallest and largest value of the statistic.
    """
    if not model.canonical:
        raise ModelError(f"{model.name} is not a canonical exponential family")
    if n0 <= 0:
        raise ModelError("n0 must be positive")
    m1, M1 = stat_range(model)
    if not (m1 < t < M1):
        raise ModelError(f"t={t} must lie strictly inside ({m1}, {M1})")
    eta = model.log_Z

    def log_density(theta):
        return n0 * (np.asarray(theta, dtype=float) * t - eta(theta))

    return Prior(log_density, model.param_space, "conjugate-exponential-family", {"n0": n0, "t": t})
