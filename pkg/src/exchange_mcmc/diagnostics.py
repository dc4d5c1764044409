"""Numeric checks of the analytic conditions behind the ergodicity results.

Every check evaluates its claim on a finite set of inputs and can only
support or refute it there; results say "holds on the tested grid".
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from . import exact_analysis as ea
from .kernels import GridProposal, KernelSpec, Proposal, Trace, _log_mh_ratio, run_chains
from .models import (ContinuousSpace, PosteriorSpec, UnnormalizedModel, is_discrete)

QUAD_TOL = 1e-8
KS_ALPHA = 1e-3


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


class ModelMismatchError(ValueError):
    """Check requested for a model it does not apply to."""


class SupportMismatchError(ValueError):
    pass


class IdentityError(AssertionError):
    """An exact identity failed numerically."""


@dataclass(frozen=True)
class BoundCheckResult:
    """Outcome of checking ``lhs <= rhs`` pointwise.

    ``worst_margin`` is ``min(rhs - lhs)``; ``satisfied`` iff
    ``max(lhs - rhs) <= tolerance``.  ``estimate`` carries a summary number
    when the check has one (e.g. a grid infimum).
    """

    claim_id: str
    evaluation_points: list
    lhs: np.ndarray
    rhs: np.ndarray
    satisfied: bool
    worst_margin: float
    tolerance: float
    estimate: Optional[float] = None

    @classmethod
    def from_sides(cls, claim_id, points, lhs, rhs, tolerance, estimate=None) -> "BoundCheckResult":
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        gap = rhs - lhs
        worst = float(np.min(gap)) if gap.size else math.inf
        return cls(claim_id, list(points), lhs, rhs, bool(-worst <= tolerance), worst, tolerance, estimate)

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "evaluation_points": [list(map(float, p)) if np.ndim(p) else float(p) for p in self.evaluation_points],
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "satisfied": self.satisfied,
            "worst_margin": self.worst_margin,
            "tolerance": self.tolerance,
            "estimate": self.estimate,
        }


# --------------------------------------------------------------------------
# Distances between likelihoods
# --------------------------------------------------------------------------


def _pmfs(model: UnnormalizedModel, theta, theta2):
    _, probs = model.pmf_table([theta, theta2])
    return probs[0], probs[1]


def _segments(model: UnnormalizedModel, theta, theta2):
    space: ContinuousSpace = model.sample_space
    lo, hi = space.window(theta, theta2)
    kinks = sorted({k for k in space.kinks(theta, theta2) if lo < k < hi})
    edges = [lo, *kinks, hi]
    return list(zip(edges[:-1], edges[1:]))


def _quad(fn, segments, epsabs=1e-12) -> float:
    total = 0.0
    for a, b in segments:
        val, err = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=1e-12, limit=500)
        if err > QUAD_TOL:
            raise QuadratureError(f"quadrature error {err:.3g} on [{a}, {b}]")
        total += val
    return total


def _density(model, theta):
    return lambda w: math.exp(float(model.log_p(theta, w)))


def tv_distance(model: UnnormalizedModel, theta: float, theta2: float) -> float:
    """Exact ``1/2 sum |p_theta - p_theta2|`` (sum or quadrature)."""
    theta, theta2 = float(theta), float(theta2)
    if theta == theta2:
        return 0.0
    a, b = min(theta, theta2), max(theta, theta2)  # fixed order keeps the result symmetric
    if is_discrete(model.sample_space):
        p, q = _pmfs(model, a, b)
        return float(min(1.0, 0.5 * np.sum(np.abs(p - q))))
    pa, pb = _density(model, a), _density(model, b)
    return float(min(1.0, 0.5 * _quad(lambda w: abs(pa(w) - pb(w)), _segments(model, a, b))))


def overlap_expectation(model: UnnormalizedModel, theta: float, theta2: float) -> float:
    """``E_{theta2}[min(p_theta / p_theta2, 1)]``, which equals ``1 - TV``."""
    theta, theta2 = float(theta), float(theta2)
    if is_discrete(model.sample_space):
        p, q = _pmfs(model, theta, theta2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(q > 0, p / q, 0.0)
        return float(np.sum(q * np.minimum(ratio, 1.0)))
    pa, pb = _density(model, theta), _density(model, theta2)

    def fn(w):
        qb = pb(w)
        return qb * min(pa(w) / qb, 1.0) if qb > 0 else 0.0

    return _quad(fn, _segments(model, theta, theta2))


def kl_divergence(model: UnnormalizedModel, theta: float, theta2: float, check_identity: bool = True) -> float:
    """Exact ``KL(p_theta || p_theta2)``.

    For canonical exponential families the symmetrized identity
    ``KL(a,b) + KL(b,a) = (b - a)(E_b T - E_a T)`` is also checked to 1e-8.
    """
    theta, theta2 = float(theta), float(theta2)
    if theta == theta2:
        return 0.0
    if is_discrete(model.sample_space):
        points = model.sample_space.support([theta, theta2])
        lp = np.asarray(model.log_p(theta, points), dtype=float)
        lq = np.asarray(model.log_p(theta2, points), dtype=float)
        p = np.exp(lp)
        if np.any((p > 0) & ~np.isfinite(lq)):
            raise SupportMismatchError("p_theta puts mass where p_theta2 has none")
        mask = p > 0
        kl = float(np.sum(p[mask] * (lp[mask] - lq[mask])))
    else:
        def fn(w):
            a, b = float(model.log_p(theta, w)), float(model.log_p(theta2, w))
            if not math.isfinite(a):
                return 0.0
            if not math.isfinite(b):
                raise SupportMismatchError("p_theta puts mass where p_theta2 has none")
            return math.exp(a) * (a - b)

        kl = _quad(fn, _segments(model, theta, theta2))
    kl = max(kl, 0.0)
    if check_identity and model.canonical:
        lhs, rhs = symmetrized_kl(model, theta, theta2, check_identity=False), _kl_identity_rhs(model, theta, theta2)
        if abs(lhs - rhs) > 1e-8 * max(1.0, abs(rhs)):
            raise IdentityError(f"symmetrized KL {lhs} != {rhs}")
    return kl


def _kl_identity_rhs(model, theta, theta2) -> float:
    return (theta2 - theta) * (model.mean_stat(theta2) - model.mean_stat(theta))


def symmetrized_kl(model, theta, theta2, check_identity: bool = True) -> float:
    return (kl_divergence(model, theta, theta2, check_identity)
            + kl_divergence(model, theta2, theta, check_identity))


MODULUS_TAGS = ("location-profile", "poisson-coupling", "pinsker-expfam")


def pinsker_modulus(model: UnnormalizedModel, s) -> np.ndarray:
    """``(sqrt(2) M / 2) sqrt(s)`` with ``M`` the model's bound on ``|T|``."""
    return math.sqrt(2.0) * model.stat_bound / 2.0 * np.sqrt(np.abs(np.asarray(s, dtype=float)))


def tv_modulus_check(model: UnnormalizedModel, tag: str, thetas: Sequence[float], ss: Sequence[float],
                     tolerance: float = 1e-12) -> BoundCheckResult:
    """Check ``TV(theta, theta + s) <= c(s)`` on the product grid.

    ``location-profile`` uses ``c(s) = TV(p_0, p_s)`` and so checks equality
    up to quadrature error (tolerance 1e-10, both directions).
    """
    if tag not in MODULUS_TAGS:
        raise ValueError(f"unknown modulus tag {tag!r}")
    if tag == "location-profile" and model.name != "gaussian-location":
        raise ModelMismatchError("location-profile needs a location family")
    if tag == "poisson-coupling" and model.name != "poisson":
        raise ModelMismatchError("poisson-coupling needs the Poisson model")
    if tag == "pinsker-expfam" and not (model.canonical and model.stat_bound is not None):
        raise ModelMismatchError("pinsker-expfam needs a canonical family with bounded statistic")
    pts, lhs, rhs = [], [], []
    profile = {}
    for t in thetas:
        for s in ss:
            pts.append((float(t), float(s)))
            lhs.append(tv_distance(model, t, t + s))
            if tag == "location-profile":
                if s not in profile:
                    profile[s] = tv_distance(model, 0.0, s)
                rhs.append(profile[s])
            elif tag == "poisson-coupling":
                rhs.append(-math.expm1(-abs(s)))
            else:
                rhs.append(float(pinsker_modulus(model, s)))
    if tag == "location-profile":
        tol = max(tolerance, 1e-10)
        res = BoundCheckResult.from_sides(tag, pts, lhs, rhs, tol)
        dev = float(np.max(np.abs(np.subtract(lhs, rhs)))) if lhs else 0.0
        return BoundCheckResult(tag, pts, res.lhs, res.rhs, dev <= tol, -dev, tol, dev)
    return BoundCheckResult.from_sides(tag, pts, lhs, rhs, tolerance)


def pinsker_chain_check(model: UnnormalizedModel, pairs, tolerance: float = 1e-12) -> BoundCheckResult:
    """``TV <= 1/2 sqrt(symKL) <= (sqrt(2) M / 2) sqrt(|dtheta|)`` for every pair."""
    pts, lhs, rhs = [], [], []
    for a, b in pairs:
        tv = tv_distance(model, a, b)
        mid = 0.5 * math.sqrt(max(symmetrized_kl(model, a, b), 0.0))
        top = float(pinsker_modulus(model, b - a)) if model.stat_bound is not None else math.inf
        pts += [(a, b), (a, b)]
        lhs += [tv, mid]
        rhs += [mid, top]
    return BoundCheckResult.from_sides("pinsker-chain", pts, lhs, rhs, tolerance)


# --------------------------------------------------------------------------
# Non-negligibility
# --------------------------------------------------------------------------


def _set_probability_continuous(model, theta, theta2, log_delta) -> float:
    space: ContinuousSpace = model.sample_space
    lo, hi = space.window(theta, theta2)

    def d(w):
        return np.asarray(model.log_p(theta, w), dtype=float) - np.asarray(model.log_p(theta2, w), dtype=float) - log_delta

    ws = np.linspace(lo, hi, 20001)
    dv = d(ws)
    sign = dv > 0
    cuts = [lo]
    for k in np.flatnonzero(sign[1:] != sign[:-1]):
        cuts.append(optimize.brentq(lambda w: float(d(w)), ws[k], ws[k + 1], xtol=1e-14))
    cuts.append(hi)
    dens = _density(model, theta2)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a and d(0.5 * (a + b)) > 0:
            total += _quad(dens, [(a, b)])
    return min(1.0, total)


def negligibility_probability(model: UnnormalizedModel, theta: float, theta2: float, delta: float) -> float:
    """``P_{theta2}(p_theta(x) > delta p_theta2(x))``."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    theta, theta2 = float(theta), float(theta2)
    log_delta = math.log(delta)
    if theta == theta2:
        return 1.0
    if is_discrete(model.sample_space):
        points = model.sample_space.support([theta, theta2])
        lp = np.asarray(model.log_p(theta, points), dtype=float)
        lq = np.asarray(model.log_p(theta2, points), dtype=float)
        return float(np.sum(np.exp(lq)[lp > log_delta + lq]))
    return _set_probability_continuous(model, theta, theta2, log_delta)


def non_negligibility(model: UnnormalizedModel, delta: float, pairs) -> BoundCheckResult:
    """Grid estimate of the uniform non-negligibility constant.

    ``estimate`` is the infimum over ``pairs`` of
    ``P_{theta'}(p_theta > delta p_theta')``; the check is satisfied when the
    infimum is at least 1e-12.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    probs = [negligibility_probability(model, a, b, delta) for a, b in pairs]
    inf = float(min(probs)) if probs else math.nan
    res = BoundCheckResult.from_sides("uniform-non-negligibility", pairs, np.full(len(probs), 1e-12), probs,
                                      0.0, inf)
    return res


# --------------------------------------------------------------------------
# Tail conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    passed: bool
    alpha: Optional[float]
    x1: dict
    sides: tuple
    per_alpha: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


_TAIL_OFFSETS = np.concatenate([np.linspace(0.0, 10.0, 2001), np.geomspace(10.0, 1e4, 2000)[1:]])


def _tail_ok(logpdf, alpha, x1, sign) -> bool:
    # log pi(x) - log pi(y) >= alpha (y - x) for y > x > x1  <=>  log pi(t) + alpha t non-increasing
    ts = sign * (x1 + _TAIL_OFFSETS[1:])
    g = np.asarray(logpdf(ts), dtype=float) + alpha * sign * ts
    if not np.all(np.isfinite(g)):
        return False
    scale = 1e-9 * np.maximum(1.0, np.abs(g[:-1]))
    return bool(np.all(np.diff(g) <= scale))


def tail_condition_check(target, alpha_grid, x1_grid, support: Optional[tuple] = None) -> TailReport:
    """Search for ``(alpha, x1)`` with an exponential-or-lighter tail beyond ``x1``.

    ``target`` is a :class:`PosteriorSpec` or a log-density callable; for a
    callable ``support`` gives ``(lo, hi)``.  Each infinite end is checked
    (the left one through the mirror image ``t -> -t``); the reported
    ``alpha`` is the largest grid value that works on every side.
    """
    if isinstance(target, PosteriorSpec):
        logpdf = target.log_unnormalized
        lo, hi = target.prior.support.lo, target.prior.support.hi
    else:
        logpdf = target
        lo, hi = support if support is not None else (-math.inf, math.inf)
    sides = tuple(s for s, end in ((1, hi), (-1, lo)) if not math.isfinite(end))
    if not sides:
        return TailReport(True, math.inf, {}, sides)
    per_alpha, best, best_x1 = {}, None, {}
    for alpha in sorted(float(a) for a in alpha_grid if a > 0):
        found = {}
        for sgn in sides:
            for x1 in sorted(float(x) for x in x1_grid):
                if _tail_ok(logpdf, alpha, x1, sgn):
                    found["right" if sgn > 0 else "left"] = x1
                    break
        ok = len(found) == len(sides)
        per_alpha[alpha] = ok
        if ok:
            best, best_x1 = alpha, found
    return TailReport(best is not None, best, best_x1, sides, per_alpha)


@dataclass(frozen=True)
class ProposalTailReport:
    alpha: float
    b: float
    finite: bool
    argmax: float

    def to_dict(self) -> dict:
        return asdict(self)


def proposal_tail_check(proposal: Proposal, alpha: float, radii=None) -> ProposalTailReport:
    """Bound ``b = max_s q(s) e^{alpha s}`` over a radius grid, refined locally."""
    if proposal.log_radial is None:
        raise ModelMismatchError(f"{proposal.family} is not a one-dimensional random walk")
    rs = np.asarray(radii if radii is not None else _TAIL_OFFSETS, dtype=float)
    with np.errstate(divide="ignore"):
        g = np.asarray(proposal.log_radial(rs), dtype=float) + alpha * rs
    k = int(np.argmax(g))
    finite_g = g[np.isfinite(g)]
    tail_rising = finite_g.size > 1 and np.isfinite(g[-1]) and g[-1] >= np.max(finite_g) - 1e-12
    if tail_rising:
        return ProposalTailReport(alpha, math.inf, False, float(rs[k]))
    lo, hi = rs[max(k - 1, 0)], rs[min(k + 1, rs.size - 1)]
    s_best, g_best = float(rs[k]), float(g[k])
    if hi > lo and np.all(np.isfinite(g[max(k - 1, 0):k + 2])):
        res = optimize.minimize_scalar(lambda s: -(float(proposal.log_radial(s)) + alpha * s), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        if -res.fun > g_best:
            s_best, g_best = float(res.x), float(-res.fun)
    return ProposalTailReport(alpha, math.exp(g_best), True, s_best)


# --------------------------------------------------------------------------
# Rejection probability
# --------------------------------------------------------------------------


def _move_probability(model, posterior, proposal, theta, theta2) -> float:
    """``E_{w ~ p_theta2} min(1, a(theta, theta2, w))``, analytic when the model allows."""
    log_c = float(_log_mh_ratio(theta, theta2, posterior, proposal))
    if log_c == -math.inf:
        return 0.0
    if model.overlap is not None:
        return float(model.overlap(theta, theta2, log_c))
    c = math.exp(log_c)
    if is_discrete(model.sample_space):
        p, q = _pmfs(model, theta, theta2)
        return float(np.sum(np.minimum(q, c * p)))
    pa, pb = _density(model, theta), _density(model, theta2)
    return _quad(lambda w: min(pb(w), c * pa(w)), _segments(model, theta, theta2))


def rejection_probability(posterior: PosteriorSpec, proposal: Proposal, theta: float,
                          mass: float = 1.0 - 1e-10) -> float:
    """Exchange holding probability ``P_EX(theta, {theta})``.

    Finite parameter sets are summed exactly.  Otherwise the outer integral
    over ``theta'`` runs over the central ``mass`` interval of
    ``q(theta, .)``; the inner expectation over ``w`` uses the model's
    closed-form overlap when present.
    """
    model = posterior.model
    theta = float(theta)
    if posterior.prior.is_discrete:
        grid = np.asarray(posterior.prior.support.values)
        if isinstance(proposal, GridProposal):
            chain = ea.build_exchange_matrix(posterior, proposal)
            return float(chain.P[proposal.index(theta), proposal.index(theta)])
        move = sum(math.exp(float(proposal.log_q(theta, t))) * _move_probability(model, posterior, proposal, theta, t)
                   for t in grid if t != theta)
        return float(min(1.0, max(0.0, 1.0 - move)))
    lo, hi = posterior.prior.support.lo, posterior.prior.support.hi

    def logq(t):
        return np.asarray(proposal.log_q(theta, t), dtype=float)

    a, b = ea._mass_interval(logq, lo, hi, mass)

    def integrand(t):
        lq = float(proposal.log_q(theta, t))
        if not math.isfinite(lq):
            return 0.0
        return math.exp(lq) * _move_probability(model, posterior, proposal, theta, t)

    pts = [theta] if a < theta < b else None
    val, err = integrate.quad(integrand, a, b, points=pts, epsabs=1e-12, epsrel=1e-10, limit=500)
    if err > QUAD_TOL:
        raise QuadratureError(f"outer quadrature error {err:.3g}")
    return float(min(1.0, max(0.0, 1.0 - val)))


# --------------------------------------------------------------------------
# Output analysis
# --------------------------------------------------------------------------


def _values(trace, h) -> np.ndarray:
    states = trace.states if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    return np.asarray(h(states) if callable(h) else states, dtype=float)


def batch_means_variance(trace, h=None, batch_count: Optional[int] = None) -> float:
    """Non-overlapping batch-means estimate of the asymptotic variance.

    ``batch_count`` defaults to ``floor(sqrt(n))``; ``n`` must be at least
    ``batch_count ** 2``.  A trailing partial batch is dropped.
    """
    y = _values(trace, h)
    n = y.size
    if batch_count is None:
        batch_count = int(math.isqrt(n))
    if batch_count < 2 or n < batch_count ** 2:
        raise ValueError(f"trace of length {n} too short for {batch_count} batches")
    size = n // batch_count
    means = y[: size * batch_count].reshape(batch_count, size).mean(axis=1)
    return float(size * np.var(means, ddof=1))


@dataclass(frozen=True)
class CLTReport:
    statistic: float
    pvalue: float
    passed: bool
    degenerate: bool
    sigma2: float
    mean: float
    replications: int
    steps: int
    max_abs_scaled_sum: float

    def to_dict(self) -> dict:
        return asdict(self)


def exact_chain_for(spec: KernelSpec, threads: int = 1) -> ea.FiniteChain:
    """Exact matrix of the kernel described by ``spec`` (grid proposals only)."""
    if not isinstance(spec.proposal, GridProposal):
        raise TypeError("exact oracle needs a grid proposal")
    build = ea.build_mh_matrix if spec.algorithm == "mh" else ea.build_exchange_matrix
    chain = build(spec.posterior, spec.proposal) if spec.algorithm == "mh" else build(
        spec.posterior, spec.proposal, threads)
    return chain if spec.laziness == 1.0 else ea.lazy_matrix(chain, spec.laziness)


def clt_check(spec: KernelSpec, h, replications: int = 2000, steps: int = 10_000, seed: int = 0,
              chain: Optional[ea.FiniteChain] = None, segment: int = 1000) -> CLTReport:
    """KS test of standardized sums from stationary-start replicated chains.

    Sums ``S = sum_{i=1}^n h(X_i)`` are standardized by the exact mean and
    spectral variance of the grid chain.  When that variance vanishes the
    result is flagged ``degenerate`` instead of failing.
    """
    chain = chain or exact_chain_for(spec)
    hv = np.asarray(h(chain.grid), dtype=float)
    mean = float(chain.pi @ hv)
    sigma2 = ea.asymptotic_variance_exact(chain, hv)
    if math.isinf(sigma2):
        raise ValueError("asymptotic variance diverges on this grid")
    seeds = np.random.SeedSequence(seed).spawn(1 + -(-steps // segment))
    start = np.random.default_rng(seeds[0]).choice(chain.K, size=replications, p=chain.pi)
    theta = chain.grid[start]
    sums = np.zeros(replications)
    done, k = 0, 1
    while done < steps:
        m = min(segment, steps - done)
        path = run_chains(spec, theta, m, int(seeds[k].generate_state(1)[0]))
        sums += np.asarray(h(path[1:]), dtype=float).sum(axis=0)
        theta = path[-1]
        done += m
        k += 1
    centered = sums - steps * mean
    scaled_max = float(np.max(np.abs(centered)) / math.sqrt(steps))
    var = ea.stationary_variance(chain, hv)
    if sigma2 <= 1e-12 * max(var, 1e-300):
        return CLTReport(math.nan, math.nan, True, True, sigma2, mean, replications, steps, scaled_max)
    z = centered / math.sqrt(steps * sigma2)
    ks = stats.kstest(z, "norm")
    return CLTReport(float(ks.statistic), float(ks.pvalue), bool(ks.pvalue >= KS_ALPHA), False, sigma2, mean,
                     replications, steps, scaled_max)


def decorrelation_lag(chain: ea.FiniteChain, residual: float = 1e-3) -> int:
    """Smallest lag ``L`` with ``(1 - gap)^L <= residual``."""
    rho = 1.0 - ea.spectrum(chain).gap
    if rho <= residual:
        return 1
    if rho >= 1.0:
        raise ValueError("chain has no spectral gap")
    return int(math.ceil(math.log(residual) / math.log(rho)))


def chi_square_marginal(trace, chain: ea.FiniteChain, thin: Optional[int] = None) -> tuple:
    """Pearson chi-square of visit counts against ``chain.pi``; returns ``(stat, pvalue)``.

    Counts from a Markov chain are correlated, so the trace is thinned (by
    default at :func:`decorrelation_lag`) before comparing with the iid
    reference distribution.
    """
    thin = thin or decorrelation_lag(chain)
    states = _values(trace, None)[1::thin]
    idx = np.searchsorted(chain.grid, states)
    counts = np.bincount(idx, minlength=chain.K).astype(float)
    expected = chain.pi * counts.sum()
    res = stats.chisquare(counts, expected)
    return float(res.statistic), float(res.pvalue)


def claims_report(results: dict) -> dict:
    """Aggregate named check results into a single claims-vs-status record."""
    out = {}
    for name, res in results.items():
        d = res.to_dict() if hasattr(res, "to_dict") else res
        status = d.get("satisfied", d.get("holds", d.get("passed")))
        out[name] = {"status": "holds on tested grid" if status else "fails", "detail": d}
    return out
