"""Metropolis-Hastings, exchange and lazy transition rules.

All acceptance ratios are handled in log space.  The exchange path works
from a :class:`~exchange_mcmc.models.BlindPosterior`, which has no access
to the model normalizer; only the idealized MH baseline reads it.

Steps are vectorized over independent chains: ``theta`` may be a scalar or
an array holding one state per chain.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import special

from .models import BlindPosterior, PosteriorSpec

ALGORITHMS = ("mh", "exchange")


class UndefinedDensityError(ValueError):
    """Acceptance ratio requested at a point of zero density."""


# --------------------------------------------------------------------------
# Proposals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Proposal:
    """Proposal kernel ``q(theta, theta')``.

    ``log_q`` and ``sample`` are vectorized over chains.  Random-walk
    proposals also carry ``log_radial(s) = log q(|theta - theta'| = s)``.
    """

    family: str
    log_q: Callable
    sample: Callable
    symmetric: bool
    params: dict = field(default_factory=dict)
    log_radial: Optional[Callable] = None


def gaussian_random_walk(scale: float = 1.0) -> Proposal:
    if scale <= 0:
        raise ValueError("scale must be positive")

    const = -math.log(scale) - 0.5 * math.log(2.0 * math.pi)

    def log_radial(s):
        return const - 0.5 * np.square(np.asarray(s, dtype=float) / scale)

    def log_q(theta, theta2):
        return log_radial(np.asarray(theta2, dtype=float) - np.asarray(theta, dtype=float))

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta + scale * rng.standard_normal(theta.shape[0])

    return Proposal("random-walk-gaussian", log_q, sample, True, {"scale": scale}, log_radial)


def uniform_random_walk(half_width: float = 1.0) -> Proposal:
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    log_height = -math.log(2.0 * half_width)

    def log_radial(s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.where(s <= half_width, log_height, -np.inf)

    def log_q(theta, theta2):
        return log_radial(np.asarray(theta2, dtype=float) - np.asarray(theta, dtype=float))

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta + rng.uniform(-half_width, half_width, theta.shape[0])

    return Proposal("random-walk-uniform", log_q, sample, True, {"half_width": half_width}, log_radial)


def cauchy_random_walk(scale: float = 1.0) -> Proposal:
    """Heavy-tailed random walk, mostly useful as a negative control."""

    const = -math.log(math.pi * scale)

    def log_radial(s):
        return const - np.log1p(np.square(np.asarray(s, dtype=float) / scale))

    def log_q(theta, theta2):
        return log_radial(np.asarray(theta2, dtype=float) - np.asarray(theta, dtype=float))

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta + scale * rng.standard_cauchy(theta.shape[0])

    return Proposal("random-walk-cauchy", log_q, sample, True, {"scale": scale}, log_radial)


def gamma_independence(shape: float, rate: float) -> Proposal:
    """Independence proposal drawing from Gamma(shape, rate)."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    const = shape * math.log(rate) - special.gammaln(shape)

    def log_q(theta, theta2):
        t = np.asarray(theta2, dtype=float)
        with np.errstate(invalid="ignore"):
            val = np.where(t > 0, const + special.xlogy(shape - 1.0, t) - rate * t, -np.inf)
        return val + 0.0 * np.asarray(theta, dtype=float)

    def sample(theta, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return rng.gamma(shape, 1.0 / rate, theta.shape[0])

    return Proposal("independence", log_q, sample, False, {"shape": shape, "rate": rate})


@dataclass(frozen=True)
class GridProposal(Proposal):
    """Proposal over a finite grid given by an explicit matrix ``Q``.

    Rows of ``Q`` may sum to less than one; the missing mass is a proposal
    that falls off the grid, returned as NaN and always rejected.
    """

    grid: np.ndarray = field(default=None, repr=False)
    Q: np.ndarray = field(default=None, repr=False)

    def index(self, theta) -> np.ndarray:
        return _grid_index(self.grid, theta)


def _grid_index(grid, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    idx = np.clip(np.searchsorted(grid, theta), 0, len(grid) - 1)
    if not np.all(grid[idx] == theta):
        raise ValueError("state is not a grid point")
    return idx


def _grid_proposal(grid, Q, family, params) -> GridProposal:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    Q = np.asarray(Q, dtype=float)
    cdf = np.cumsum(Q, axis=1)

    def log_q(theta, theta2):
        theta2 = np.asarray(theta2, dtype=float)
        i = _grid_index(grid, theta)
        ok = np.isfinite(theta2)
        j = np.clip(np.searchsorted(grid, np.where(ok, theta2, grid[0])), 0, len(grid) - 1)
        on_grid = ok & (grid[j] == theta2)
        with np.errstate(divide="ignore"):
            return np.where(on_grid, np.log(Q[i, j]), -np.inf)

    def sample(theta, rng):
        i = _grid_index(grid, np.atleast_1d(theta))
        u = rng.random(i.shape[0])
        j = (cdf[i] <= u[:, None]).sum(axis=1)
        out = np.full(i.shape[0], np.nan)
        hit = j < len(grid)
        out[hit] = grid[j[hit]]
        return out

    return GridProposal(family, log_q, sample, bool(np.allclose(Q, Q.T, atol=1e-15)), params, None, grid, Q)


def grid_uniform(grid, include_self: bool = True) -> GridProposal:
    """Independence proposal, uniform over the grid points."""
    K = len(grid)
    if include_self:
        Q = np.full((K, K), 1.0 / K)
    else:
        Q = (np.ones((K, K)) - np.eye(K)) / (K - 1)
    return _grid_proposal(grid, Q, "discrete-uniform", {"include_self": include_self})


def grid_random_walk(grid, k: int = 1) -> GridProposal:
    """Uniform move to one of the ``2k`` neighbours within ``k`` grid steps."""
    K = len(grid)
    if k < 1:
        raise ValueError("k must be >= 1")
    offsets = np.abs(np.subtract.outer(np.arange(K), np.arange(K)))
    Q = np.where((offsets >= 1) & (offsets <= k), 1.0 / (2 * k), 0.0)
    return _grid_proposal(grid, Q, "random-walk-grid", {"k": k})


def grid_matrix_proposal(grid, Q, family: str = "discrete-uniform") -> GridProposal:
    return _grid_proposal(grid, Q, family, {})


# --------------------------------------------------------------------------
# Kernel specification and acceptance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    algorithm: str
    proposal: Proposal
    posterior: PosteriorSpec
    laziness: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not (0.0 < self.laziness <= 1.0):
            raise ValueError(f"laziness must lie in (0, 1], got {self.laziness}")


def _log_mh_ratio(theta, theta2, posterior: PosteriorSpec, proposal: Proposal):
    """Idealized log MH ratio; reads the model normalizer.  ``-inf`` off support."""
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    lp_cur = posterior.log_unnormalized(theta)
    if np.any(~np.isfinite(lp_cur)):
        raise UndefinedDensityError("posterior density is zero at the current state")
    lp_new = posterior.log_unnormalized(np.where(np.isfinite(theta2), theta2, np.inf))
    ok = np.isfinite(lp_new)
    out = np.full(np.broadcast(theta, theta2).shape, -np.inf)
    if np.any(ok):
        t1 = np.broadcast_to(theta, out.shape)[ok]
        t2 = np.broadcast_to(theta2, out.shape)[ok]
        out[ok] = (np.broadcast_to(lp_new, out.shape)[ok] - np.broadcast_to(lp_cur, out.shape)[ok]
                   + proposal.log_q(t2, t1) - proposal.log_q(t1, t2))
    return out


def mh_acceptance(theta, theta2, posterior: PosteriorSpec, proposal: Proposal) -> float:
    """``min(1, q(theta', theta) pi(theta'|x) / (q(theta, theta') pi(theta|x)))`` with the exact normalizer."""
    return float(min(1.0, math.exp(min(0.0, float(_log_mh_ratio(theta, theta2, posterior, proposal))))))


def _as_blind(posterior) -> BlindPosterior:
    return posterior if isinstance(posterior, BlindPosterior) else posterior.blind()


def log_exchange_ratio(theta, theta2, w, posterior, proposal: Proposal):
    """Log of the exchange ratio ``a(theta, theta', w)``.

    Arguments broadcast over chains.  Proposals outside the prior support
    give ``-inf``; an undefined ratio at a valid proposal raises.
    """
    blind = _as_blind(posterior)
    lik = blind.likelihood
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    lpr_cur = np.asarray(blind.prior.log_density(theta))
    if np.any(~np.isfinite(lpr_cur)):
        raise UndefinedDensityError("prior density is zero at the current state")
    lpr_new = np.asarray(blind.prior.log_density(np.where(np.isfinite(theta2), theta2, np.inf)))
    with np.errstate(divide="ignore", invalid="ignore"):
        lf_cur_x = lik.log_f(theta, blind.data)
        lf_cur_w = lik.log_f(theta, w)
        lf_new_x = lik.log_f(theta2, blind.data)
        lf_new_w = lik.log_f(theta2, w)
    if np.any(~np.isfinite(lf_cur_x)):
        raise UndefinedDensityError("f_theta(x) = 0 at the current state")
    ok = np.isfinite(lpr_new)
    if np.any(ok & ~np.isfinite(np.broadcast_to(lf_new_w, ok.shape))):
        raise UndefinedDensityError("f_theta'(w) = 0 for the auxiliary draw")
    with np.errstate(invalid="ignore"):
        num = lpr_new + proposal.log_q(theta2, theta) + lf_new_x + lf_cur_w
        den = lpr_cur + proposal.log_q(theta, theta2) + lf_cur_x + lf_new_w
        out = np.where(ok, num - den, -np.inf)
    return np.where(np.isnan(out), -np.inf, out)


def exchange_acceptance(theta, theta2, w, posterior, proposal: Proposal) -> float:
    """``min(1, a(theta, theta', w))`` computed without the model normalizer."""
    la = float(log_exchange_ratio(theta, theta2, w, posterior, proposal))
    return math.exp(min(0.0, la))


# --------------------------------------------------------------------------
# Stepping and chains
# --------------------------------------------------------------------------


class StepResult(NamedTuple):
    theta: np.ndarray
    accepted: np.ndarray
    held: np.ndarray
    aux: object


def _draw_aux(likelihood, proposals, valid, rng):
    if not np.any(valid):
        return None
    return likelihood.sample(proposals[valid], rng)


def step(spec: KernelSpec, theta, rng) -> StepResult:
    """Advance every chain in ``theta`` by one transition.

    Random numbers are consumed in a fixed order (lazy coin, proposal,
    auxiliary draw, acceptance uniform) that does not depend on the laziness,
    so a lazy run and a non-lazy run on the same seed agree on every step the
    lazy run does not hold.  ``r <= a`` counts as acceptance.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    n = theta.shape[0]
    coin = rng.random(n)
    prop = spec.proposal.sample(theta, rng)
    aux = None
    if spec.algorithm == "exchange":
        blind = spec.posterior.blind()
        valid = np.isfinite(np.asarray(blind.prior.log_density(np.where(np.isfinite(prop), prop, np.inf))))
        valid = np.atleast_1d(valid)
        w_valid = _draw_aux(blind.likelihood, prop, valid, rng)
        log_a = np.full(n, -np.inf)
        if w_valid is not None:
            log_a[valid] = log_exchange_ratio(theta[valid], prop[valid], w_valid, blind, spec.proposal)
            aux = (valid, w_valid)
    else:
        log_a = np.atleast_1d(_log_mh_ratio(theta, prop, spec.posterior, spec.proposal))
    r = rng.random(n)
    with np.errstate(divide="ignore"):
        accept = np.log(r) <= log_a
    held = coin >= spec.laziness
    moved = accept & ~held
    return StepResult(np.where(moved, prop, theta), moved, held, aux)


@dataclass
class Trace:
    """Output of :func:`run_chain`: ``steps + 1`` states and per-step flags."""

    states: np.ndarray
    accepted: np.ndarray
    held: np.ndarray
    seed: int
    aux: Optional[list] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != len(self.accepted) + 1 or len(self.held) != len(self.accepted):
            raise ValueError("trace arrays have inconsistent lengths")

    @property
    def steps(self) -> int:
        return len(self.accepted)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "theta", "accepted", "held"])
            writer.writerow([0, repr(float(self.states[0])), 0, 0])
            for k in range(self.steps):
                writer.writerow([k + 1, repr(float(self.states[k + 1])), int(self.accepted[k]), int(self.held[k])])

    def sidecar(self) -> dict:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return {"seed": self.seed, "steps": self.steps, "config_sha256": hashlib.sha256(blob).hexdigest()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.seed == other.seed and np.array_equal(self.states, other.states)
                and np.array_equal(self.accepted, other.accepted) and np.array_equal(self.held, other.held))


def read_trace_csv(path) -> dict:
    """Columns of a trace CSV as numpy arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: data[name] for name in data.dtype.names}


def run_chains(spec: KernelSpec, theta0, steps: int, seed: int) -> np.ndarray:
    """Run independent chains in lockstep; returns states of shape ``(steps + 1, n_chains)``.

    Grid proposals over discrete sample spaces run on precomputed tables;
    everything else goes through :func:`step`.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    if tabulable(spec):
        tab, idx, _, _, _ = _run_tabulated(spec, spec.proposal.index(theta), steps, rng, False)
        return tab.grid[idx]
    out = np.empty((steps + 1, theta.shape[0]))
    out[0] = theta
    for t in range(steps):
        theta = step(spec, theta, rng).theta
        out[t + 1] = theta
    return out


def run_chain(spec: KernelSpec, theta0: float, steps: int, seed: int, keep_aux: bool = False,
              config: Optional[dict] = None) -> Trace:
    """Run a single chain; identical seeds give identical traces.

    Grid proposals over discrete sample spaces use the tabulated fast path,
    which draws four uniforms per step (lazy coin, proposal, auxiliary
    variable, acceptance) in blocks.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    if tabulable(spec):
        i0 = int(spec.proposal.index(float(theta0)))
        tab, idx, accepted, held, aux_idx = _run_tabulated_scalar(spec, i0, steps, rng, keep_aux)
        aux = None
        if keep_aux:
            aux = [tab.points[s] if s >= 0 else None for s in aux_idx] if tab.exchange else [None] * steps
        return Trace(tab.grid[idx], accepted, held, seed, aux, config or {})
    states = np.empty(steps + 1)
    accepted = np.zeros(steps, dtype=bool)
    held = np.zeros(steps, dtype=bool)
    aux = [] if keep_aux else None
    theta = np.array([float(theta0)])
    states[0] = theta[0]
    for t in range(steps):
        res = step(spec, theta, rng)
        theta = res.theta
        states[t + 1] = theta[0]
        accepted[t] = res.accepted[0]
        held[t] = res.held[0]
        if keep_aux:
            aux.append(None if res.aux is None else res.aux[1][0])
    return Trace(states, accepted, held, seed, aux, config or {})


# --------------------------------------------------------------------------
# Tabulated fast path: grid proposals over discrete sample spaces
# --------------------------------------------------------------------------


class _Tables:
    """Per-grid-point lookup tables for one kernel.

    ``base[i, j]`` is the log acceptance ratio without the auxiliary term;
    for the exchange rule it is assembled from the prior, proposal and
    ``log f(x)`` only, and ``lfw`` / ``wcdf`` hold ``log f`` and the exact
    sampler's cumulative masses over the enumerated sample space.
    """

    def __init__(self, spec: KernelSpec):
        prop = spec.proposal
        grid = prop.grid
        self.grid = grid
        self.K = len(grid)
        self.exchange = spec.algorithm == "exchange"
        self.laziness = spec.laziness
        self.qcdf = np.cumsum(prop.Q, axis=1)
        with np.errstate(divide="ignore"):
            logq = np.log(prop.Q)
        if self.exchange:
            blind = spec.posterior.blind()
            lik = blind.likelihood
            lp = np.asarray(blind.prior.log_density(grid), dtype=float)
            lfx = np.asarray(lik.log_f(grid, blind.data), dtype=float)
            target = lp + lfx
            self.points = lik.sample_space.support(grid[np.isfinite(lp)])
            self.lfw = np.asarray(lik.log_f(grid[:, None], self.points), dtype=float)
            rows = self.lfw - self.lfw.max(axis=1, keepdims=True)
            self.wcdf = np.cumsum(np.exp(rows), axis=1)
            self.wcdf /= self.wcdf[:, -1:]
        else:
            target = np.asarray(spec.posterior.log_unnormalized(grid), dtype=float)
        with np.errstate(invalid="ignore"):
            base = target[None, :] - target[:, None] + logq.T - logq
        self.valid = np.isfinite(target)
        self.base = np.where(self.valid[None, :] & (prop.Q > 0), base, -np.inf)


def tabulable(spec: KernelSpec) -> bool:
    from .models import is_discrete

    return isinstance(spec.proposal, GridProposal) and (
        spec.algorithm == "mh" or is_discrete(spec.posterior.model.sample_space))


def _run_tabulated(spec: KernelSpec, i0: np.ndarray, steps: int, rng, keep_aux: bool):
    """Lockstep chains over grid indices; returns index paths and flags."""
    tab = _Tables(spec)
    n = i0.shape[0]
    idx = np.empty((steps + 1, n), dtype=np.int64)
    accepted = np.zeros((steps, n), dtype=bool)
    held = np.zeros((steps, n), dtype=bool)
    aux = np.full((steps, n), -1, dtype=np.int64) if keep_aux else None
    idx[0] = i = i0
    block = max(1, (1 << 20) // (4 * n))
    K = tab.K
    for start in range(0, steps, block):
        m = min(block, steps - start)
        u = rng.random((m, n, 4))
        for t in range(m):
            coin, up, uw, r = u[t, :, 0], u[t, :, 1], u[t, :, 2], u[t, :, 3]
            j = (tab.qcdf[i] <= up[:, None]).sum(axis=1)
            on = j < K
            jj = np.where(on, j, i)
            log_a = np.where(on, tab.base[i, jj], -np.inf)
            if tab.exchange:
                s = (tab.wcdf[jj] <= uw[:, None]).sum(axis=1)
                s = np.minimum(s, tab.wcdf.shape[1] - 1)
                with np.errstate(invalid="ignore"):
                    log_a = log_a + tab.lfw[i, s] - tab.lfw[jj, s]
                if keep_aux:
                    aux[start + t] = np.where(on & tab.valid[jj], s, -1)
            log_a = np.where(np.isnan(log_a), -np.inf, log_a)
            with np.errstate(divide="ignore"):
                acc = (np.log(r) <= log_a) & on
            h = coin >= tab.laziness
            mv = acc & ~h
            i = np.where(mv, jj, i)
            idx[start + t + 1] = i
            accepted[start + t] = mv
            held[start + t] = h
    return tab, idx, accepted, held, aux


def _run_tabulated_scalar(spec: KernelSpec, i0: int, steps: int, rng, keep_aux: bool):
    """Single-chain version of :func:`_run_tabulated` with scalar bookkeeping."""
    from bisect import bisect_right

    tab = _Tables(spec)
    K = tab.K
    qcdf = tab.qcdf.tolist()
    base = tab.base.tolist()
    exchange = tab.exchange
    if exchange:
        wcdf = tab.wcdf.tolist()
        lfw = tab.lfw.tolist()
        last = tab.wcdf.shape[1] - 1
    lam = tab.laziness
    idx = np.empty(steps + 1, dtype=np.int64)
    accepted = np.zeros(steps, dtype=bool)
    held = np.zeros(steps, dtype=bool)
    aux = np.full(steps, -1, dtype=np.int64) if keep_aux else None
    i = int(i0)
    idx[0] = i
    log = math.log
    ninf = -math.inf
    t = 0
    while t < steps:
        m = min(1 << 16, steps - t)
        u = rng.random((m, 4)).tolist()
        acc_blk = [False] * m
        held_blk = [False] * m
        idx_blk = [0] * m
        aux_blk = [-1] * m
        for k in range(m):
            coin, up, uw, r = u[k]
            if coin >= lam:
                held_blk[k] = True
                idx_blk[k] = i
                continue
            j = bisect_right(qcdf[i], up)
            if j >= K:
                idx_blk[k] = i
                continue
            la = base[i][j]
            if exchange and la != ninf:
                s = min(bisect_right(wcdf[j], uw), last)
                aux_blk[k] = s
                la = la + lfw[i][s] - lfw[j][s]
            if la == la and r > 0.0 and log(r) <= la:
                i = j
                acc_blk[k] = True
            idx_blk[k] = i
        idx[t + 1:t + 1 + m] = idx_blk
        accepted[t:t + m] = acc_blk
        held[t:t + m] = held_blk
        if keep_aux:
            aux[t:t + m] = aux_blk
        t += m
    return tab, idx, accepted, held, aux
