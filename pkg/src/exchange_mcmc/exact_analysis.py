"""Exact transition matrices, spectra and asymptotic variances on finite grids.

For a continuous parameter the chains built here are grid surrogates: the
posterior is restricted to a uniform grid with trapezoidal weights and the
proposal is a grid proposal.  Spectra reported for such chains describe the
surrogate, not the continuum operator.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .kernels import GridProposal, KernelSpec, _Tables, log_exchange_ratio
from .models import (BudgetError, ContinuousSpace, PosteriorSpec, is_discrete)

DEFAULT_GRID_SIZE = 101
MAX_GRID_SIZE = 2001
MAX_SAMPLE_POINTS = 1 << 20
DIVERGENT = math.inf


class NonReversibleError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic matrix over a parameter grid with its stationary vector."""

    grid: np.ndarray
    P: np.ndarray
    pi: np.ndarray
    weights: Optional[np.ndarray] = None
    label: str = ""

    @property
    def K(self) -> int:
        return len(self.grid)

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.P.sum(axis=1) - 1.0)))

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.pi @ self.P - self.pi)))

    def reversibility_residual(self) -> float:
        flow = self.pi[:, None] * self.P
        return float(np.max(np.abs(flow - flow.T)))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "grid": self.grid.tolist(),
            "P": self.P.tolist(),
            "pi": self.pi.tolist(),
            "weights": None if self.weights is None else self.weights.tolist(),
        }

    def dump_csv(self, path) -> None:
        np.savetxt(path, self.P, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    m: float
    M: float
    gap: float
    stationary_index: int = field(repr=False, default=0)
    eigenvectors: Optional[np.ndarray] = field(repr=False, default=None, compare=False)

    @property
    def mean_zero(self) -> np.ndarray:
        return np.delete(self.eigenvalues, self.stationary_index)

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "m": self.m, "M": self.M, "gap": self.gap}


# --------------------------------------------------------------------------
# Discretization
# --------------------------------------------------------------------------


def _mass_interval(logpdf, lo: float, hi: float, mass: float) -> tuple:
    a = lo if math.isfinite(lo) else (-1e3 if not math.isfinite(hi) else hi - 1e3)
    b = hi if math.isfinite(hi) else a + 2e3 if not math.isfinite(lo) else lo + 1e3
    for _ in range(3):
        ts = np.linspace(a, b, 20001)
        lv = logpdf(ts)
        keep = np.flatnonzero(lv > np.max(lv) - 60.0)
        step_ = ts[1] - ts[0]
        a = max(lo, ts[keep[0]] - step_)
        b = min(hi, ts[keep[-1]] + step_)
    ts = np.linspace(a, b, 200001)
    dens = np.exp(logpdf(ts) - np.max(logpdf(ts)))
    cdf = integrate.cumulative_trapezoid(dens, ts, initial=0.0)
    cdf /= cdf[-1]
    tail = 0.5 * (1.0 - mass)
    return float(np.interp(tail, cdf, ts)), float(np.interp(1.0 - tail, cdf, ts))


def discretize_posterior(posterior: PosteriorSpec, K: int = DEFAULT_GRID_SIZE, interval=None,
                         mass: float = 0.9999) -> PosteriorSpec:
    """Restrict a posterior to a uniform ``K``-point grid.

    Discrete priors are returned unchanged.  Otherwise the grid spans
    ``interval`` (default: central ``mass`` posterior interval) and the prior
    becomes a discrete prior with masses ``prior(theta_k) * w_k`` for
    trapezoidal weights ``w_k``.
    """
    if posterior.prior.is_discrete:
        return posterior
    if not (2 <= K <= MAX_GRID_SIZE):
        raise BudgetError(f"grid size must lie in [2, {MAX_GRID_SIZE}], got {K}")
    if interval is None:
        interval = _mass_interval(posterior.log_unnormalized, posterior.prior.support.lo,
                                  posterior.prior.support.hi, mass)
    grid = np.linspace(interval[0], interval[1], K)
    weights = np.full(K, grid[1] - grid[0])
    weights[[0, -1]] *= 0.5
    return PosteriorSpec(posterior.model, posterior.prior.discretize(grid, weights), posterior.data)


def _grid_target(posterior: PosteriorSpec, proposal: GridProposal):
    if not isinstance(proposal, GridProposal):
        raise TypeError("exact matrices need a GridProposal")
    grid = proposal.grid
    if len(grid) > MAX_GRID_SIZE:
        raise BudgetError(f"grid of {len(grid)} points exceeds the cap of {MAX_GRID_SIZE}")
    lp = np.asarray(posterior.log_unnormalized(grid), dtype=float)
    if not np.all(np.isfinite(lp)):
        bad = grid[~np.isfinite(lp)]
        raise ValueError(f"grid states with zero posterior mass: {bad[:5].tolist()}")
    pi = np.exp(lp - lp.max())
    return grid, pi / pi.sum()


def _finish(grid, off, pi, label, weights=None) -> FiniteChain:
    P = off.copy()
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, np.clip(1.0 - P.sum(axis=1), 0.0, 1.0))
    return FiniteChain(np.asarray(grid, dtype=float), P, pi, weights, label)


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------


def build_mh_matrix(posterior: PosteriorSpec, proposal: GridProposal) -> FiniteChain:
    """Idealized MH kernel on the proposal's grid."""
    grid, pi = _grid_target(posterior, proposal)
    Q = proposal.Q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (pi[None, :] * Q.T) / (pi[:, None] * Q)
    off = np.where(Q > 0, Q * np.minimum(1.0, np.nan_to_num(ratio, nan=0.0, posinf=np.inf)), 0.0)
    return _finish(grid, off, pi, "mh")


def _exchange_row_discrete(i, tab, Q, logp):
    cols = np.flatnonzero(Q[i] > 0)
    cols = cols[cols != i]
    row = np.zeros(tab.K)
    if cols.size == 0:
        return row
    # log a(theta_i, theta_j, w) for every proposed j and every enumerated w
    la = tab.base[i, cols][:, None] + tab.lfw[i][None, :] - tab.lfw[cols]
    acc = np.exp(np.minimum(0.0, np.nan_to_num(la, nan=-np.inf)))
    row[cols] = Q[i, cols] * np.sum(np.exp(logp[cols]) * acc, axis=1)
    return row


def _exchange_row_continuous(i, grid, Q, model, blind, proposal):
    cols = np.flatnonzero(Q[i] > 0)
    cols = cols[cols != i]
    row = np.zeros(len(grid))
    if cols.size == 0:
        return row
    space: ContinuousSpace = model.sample_space
    lo, hi = space.window(grid[i], *grid[cols])
    t_cols = grid[cols]
    log_z = np.asarray(model.log_Z(t_cols), dtype=float)

    def integrand(w):
        la = log_exchange_ratio(grid[i], t_cols, w, blind, proposal)
        return np.exp(model.log_f(t_cols, w) - log_z) * np.exp(np.minimum(0.0, la))

    kinks = sorted({k for j in cols for k in space.kinks(grid[i], grid[j]) if lo < k < hi})
    edges = [lo, *kinks, hi]
    total = np.zeros(cols.size)
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad_vec(integrand, a, b, epsabs=space.epsabs, epsrel=1e-12, limit=400)
        total += val
    row[cols] = Q[i, cols] * total
    return row


def build_exchange_matrix(posterior: PosteriorSpec, proposal: GridProposal, threads: int = 1) -> FiniteChain:
    """Exact exchange kernel: ``P_ij = q_ij E_{w ~ p_j} min(1, a(theta_i, theta_j, w))``.

    The expectation is a sum over the enumerated sample space, or an adaptive
    quadrature for a one-dimensional continuum.  Rows are independent and can
    be computed on ``threads`` worker threads.
    """
    grid, pi = _grid_target(posterior, proposal)
    model = posterior.model
    blind = posterior.blind()
    Q = proposal.Q
    if is_discrete(model.sample_space):
        points = model.sample_space.support(grid)
        if len(points) > MAX_SAMPLE_POINTS:
            raise BudgetError(f"sample space of {len(points)} points exceeds the enumeration cap")
        # acceptance tables come from the Z-blind view; p_j itself is exact
        tab = _Tables(KernelSpec("exchange", proposal, posterior))
        logp = np.asarray(model.log_f(grid[:, None], points), dtype=float) - np.asarray(
            model.log_Z(grid), dtype=float)[:, None]
        work = lambda i: _exchange_row_discrete(i, tab, Q, logp)  # noqa: E731
    else:
        work = lambda i: _exchange_row_continuous(i, grid, Q, model, blind, proposal)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(len(grid))))
    else:
        rows = [work(i) for i in range(len(grid))]
    return _finish(grid, np.array(rows), pi, "exchange")


def build_pair(posterior: PosteriorSpec, proposal: GridProposal, threads: int = 1) -> tuple:
    """``(mh_chain, exchange_chain)`` on the same grid."""
    return build_mh_matrix(posterior, proposal), build_exchange_matrix(posterior, proposal, threads)


def lazy_matrix(chain: FiniteChain, lam: float) -> FiniteChain:
    """``lam * P + (1 - lam) * I``; the stationary vector is unchanged."""
    if not (0.0 < lam < 1.0):
        raise ValueError(f"laziness must lie strictly between 0 and 1, got {lam}")
    P = lam * chain.P + (1.0 - lam) * np.eye(chain.K)
    return FiniteChain(chain.grid, P, chain.pi, chain.weights, f"lazy({chain.label},{lam:g})")


# --------------------------------------------------------------------------
# Spectra and variances
# --------------------------------------------------------------------------


def _symmetrized(chain: FiniteChain, tol: float = 1e-10) -> np.ndarray:
    if chain.reversibility_residual() > tol:
        raise NonReversibleError(
            f"chain {chain.label!r} is not reversible (residual {chain.reversibility_residual():.3g})")
    d = np.sqrt(chain.pi)
    S = chain.P * d[:, None] / d[None, :]
    return 0.5 * (S + S.T)


def spectrum(chain: FiniteChain) -> SpectrumReport:
    """Eigenvalues via the symmetrization ``D^{1/2} P D^{-1/2}``.

    ``m`` and ``M`` are the extreme eigenvalues once the stationary
    eigenvector (the one aligned with ``sqrt(pi)``) is removed.
    """
    S = _symmetrized(chain)
    evals, evecs = np.linalg.eigh(S)
    stat = int(np.argmax(np.abs(evecs.T @ np.sqrt(chain.pi))))
    rest = np.delete(evals, stat)
    if rest.size == 0:
        m = M = 0.0
        gap = 1.0
    else:
        m, M = float(rest.min()), float(rest.max())
        gap = float(1.0 - np.max(np.abs(rest)))
    return SpectrumReport(evals, m, M, gap, stat, evecs)


def _as_grid_function(chain: FiniteChain, h) -> np.ndarray:
    return np.asarray(h(chain.grid) if callable(h) else h, dtype=float)


def asymptotic_variance_exact(chain: FiniteChain, h, spec: Optional[SpectrumReport] = None) -> float:
    """``sum (1 + lam) / (1 - lam) <h, v>_pi^2`` over the mean-zero eigenbasis.

    ``h`` (array over the grid, or callable) is centered under ``pi`` first.
    Returns :data:`DIVERGENT` when a mean-zero eigenvalue lies within 1e-12
    of 1, unless ``h`` is constant.
    """
    spec = spec or spectrum(chain)
    hv = _as_grid_function(chain, h)
    hc = hv - chain.pi @ hv
    scale = max(1.0, float(np.max(np.abs(hv))))
    if np.max(np.abs(hc)) <= 1e-14 * scale:
        return 0.0
    if spec.mean_zero.size and spec.M >= 1.0 - 1e-12:
        return DIVERGENT
    coef = spec.eigenvectors.T @ (np.sqrt(chain.pi) * hc)
    lam = np.delete(spec.eigenvalues, spec.stationary_index)
    coef = np.delete(coef, spec.stationary_index)
    return float(np.sum((1.0 + lam) / (1.0 - lam) * coef ** 2))


def stationary_variance(chain: FiniteChain, h) -> float:
    hv = _as_grid_function(chain, h)
    hc = hv - chain.pi @ hv
    return float(chain.pi @ hc ** 2)


# --------------------------------------------------------------------------
# Comparisons
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PeskunReport:
    holds: bool
    offdiag_margin: float
    diag_margin: float
    violations: int

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same_grid(a: FiniteChain, b: FiniteChain) -> None:
    if a.K != b.K or not np.array_equal(a.grid, b.grid):
        raise GridMismatchError("chains live on different grids")
    if np.max(np.abs(a.pi - b.pi)) > 1e-10:
        raise GridMismatchError("chains have different stationary vectors")


def peskun_compare(mh: FiniteChain, ex: FiniteChain, tol: float = 1e-12) -> PeskunReport:
    """Off-diagonal ``ex <= mh`` and diagonal ``ex >= mh`` entrywise.

    Margins are the smallest ``mh - ex`` off the diagonal and the smallest
    ``ex - mh`` on it.
    """
    _check_same_grid(mh, ex)
    off = ~np.eye(mh.K, dtype=bool)
    d_off = (mh.P - ex.P)[off]
    d_diag = np.diag(ex.P) - np.diag(mh.P)
    violations = int(np.sum(d_off < -tol) + np.sum(d_diag < -tol))
    off_margin = float(d_off.min()) if d_off.size else 0.0
    return PeskunReport(violations == 0, off_margin, float(d_diag.min()), violations)


@dataclass(frozen=True)
class SandwichReport:
    sigma2_mh: float
    sigma2_ex: float
    upper: float
    m_mh: float
    M_ex: float
    left_ok: bool
    right_ok: Optional[bool]
    mode: str

    @property
    def holds(self) -> bool:
        return self.left_ok and self.right_ok is not False

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(self).items()} | {
            "holds": self.holds}


def variance_sandwich_check(mh: FiniteChain, ex: FiniteChain, h, rel_tol: float = 1e-10) -> SandwichReport:
    """Check ``s2(MH) <= s2(EX) <= (1-m)/(1+m) * 2/(1-M) * s2(MH)``.

    ``m`` is the bottom of the MH mean-zero spectrum and ``M`` the top of the
    exchange one.  When ``s2(MH)`` vanishes only the left inequality is
    meaningful and the report is in ``"left-only"`` mode.
    """
    _check_same_grid(mh, ex)
    sm, se = spectrum(mh), spectrum(ex)
    s2_mh = asymptotic_variance_exact(mh, h, sm)
    s2_ex = asymptotic_variance_exact(ex, h, se)
    var = stationary_variance(mh, h)
    tiny = 1e-14 * max(1.0, var)
    left_ok = s2_mh <= s2_ex * (1.0 + rel_tol) + tiny
    if s2_mh <= 1e-12 * max(var, 1e-300) or var == 0.0:
        return SandwichReport(s2_mh, s2_ex, DIVERGENT, sm.m, se.M, left_ok, None, "left-only")
    if sm.m <= -1.0 + 1e-12 or se.M >= 1.0 - 1e-12:
        upper = DIVERGENT
    else:
        upper = (1.0 - sm.m) / (1.0 + sm.m) * 2.0 / (1.0 - se.M) * s2_mh
    right_ok = s2_ex <= upper * (1.0 + rel_tol) + tiny
    return SandwichReport(s2_mh, s2_ex, upper, sm.m, se.M, left_ok, right_ok, "full")


@dataclass(frozen=True)
class PositivityReport:
    condition: str
    holds: bool
    min_diagonal: float
    m: float
    bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def positivity_check(chain: FiniteChain, condition: str, tol: float = 1e-10) -> PositivityReport:
    """Spectral lower bounds.

    ``"min-diagonal"``: with ``c = min_i P_ii``, require ``m >= 2c - 1``.
    ``"independence-proposal"``: require the mean-zero spectrum to be ``>= 0``.
    """
    sp = spectrum(chain)
    c = float(np.min(np.diag(chain.P)))
    m = float(sp.eigenvalues.min()) if sp.mean_zero.size == 0 else sp.m
    if condition == "min-diagonal":
        bound = 2.0 * c - 1.0
    elif condition == "independence-proposal":
        bound = 0.0
    else:
        raise ValueError(f"unknown positivity condition {condition!r}")
    return PositivityReport(condition, bool(m >= bound - tol), c, m, bound)
