"""Command-line experiment runner.

One YAML file describes one experiment: model, prior, data, proposal,
kernel, run length and the checks to evaluate.  ``run`` executes config
files, ``reproduce`` executes a built-in experiment and ``list`` prints the
catalog.  Each experiment writes ``trace.csv``, ``report.json`` and
``summary.txt`` into its own directory under ``--out-dir``.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import datetime as _dt
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import diagnostics as dg
from . import exact_analysis as ea
from . import kernels as kn
from . import models as md

ALGORITHM_CHOICES = ("mh", "exchange", "both")
CHECKS = ("peskun", "variance-sandwich", "tv-modulus", "non-negligibility", "tail", "clt", "rejection-prob",
          "spectrum")
GRID_PROPOSALS = ("grid-uniform", "grid-random-walk", "swap")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    name: str
    model: dict
    prior: dict
    proposal: dict
    data: object = None
    algorithm: str = "exchange"
    laziness: float = 1.0
    steps: int = 10_000
    replications: int = 0
    seed: int = 0
    checks: list = field(default_factory=list)
    grid: Optional[dict] = None
    theta0: Optional[float] = None
    check_params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return copy.deepcopy(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        for key in ("name", "model", "prior", "proposal"):
            if key not in raw:
                raise ConfigError(key, "required field missing")
        cfg = cls(**copy.deepcopy(raw))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("name", "must be a non-empty string")
        for key in ("model", "prior", "proposal"):
            block = getattr(self, key)
            if not isinstance(block, dict) or "family" not in block:
                raise ConfigError(f"{key}.family", "required field missing")
            builders = {"model": MODEL_BUILDERS, "prior": PRIOR_BUILDERS, "proposal": PROPOSAL_BUILDERS}[key]
            if block["family"] not in builders:
                raise ConfigError(f"{key}.family", f"unknown family {block['family']!r}")
        if self.algorithm not in ALGORITHM_CHOICES:
            raise ConfigError("algorithm", f"must be one of {ALGORITHM_CHOICES}")
        if not (0.0 < float(self.laziness) <= 1.0):
            raise ConfigError("laziness", "must lie in (0, 1]")
        for key in ("steps", "replications"):
            val = getattr(self, key)
            if not isinstance(val, int) or isinstance(val, bool) or val < 0:
                raise ConfigError(key, "must be a non-negative integer")
        if not isinstance(self.seed, int) or not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed", "must be a 64-bit non-negative integer")
        if not isinstance(self.checks, list):
            raise ConfigError("checks", "must be a list")
        for k, c in enumerate(self.checks):
            if c not in CHECKS:
                raise ConfigError(f"checks[{k}]", f"unknown check {c!r}")
        if self.grid is not None:
            if not isinstance(self.grid, dict) or set(self.grid) - {"K", "interval"}:
                raise ConfigError("grid", "expects keys K and interval")
            if "K" in self.grid and not (2 <= int(self.grid["K"]) <= ea.MAX_GRID_SIZE):
                raise ConfigError("grid.K", f"must lie in [2, {ea.MAX_GRID_SIZE}]")
        if not isinstance(self.check_params, dict):
            raise ConfigError("check_params", "must be a mapping")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(text))


# --------------------------------------------------------------------------
# Builders from config blocks
# --------------------------------------------------------------------------


def _params(block: dict, path: str, allowed: dict) -> dict:
    out = {}
    for key in block:
        if key != "family" and key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown parameter")
    for key, default in allowed.items():
        if key in block:
            out[key] = block[key]
        elif default is _REQUIRED:
            raise ConfigError(f"{path}.{key}", "required parameter missing")
        else:
            out[key] = default
    return out


_REQUIRED = object()


def _square_lattice(side: int) -> list:
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append([v, v + 1, 1.0])
            if r + 1 < side:
                edges.append([v, v + side, 1.0])
    return edges


def _build_model(block):
    fam = block["family"]
    if fam == "two-point":
        _params(block, "model", {})
        model, prior, _ = md.make_two_point_bernoulli()
        return model, prior
    if fam == "beta-binomial":
        p = _params(block, "model", {"n": _REQUIRED, "theta1": _REQUIRED, "theta2": _REQUIRED, "a": 1.0, "b": 1.0})
        return md.make_beta_binomial(int(p["n"]), p["theta1"], p["theta2"], p["a"], p["b"])
    if fam == "exponential":
        _params(block, "model", {})
        return md.make_exponential_gamma()
    if fam == "poisson":
        _params(block, "model", {})
        return md.make_poisson(md.gamma_prior(1.0, 1.0)), None
    if fam == "gaussian-location":
        p = _params(block, "model", {"sigma_prior": 1.0})
        return md.make_gaussian_location(p["sigma_prior"])
    if fam == "ising":
        p = _params(block, "model", {"edges": None, "lattice": None, "M": 0.0, "n_vertices": None})
        edges = p["edges"] if p["edges"] is not None else _square_lattice(int(p["lattice"] or 2))
        return md.make_ising(edges, p["M"], p["n_vertices"]), None
    if fam == "ergm":
        p = _params(block, "model", {"n": _REQUIRED, "stat": "edge-count"})
        return md.make_ergm(int(p["n"]), p["stat"]), None
    raise ConfigError("model.family", f"unknown family {fam!r}")


MODEL_BUILDERS = ("two-point", "beta-binomial", "exponential", "poisson", "gaussian-location", "ising", "ergm")


def _build_prior(block, model, default):
    fam = block["family"]
    if fam == "default":
        _params(block, "prior", {})
        if default is None:
            raise ConfigError("prior.family", f"model {model.name!r} has no default prior")
        return default
    if fam == "gamma":
        p = _params(block, "prior", {"shape": _REQUIRED, "rate": _REQUIRED})
        return md.gamma_prior(p["shape"], p["rate"])
    if fam == "gaussian":
        p = _params(block, "prior", {"mean": 0.0, "sd": _REQUIRED})
        return md.gaussian_prior(p["mean"], p["sd"])
    if fam == "truncated-gaussian":
        p = _params(block, "prior", {"mean": 0.0, "sd": _REQUIRED, "lower": 0.0})
        return md.truncated_gaussian_prior(p["mean"], p["sd"], p["lower"])
    if fam == "truncated-beta":
        p = _params(block, "prior", {"a": _REQUIRED, "b": _REQUIRED, "lo": _REQUIRED, "hi": _REQUIRED})
        return md.truncated_beta_prior(p["a"], p["b"], p["lo"], p["hi"])
    if fam == "discrete":
        p = _params(block, "prior", {"values": _REQUIRED, "masses": None})
        masses = p["masses"] if p["masses"] is not None else [1.0] * len(p["values"])
        return md.discrete_prior(p["values"], masses)
    if fam == "uniform-grid":
        p = _params(block, "prior", {"lo": _REQUIRED, "hi": _REQUIRED, "K": _REQUIRED})
        return md.discrete_prior(np.linspace(p["lo"], p["hi"], int(p["K"])), np.ones(int(p["K"])))
    if fam == "conjugate":
        p = _params(block, "prior", {"n0": _REQUIRED, "t": _REQUIRED})
        return md.make_conjugate_prior(model, p["n0"], p["t"])
    raise ConfigError("prior.family", f"unknown family {fam!r}")


PRIOR_BUILDERS = ("default", "gamma", "gaussian", "truncated-gaussian", "truncated-beta", "discrete",
                  "uniform-grid", "conjugate")


def _build_proposal(block, grid):
    fam = block["family"]
    if fam in GRID_PROPOSALS and grid is None:
        raise ConfigError("proposal.family", "grid proposals need a discrete prior or a grid block")
    if fam == "grid-uniform":
        p = _params(block, "proposal", {"include_self": True})
        return kn.grid_uniform(grid, p["include_self"])
    if fam == "grid-random-walk":
        p = _params(block, "proposal", {"k": 1})
        return kn.grid_random_walk(grid, int(p["k"]))
    if fam == "swap":
        _params(block, "proposal", {})
        if len(grid) != 2:
            raise ConfigError("proposal.family", "swap needs exactly two grid points")
        return kn.grid_matrix_proposal(grid, np.array([[0.0, 1.0], [1.0, 0.0]]), "swap")
    if fam == "gaussian-rw":
        return kn.gaussian_random_walk(_params(block, "proposal", {"scale": 1.0})["scale"])
    if fam == "uniform-rw":
        return kn.uniform_random_walk(_params(block, "proposal", {"half_width": 1.0})["half_width"])
    if fam == "cauchy-rw":
        return kn.cauchy_random_walk(_params(block, "proposal", {"scale": 1.0})["scale"])
    if fam == "gamma-independence":
        p = _params(block, "proposal", {"shape": _REQUIRED, "rate": _REQUIRED})
        return kn.gamma_independence(p["shape"], p["rate"])
    raise ConfigError("proposal.family", f"unknown family {fam!r}")


PROPOSAL_BUILDERS = GRID_PROPOSALS + ("gaussian-rw", "uniform-rw", "cauchy-rw", "gamma-independence")


def _data(model, raw):
    if raw is None:
        raise ConfigError("data", "required for this model")
    if isinstance(model.sample_space, md.FiniteSpace) and np.ndim(model.sample_space.points) == 2:
        x = np.asarray(raw, dtype=np.int8)
        if x.shape != model.sample_space.points.shape[1:]:
            raise ConfigError("data", f"expected a vector of length {model.sample_space.points.shape[1]}")
        return x
    return raw


@dataclass
class Built:
    posterior: md.PosteriorSpec
    grid_posterior: md.PosteriorSpec
    grid: np.ndarray
    proposal: kn.Proposal


def build(cfg: ExperimentConfig) -> Built:
    model, default_prior = _build_model(cfg.model)
    prior = _build_prior(cfg.prior, model, default_prior)
    if model.name == "poisson" and prior.support.lo < 0:
        raise ConfigError("prior.family", "Poisson mean needs a prior on [0, inf)")
    post = md.PosteriorSpec(model, prior, _data(model, cfg.data))
    grid_block = cfg.grid or {}
    interval = tuple(grid_block["interval"]) if "interval" in grid_block else None
    gpost = ea.discretize_posterior(post, int(grid_block.get("K", ea.DEFAULT_GRID_SIZE)), interval)
    grid = np.asarray(gpost.prior.support.values)
    proposal = _build_proposal(cfg.proposal, grid)
    return Built(post, gpost, grid, proposal)


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


def _h_functions(grid) -> dict:
    mid = 0.5 * (grid[0] + grid[-1])
    return {
        "theta": lambda t: np.asarray(t, dtype=float),
        "theta^2": lambda t: np.square(np.asarray(t, dtype=float)),
        "upper-half": lambda t: (np.asarray(t, dtype=float) > mid).astype(float),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def _pairs(grid, limit=20):
    pts = grid if len(grid) <= limit else grid[np.linspace(0, len(grid) - 1, limit).round().astype(int)]
    return [(a, b) for a in pts for b in pts]


def _default_modulus(model):
    if model.name == "poisson":
        return "poisson-coupling", [0.5, 1.0, 2.0, 5.0], [0.1, 0.5, 1.0, 2.0]
    if model.name == "gaussian-location":
        return "location-profile", [-2.0, 0.0, 1.5, 3.0], [0.1, 0.5, 1.0, 2.0]
    return "pinsker-expfam", np.linspace(-2.0, 2.0, 20).tolist(), [0.05, 0.25, 0.5, 1.0]


def _run_checks(cfg: ExperimentConfig, b: Built, threads: int) -> dict:
    out = {}
    cp = cfg.check_params
    is_grid = isinstance(b.proposal, kn.GridProposal)
    needs_exact = {"peskun", "variance-sandwich", "spectrum", "clt"} & set(cfg.checks)
    chains = {}
    if needs_exact:
        if not is_grid:
            raise ConfigError("proposal.family", f"checks {sorted(needs_exact)} need a grid proposal")
        chains["mh"] = ea.build_mh_matrix(b.grid_posterior, b.proposal)
        chains["exchange"] = ea.build_exchange_matrix(b.grid_posterior, b.proposal, threads)
        if cfg.laziness < 1.0:
            chains = {k: ea.lazy_matrix(v, cfg.laziness) for k, v in chains.items()}
    if "spectrum" in cfg.checks:
        rep = {}
        ok = True
        for k, ch in chains.items():
            sp = ea.spectrum(ch)
            rep[k] = {"m": sp.m, "M": sp.M, "gap": sp.gap, "grid_surrogate": True,
                      "stationarity_residual": ch.stationarity_residual()}
            ok &= ch.stationarity_residual() <= 1e-10 and bool(np.all(np.abs(sp.eigenvalues) <= 1 + 1e-10))
        rep["tierney_M_ex_ge_M_mh"] = bool(rep["exchange"]["M"] >= rep["mh"]["M"] - 1e-10)
        rep["holds"] = bool(ok and rep["tierney_M_ex_ge_M_mh"])
        out["spectrum"] = rep
    if "peskun" in cfg.checks:
        rep = ea.peskun_compare(chains["mh"], chains["exchange"]).to_dict()
        if chains["mh"].K <= 25:
            rep["P_mh"] = chains["mh"].P
            rep["P_exchange"] = chains["exchange"].P
            rep["grid"] = chains["mh"].grid
        out["peskun"] = rep
    if "variance-sandwich" in cfg.checks:
        rep = {name: ea.variance_sandwich_check(chains["mh"], chains["exchange"], h).to_dict()
               for name, h in _h_functions(b.grid).items()}
        rep["holds"] = all(r["holds"] for r in rep.values())
        out["variance-sandwich"] = rep
    model = b.posterior.model
    if "tv-modulus" in cfg.checks:
        tag, thetas, ss = _default_modulus(model)
        p = cp.get("tv-modulus", {})
        res = dg.tv_modulus_check(model, p.get("tag", tag), p.get("thetas", thetas), p.get("ss", ss))
        out["tv-modulus"] = res.to_dict()
    if "non-negligibility" in cfg.checks:
        p = cp.get("non-negligibility", {})
        pairs = p.get("pairs") or _pairs(b.grid)
        res = dg.non_negligibility(model, p.get("delta", 0.5), pairs)
        rep = res.to_dict()
        if p.get("expect") == "decay":
            probs = rep["rhs"]
            rep["decay"] = bool(all(x > y for x, y in zip(probs[:-1], probs[1:])))
            rep["satisfied"] = rep["decay"]
        out["non-negligibility"] = rep
    if "tail" in cfg.checks:
        p = cp.get("tail", {})
        rep = dg.tail_condition_check(b.posterior, p.get("alphas", [0.1, 0.5, 1.0, 2.0]),
                                      p.get("x1s", [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0])).to_dict()
        if b.proposal.log_radial is not None and rep["alpha"] is not None:
            prop = dg.proposal_tail_check(b.proposal, min(rep["alpha"], 1e3)).to_dict()
            rep["proposal"] = prop
            rep["passed"] = bool(rep["passed"] and prop["finite"])
        out["tail"] = rep
    if "rejection-prob" in cfg.checks:
        p = cp.get("rejection-prob", {})
        thetas = p.get("thetas", list(b.grid[:2]) if len(b.grid) == 2 else [1.0, 10.0, 100.0, 1000.0])
        post = b.posterior if not is_grid else b.grid_posterior
        vals = [dg.rejection_probability(post, b.proposal, t) for t in thetas]
        rep = {"thetas": thetas, "rejection": vals}
        if p.get("expect") == "increasing":
            rep["holds"] = bool(all(x < y for x, y in zip(vals[:-1], vals[1:])))
        else:
            rep["holds"] = bool(all(0.0 <= v <= 1.0 for v in vals))
        out["rejection-prob"] = rep
    if "clt" in cfg.checks:
        reps = cfg.replications or 2000
        p = cp.get("clt", {})
        steps = int(p.get("steps", 10_000))
        rep = {}
        algs = ["mh", "exchange"] if cfg.algorithm == "both" else [cfg.algorithm]
        for alg in algs:
            spec = kn.KernelSpec(alg, b.proposal, b.grid_posterior, cfg.laziness)
            rep[alg] = dg.clt_check(spec, _h_functions(b.grid)["theta"], reps, steps, cfg.seed, chains[alg]).to_dict()
        rep["holds"] = all(r["passed"] for r in rep.values())
        out["clt"] = rep
    return out


def _grid_median(b: Built) -> float:
    lp = b.grid_posterior.log_unnormalized(b.grid)
    cdf = np.cumsum(np.exp(lp - np.max(lp)))
    return float(b.grid[np.searchsorted(cdf, 0.5 * cdf[-1])])


def _passed(check: dict) -> bool:
    for key in ("holds", "satisfied", "passed"):
        if key in check:
            return bool(check[key])
    return True


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1, timestamp: Optional[str] = None) -> dict:
    """Run one experiment and write its outputs; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    b = build(cfg)
    traces = {}
    if cfg.steps > 0:
        algs = ["exchange", "mh"] if cfg.algorithm == "both" else [cfg.algorithm]
        post = b.grid_posterior if isinstance(b.proposal, kn.GridProposal) else b.posterior
        theta0 = cfg.theta0 if cfg.theta0 is not None else _grid_median(b)
        for k, alg in enumerate(algs):
            spec = kn.KernelSpec(alg, b.proposal, post, cfg.laziness)
            trace = kn.run_chain(spec, theta0, cfg.steps, cfg.seed, config=cfg.to_dict())
            fname = "trace.csv" if k == 0 else f"trace_{alg}.csv"
            trace.to_csv(out / fname)
            traces[alg] = {"file": fname, "acceptance_rate": float(trace.accepted.mean()),
                           "mean_theta": float(trace.states.mean()), **trace.sidecar()}
    checks = _run_checks(cfg, b, threads)
    status = {name: _passed(c) for name, c in checks.items()}
    report = {
        "name": cfg.name,
        "config": cfg.to_dict(),
        "traces": traces,
        "checks": checks,
        "status": status,
        "passed": all(status.values()),
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    report = _jsonable(report)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    lines = [f"experiment: {cfg.name}", f"claim: {CATALOG.get(cfg.name, {}).get('claim', 'user config')}"]
    for name, t in traces.items():
        lines.append(f"trace[{name}]: {cfg.steps} steps, acceptance {t['acceptance_rate']:.4f}")
    for name, ok in status.items():
        lines.append(f"{name}: {'PASS' if ok else 'FAIL'}")
    lines.append(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return report


# --------------------------------------------------------------------------
# Built-in experiments
# --------------------------------------------------------------------------

_BB_MODEL = {"family": "beta-binomial", "n": 10, "theta1": 0.2, "theta2": 0.8, "a": 2.0, "b": 3.0}

CATALOG = {
    "two-point": {
        "claim": "Peskun ordering and variance ordering: exchange holds where MH alternates",
        "config": {"model": {"family": "two-point"}, "prior": {"family": "default"}, "data": 1,
                   "proposal": {"family": "swap"}, "algorithm": "both", "steps": 100_000,
                   "checks": ["spectrum", "peskun", "variance-sandwich", "rejection-prob", "clt"]},
    },
    "beta-binomial": {
        "claim": "uniform ergodicity inherited on a compact parameter space (non-negligible likelihood ratio)",
        "config": {"model": _BB_MODEL, "prior": {"family": "default"}, "data": 4,
                   "grid": {"K": 50, "interval": [0.2, 0.8]}, "proposal": {"family": "grid-uniform"},
                   "algorithm": "both", "steps": 100_000,
                   "checks": ["spectrum", "peskun", "variance-sandwich", "non-negligibility", "clt"]},
    },
    "exponential-gamma": {
        "claim": "exchange rejection probability tends to 1: not geometrically ergodic although MH is",
        "config": {"model": {"family": "exponential"}, "prior": {"family": "default"}, "data": 1.0,
                   "proposal": {"family": "gamma-independence", "shape": 2.0, "rate": 2.0},
                   "algorithm": "both", "steps": 20_000,
                   "checks": ["rejection-prob", "non-negligibility", "tail"],
                   "check_params": {"rejection-prob": {"thetas": [1.0, 10.0, 100.0, 1000.0], "expect": "increasing"},
                                    "non-negligibility": {"delta": 0.5, "expect": "decay",
                                                          "pairs": [[1.0, 10.0], [1.0, 100.0], [1.0, 1000.0]]},
                                    "tail": {"alphas": [0.5, 1.0, 1.5, 1.9]}}},
    },
    "poisson-gamma": {
        "claim": "Poisson likelihood tail proposition: exponential-tail posterior and coupling TV modulus",
        "config": {"model": {"family": "poisson"}, "prior": {"family": "gamma", "shape": 2.0, "rate": 1.0},
                   "data": 3, "proposal": {"family": "gaussian-rw", "scale": 1.0}, "algorithm": "exchange",
                   "steps": 20_000, "checks": ["tv-modulus", "tail"]},
    },
    "gaussian-location": {
        "claim": "location family with tail lighter than exponential: TV profile and tail conditions",
        "config": {"model": {"family": "gaussian-location", "sigma_prior": 2.0}, "prior": {"family": "default"},
                   "data": 1.0, "proposal": {"family": "gaussian-rw", "scale": 1.0}, "algorithm": "exchange",
                   "steps": 20_000, "checks": ["tv-modulus", "tail"],
                   "check_params": {"tail": {"alphas": [0.5, 1.0, 2.0, 5.0, 10.0],
                                             "x1s": [0.0, 1.0, 5.0, 10.0, 50.0, 100.0]}}},
    },
    "ising-n2": {
        "claim": "Pinsker bound on TV for a bounded-statistic exponential family (two-spin Ising)",
        "config": {"model": {"family": "ising", "edges": [[0, 1, 1.0]]},
                   "prior": {"family": "uniform-grid", "lo": -2.0, "hi": 2.0, "K": 20}, "data": [1, 1],
                   "proposal": {"family": "grid-random-walk", "k": 2}, "algorithm": "both", "steps": 100_000,
                   "checks": ["spectrum", "peskun", "variance-sandwich", "tv-modulus", "clt"]},
    },
    "ising-grid": {
        "claim": "Pinsker bound and Peskun ordering on a 3x3 Ising lattice",
        "config": {"model": {"family": "ising", "lattice": 3},
                   "prior": {"family": "uniform-grid", "lo": -1.0, "hi": 1.0, "K": 21},
                   "data": [1, 1, 1, 1, -1, 1, 1, 1, 1], "proposal": {"family": "grid-random-walk", "k": 2},
                   "algorithm": "both", "steps": 50_000,
                   "checks": ["spectrum", "peskun", "variance-sandwich", "tv-modulus"]},
    },
    "ergm-n4": {
        "claim": "Pinsker bound and Peskun ordering for an edge-count ERGM on 4 vertices",
        "config": {"model": {"family": "ergm", "n": 4, "stat": "edge-count"},
                   "prior": {"family": "uniform-grid", "lo": -2.0, "hi": 2.0, "K": 20},
                   "data": [1, 0, 1, 1, 0, 0], "proposal": {"family": "grid-uniform"}, "algorithm": "both",
                   "steps": 50_000, "checks": ["spectrum", "peskun", "variance-sandwich", "tv-modulus"]},
    },
}


def builtin_config(name: str, seed: Optional[int] = None) -> ExperimentConfig:
    if name not in CATALOG:
        raise KeyError(f"unknown built-in experiment {name!r}; see `list`")
    raw = copy.deepcopy(CATALOG[name]["config"])
    raw["name"] = name
    if seed is not None:
        raw["seed"] = seed
    return ExperimentConfig.from_dict(raw)


def list_experiments() -> list:
    return [(name, entry["claim"]) for name, entry in CATALOG.items()]


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exchange-mcmc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out-dir", default="results", help="output directory")
    run = sub.add_parser("run", parents=[common], help="run experiment config files")
    run.add_argument("configs", nargs="+")
    rep = sub.add_parser("reproduce", parents=[common], help="run a built-in experiment")
    rep.add_argument("name")
    sub.add_parser("list", help="list built-in experiments")
    return p


def _load(path: str, seed: Optional[int]) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text())
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verb == "list":
        for name, claim in list_experiments():
            print(f"{name:20s} {claim}")
        return 0
    try:
        if args.verb == "reproduce":
            cfgs = [builtin_config(args.name, args.seed)]
        else:
            cfgs = [_load(p, args.seed) for p in args.configs]
    except (ConfigError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    names = [c.name for c in cfgs]
    if len(set(names)) != len(names):
        print("error: experiment names must be unique within a batch", file=sys.stderr)
        return 2
    out_root = Path(args.out_dir)

    def one(cfg):
        return run_experiment(cfg, out_root / cfg.name, threads=args.threads)

    try:
        if len(cfgs) > 1 and args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                reports = list(pool.map(one, cfgs))
        else:
            reports = [one(c) for c in cfgs]
    except (ConfigError, md.ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for r in reports:
        print(f"{r['name']}: {'PASS' if r['passed'] else 'FAIL'}")
    return 0 if all(r["passed"] for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
