"""Experiment runner: configures problems and solver sets, records ergodic
convergence traces, fits empirical rate slopes, and emits CSV/JSON.

Regularization scale
--------------------
The stochastic solvers consume unscaled per-sample subgradients, so the
problem they optimize weighs the penalty against the *mean* loss.  For the
least-squares models, whose conventional objective sums over rows, the
experiment therefore keeps two views of one optimization problem
(``mu_scale="per_sample"``, the default):

* stochastic solvers run on the mean-scale problem (penalty weight mu/n);
* batch solvers and the f* reference solve run on the sum-scale problem
  (penalty weight mu), which has the same minimizer;
* traces always report the sum-scale objective 0.5||D x - r||^2 + mu ||y||_1,
  the form the model is conventionally written in.

The logistic model's loss is already a mean, so both views coincide and mu
is used as given.  Manifests record both the raw and the solver-side value.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import datasets as data
from . import problems as pm
from . import solvers as sv
from .errors import InsufficientData, NonpositiveGap

GAP_CLIP = 1e-14
MAX_CLIP_FRACTION = 0.05

CSV_HEADER = ("solver", "iteration", "objective", "constraint_norm",
              "raw_objective", "wall_ns", "lyapunov")

MODELS = ("lasso", "group-lasso", "logistic")


@dataclass(frozen=True)
class TraceRow:
    solver: str
    iteration: int
    objective: float
    constraint_norm: float
    raw_objective: float
    wall_ns: int = 0
    lyapunov: Optional[float] = None


@dataclass
class ExperimentSpec:
    """One experiment: a problem source, solver configs, and output paths."""

    model: str
    solvers: Sequence[tuple[str, sv.SolverConfig]]
    gen_params: Optional[dict] = None
    dataset_path: Optional[str] = None
    mu: Optional[float] = None          # override the generator's mu
    mu_scale: Optional[object] = None   # None -> model default; "per_sample" | "none" | float
    ridge: float = 0.0
    rho: float = 1.0
    cadence: int = 1
    record_timing: bool = False
    lyapunov_cert: Optional[tuple] = None  # (certificate, w_star) fills the column
    out_csv: Optional[str] = None
    out_manifest: Optional[str] = None
    extra: dict = field(default_factory=dict)


def validate_spec(spec: ExperimentSpec) -> list[str]:
    v = []
    if spec.model not in MODELS:
        v.append(f"unknown model {spec.model!r}")
    if not spec.solvers:
        v.append("at least one solver config is required")
    if not spec.rho > 0:
        v.append(f"rho must be positive, got {spec.rho}")
    if spec.cadence < 1:
        v.append(f"cadence must be >= 1, got {spec.cadence}")
    if (spec.gen_params is None) == (spec.dataset_path is None):
        v.append("exactly one of gen_params or dataset_path is required")
    if spec.dataset_path is not None and spec.mu is None:
        v.append("mu is required when loading a dataset from a file")
    names = [name for name, _ in spec.solvers]
    if len(set(names)) != len(names):
        v.append("solver names must be unique")
    for name, cfg in spec.solvers:
        for why in sv.validate_config(cfg):
            v.append(f"solver {name!r}: {why}")
    return v


def resolve_mu(model: str, mu_raw: float, n: int, mu_scale) -> float:
    """Apply the documented regularization-scale convention (see module doc)."""
    if mu_scale is None:
        mu_scale = "per_sample" if model in ("lasso", "group-lasso") else "none"
    if mu_scale == "per_sample":
        return mu_raw / n
    if mu_scale == "none":
        return mu_raw
    return mu_raw * float(mu_scale)


def build_problem(spec: ExperimentSpec):
    """Materialize the problem pair; returns (solver_problem, report_problem,
    info dict).

    ``solver_problem`` carries the per-sample-scale penalty the stochastic
    solvers need; ``report_problem`` carries the conventional (sum-scale)
    penalty and is used for batch solvers, objective reporting and the f*
    reference.  The two coincide whenever no scaling applies.
    """
    if spec.dataset_path is not None:
        kind = data.BINARY if spec.model == "logistic" else data.REGRESSION
        ds = data.read_libsvm(spec.dataset_path, kind=kind)
        mu_raw = spec.mu
        groups = None
    else:
        params = dict(spec.gen_params or {})
        if spec.model == "lasso":
            ds, mu_gen = data.gen_lasso(**params)
        elif spec.model == "group-lasso":
            ds, mu_gen = data.gen_group_lasso(**params)
        else:
            ds, mu_gen = data.gen_logistic(**params)
        mu_raw = spec.mu if spec.mu is not None else mu_gen
        groups = ds.groups
    mu_used = resolve_mu(spec.model, mu_raw, ds.n, spec.mu_scale)

    def make(mu):
        if spec.model == "lasso":
            return pm.lasso_problem(ds.D, ds.r, mu, ridge=spec.ridge)
        if spec.model == "group-lasso":
            if groups is None:
                raise ValueError("group-lasso from a file needs generated groups")
            return pm.group_lasso_problem(ds.D, ds.r, mu, groups, ridge=spec.ridge)
        return pm.logistic_problem(ds.D, ds.r, mu)

    solver_problem = make(mu_used)
    report_problem = solver_problem if mu_used == mu_raw else make(mu_raw)
    info = {"model": spec.model, "n": ds.n, "d": ds.d,
            "mu_raw": mu_raw, "mu_used": mu_used, "ridge": spec.ridge,
            "dataset": dict(ds.meta)}
    return solver_problem, report_problem, info


def reference_solution(problem, beta: float = 1.0, max_iters: int = 20000,
                       tol: float = 1e-12):
    """High-accuracy saddle-point estimate from a long batch ADMM run.

    Returns (f_star, (x, y, lam)); stops early once successive iterates and
    the constraint residual fall below ``tol``.
    """
    cfg = sv.admm_config(beta=beta, max_iters=max_iters)
    prev = None
    state = None
    for state in sv.iterate(problem, cfg):
        if prev is not None and state.k % 10 == 0:
            move = max(float(np.linalg.norm(state.x - prev[0])),
                       float(np.linalg.norm(state.y - prev[1])))
            rnorm = float(np.linalg.norm(pm.constraint_residual(problem, state.x, state.y)))
            if max(move, rnorm) <= tol * (1.0 + float(np.linalg.norm(state.x))):
                break
        prev = (state.x, state.y)
    f_star = pm.objective(problem, state.x, state.y)
    return f_star, (state.x, state.y, state.lam)


def run_one(problem, name: str, cfg: sv.SolverConfig, cadence: int,
            record_timing: bool = False, report_problem=None,
            lyapunov_cert=None) -> list[TraceRow]:
    """Run a single solver and collect trace rows at the given cadence.

    Objectives are evaluated on ``report_problem`` when given (the sum-scale
    view), on the solved problem otherwise.  ``lyapunov_cert`` = (certificate,
    w_star) fills the lyapunov column with the potential at the current
    iterate (a hard descent statement only for batch runs).
    """
    from . import contraction as ct

    rp = problem if report_problem is None else report_problem
    rows = []
    y_prev = None
    t0 = time.perf_counter_ns()
    for state in sv.iterate(problem, cfg):
        if state.t_bar >= 1 and state.t_bar % cadence == 0:
            obj = pm.objective(rp, state.x_bar, state.y_bar)
            rnorm = float(np.linalg.norm(
                pm.constraint_residual(rp, state.x_bar, state.y_bar)))
            raw = pm.objective(rp, state.x, state.y)
            if not (np.isfinite(obj) and np.isfinite(rnorm) and np.isfinite(raw)):
                raise FloatingPointError(
                    f"non-finite trace values at iteration {state.t_bar} "
                    f"(objective={obj}, ||r||={rnorm}); the run diverged")
            wall = time.perf_counter_ns() - t0 if record_timing else 0
            phi = None
            if lyapunov_cert is not None:
                cert, w_star = lyapunov_cert
                phi = ct.potential_at(problem, cert, w_star, state.x, state.y,
                                      state.lam, y_prev=y_prev)
            rows.append(TraceRow(solver=name, iteration=state.t_bar, objective=obj,
                                 constraint_norm=rnorm, raw_objective=raw,
                                 wall_ns=wall, lyapunov=phi))
        y_prev = state.y
    return rows


def run_experiment(spec: ExperimentSpec):
    """Run every solver on the shared problem; returns ({name: rows}, manifest).

    Writes the CSV trace and the JSON manifest when output paths are set.
    """
    violations = validate_spec(spec)
    if violations:
        raise ValueError("invalid experiment spec: " + "; ".join(violations))
    solver_problem, report_problem, info = build_problem(spec)
    results = {}
    for name, cfg in spec.solvers:
        # batch algorithms work on the sum-scale view, stochastic ones on the
        # per-sample view; both have the same minimizer (see module doc)
        problem = report_problem if cfg.algorithm in sv.BATCH_ALGORITHMS \
            else solver_problem
        try:
            results[name] = run_one(problem, name, cfg, spec.cadence,
                                    record_timing=spec.record_timing,
                                    report_problem=report_problem,
                                    lyapunov_cert=spec.lyapunov_cert)
        except Exception as exc:
            raise RuntimeError(f"solver {name!r} failed: {exc}") from exc
    manifest = {
        "problem": info,
        "rho": spec.rho,
        "cadence": spec.cadence,
        "record_timing": spec.record_timing,
        "solvers": {name: _config_dict(cfg) for name, cfg in spec.solvers},
        **spec.extra,
    }
    if spec.out_csv:
        emit_csv(results, spec.out_csv)
    if spec.out_manifest:
        data.write_manifest(spec.out_manifest, manifest)
    return results, manifest


def _config_dict(cfg: sv.SolverConfig) -> dict:
    out = {
        "algorithm": cfg.algorithm, "alpha": cfg.alpha, "gamma": cfg.gamma,
        "beta": cfg.beta, "max_iters": cfg.max_iters, "seed": cfg.seed,
        "minibatch": cfg.minibatch, "ergodic": cfg.ergodic,
        "S": _prox_dict(cfg.S), "T": _prox_dict(cfg.T),
    }
    if cfg.schedule is not None:
        sch = cfg.schedule
        out["schedule"] = {"kind": sch.kind}
        if sch.kind == "power":
            out["schedule"].update(c=sch.c, p=sch.p)
        elif sch.kind == "strongly_convex":
            out["schedule"].update(mu_sc=sch.mu_sc)
        else:
            out["schedule"].update(eta=sch.eta)
    return out


def _prox_dict(prox: sv.ProxMatrix) -> dict:
    if prox.kind == "explicit":
        return {"kind": "explicit", "shape": list(prox.matrix.shape)}
    return {"kind": prox.kind, "scale": prox.scale}


# ---------------------------------------------------------------------------
# rate fitting


def rate_slope(rows: Sequence[TraceRow], f_star: float, burn_in: float = 0.0,
               rho: float = 1.0) -> float:
    """Least-squares slope of log(gap) against log(iteration).

    gap_t = objective_t - f_star + rho * constraint_norm_t, clipped below at
    1e-14; more than 5% clipped values aborts the fit.
    """
    rows = sorted(rows, key=lambda w: w.iteration)
    skip = int(np.floor(burn_in * len(rows)))
    window = rows[skip:]
    if len(window) < 100:
        raise InsufficientData(
            f"need >= 100 trace records after burn-in, have {len(window)}")
    ts = np.array([w.iteration for w in window], dtype=float)
    gaps = np.array([w.objective - f_star + rho * w.constraint_norm for w in window])
    n_clip = int(np.sum(gaps < GAP_CLIP))
    if n_clip > MAX_CLIP_FRACTION * len(window):
        raise NonpositiveGap(
            f"{n_clip}/{len(window)} gaps at or below the clip floor")
    gaps = np.maximum(gaps, GAP_CLIP)
    slope, _ = np.polyfit(np.log(ts), np.log(gaps), 1)
    return float(slope)


def thin_log_spaced(rows: Sequence[TraceRow], lo: int, hi: int,
                    n_points: int = 160) -> list[TraceRow]:
    """Pick an approximately log-spaced subset of rows with lo <= t <= hi.

    Keeps log-log fits unbiased in log-t when traces were recorded on a
    uniform cadence.
    """
    inside = [w for w in rows if lo <= w.iteration <= hi]
    if not inside:
        return []
    targets = np.unique(np.round(np.geomspace(max(lo, 1), hi, n_points)).astype(int))
    have = {w.iteration: w for w in inside}
    ts = np.array(sorted(have))
    picked = {}
    for t in targets:
        nearest = int(ts[np.argmin(np.abs(ts - t))])
        picked[nearest] = have[nearest]
    return [picked[t] for t in sorted(picked)]


# ---------------------------------------------------------------------------
# CSV IO


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(results: dict, path) -> None:
    """Write traces with a fixed header; solver order then iteration order.

    17-significant-digit decimal fields round-trip doubles exactly; a missing
    lyapunov value is an empty field, not 0.
    """
    if not results:
        raise ValueError("no traces to emit")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for name in results:
            for w in sorted(results[name], key=lambda w: w.iteration):
                writer.writerow([
                    name, w.iteration, _fmt(w.objective), _fmt(w.constraint_norm),
                    _fmt(w.raw_objective), int(w.wall_ns),
                    "" if w.lyapunov is None else _fmt(w.lyapunov),
                ])


def read_trace_csv(path) -> dict:
    """Inverse of emit_csv; returns {solver: [TraceRow, ...]}."""
    out: dict = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        for rec in reader:
            name = rec[0]
            row = TraceRow(
                solver=name, iteration=int(rec[1]), objective=float(rec[2]),
                constraint_norm=float(rec[3]), raw_objective=float(rec[4]),
                wall_ns=int(rec[5]),
                lyapunov=None if rec[6] == "" else float(rec[6]),
            )
            out.setdefault(name, []).append(row)
    return out
