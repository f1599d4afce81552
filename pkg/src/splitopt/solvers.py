"""Batch and stochastic splitting solvers.

Implements the ADMM / PRSM / strictly-contractive PRSM family and its
semi-proximal, two-relaxation-factor extension, in both batch form (exact
subproblem solves) and stochastic form (one sampled subgradient per step,
linearized smooth term with a decaying proximal step size).

The stochastic scheme per step, from (x_k, y_k, lam_k):

    x_{k+1} = argmin <g_k, x> - lam_k' A x + (beta/2)||A x + B y_k - b||^2
              + ||x - x_k||^2 / (2 eta_{k+1}) + (1/2)||x - x_k||_S^2
    lam_{k+1/2} = lam_k - alpha * beta * (A x_{k+1} + B y_k - b)
    y_{k+1} = argmin theta2(y) - lam_{k+1/2}' B y
              + (beta/2)||A x_{k+1} + B y - b||^2 + (1/2)||y - y_k||_T^2
    lam_{k+1} = lam_{k+1/2} - gamma * beta * (A x_{k+1} + B y_{k+1} - b)

where g_k is the per-sample (minibatch-averaged) subgradient of theta1 at
x_k.  Setting S = T = 0 with alpha = 0, gamma = 1 recovers stochastic ADMM;
alpha = gamma in (0, 1) recovers stochastic SCPRSM.  ``step_sto_admm`` and
``step_batch_admm`` are nevertheless implemented independently from the
plain ADMM update rules so the reductions can be tested as genuine
equivalences rather than tautologies.

Runs are deterministic given (problem, config): sampling uses a counter-based
Philox generator seeded from the config, and the generator travels inside
``IterateState`` so runs are reproducible and resumable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import expit

from . import problems as pm
from .errors import (
    AlphaOutOfRange,
    EmptyDataset,
    KOutOfRange,
    NonpositiveEta,
    SubproblemUnsolvable,
)
from .linalg import EPS_PSD, ScaledIdentity, apply_map, apply_map_t, is_psd

ALGORITHMS = ("admm", "prsm", "scprsm", "spb_scprsm", "sto_admm", "sto_spb_scprsm")
BATCH_ALGORITHMS = ("admm", "prsm", "scprsm", "spb_scprsm")
STOCHASTIC_ALGORITHMS = ("sto_admm", "sto_spb_scprsm")


# ---------------------------------------------------------------------------
# step-size schedules


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule eta_k for the stochastic solvers.

    kinds: ``power`` eta_k = c * k**(-p) with p in (0, 1);
    ``strongly_convex`` eta_k = 1 / (k * mu_sc); ``constant`` eta_k = eta.
    """

    kind: str
    c: float = 1.0
    p: float = 0.5
    mu_sc: float = 1.0
    eta: float = 1e-3

    def __post_init__(self):
        if self.kind == "power":
            if not self.c > 0:
                raise ValueError("power schedule needs c > 0")
            if not 0.0 < self.p < 1.0:
                raise ValueError("power schedule needs p in (0, 1)")
        elif self.kind == "strongly_convex":
            if not self.mu_sc > 0:
                raise ValueError("strongly_convex schedule needs mu_sc > 0")
        elif self.kind == "constant":
            if not self.eta > 0:
                raise ValueError("constant schedule needs eta > 0")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @staticmethod
    def power(c: float, p: float = 0.5) -> "StepSchedule":
        return StepSchedule(kind="power", c=c, p=p)

    @staticmethod
    def strongly_convex(mu_sc: float) -> "StepSchedule":
        return StepSchedule(kind="strongly_convex", mu_sc=mu_sc)

    @staticmethod
    def constant(eta: float) -> "StepSchedule":
        return StepSchedule(kind="constant", eta=eta)


def schedule_eta(sch: StepSchedule, k: int) -> float:
    """eta_k for iteration counter k >= 1."""
    if k < 1:
        raise KOutOfRange(f"schedule defined for k >= 1, got {k}")
    if sch.kind == "power":
        return sch.c * float(k) ** (-sch.p)
    if sch.kind == "strongly_convex":
        return 1.0 / (k * sch.mu_sc)
    return sch.eta


# ---------------------------------------------------------------------------
# semi-proximal matrices


@dataclass(frozen=True, eq=False)
class ProxMatrix:
    """Semi-proximal weight matrix, tagged so the common zero and scaled
    identity cases never touch O(d^2) storage."""

    kind: str  # "zero" | "identity_scaled" | "explicit"
    scale: float = 0.0
    matrix: Optional[np.ndarray] = None

    @staticmethod
    def zero() -> "ProxMatrix":
        return ProxMatrix(kind="zero")

    @staticmethod
    def identity(scale: float = 1.0) -> "ProxMatrix":
        return ProxMatrix(kind="identity_scaled", scale=float(scale))

    @staticmethod
    def explicit(matrix) -> "ProxMatrix":
        return ProxMatrix(kind="explicit", matrix=np.asarray(matrix, dtype=np.float64))

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("zero", "identity_scaled")

    @property
    def scalar(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "identity_scaled":
            return self.scale
        raise ValueError("explicit prox matrix has no scalar form")

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "identity_scaled":
            return self.scale * v
        return self.matrix @ v

    def dense(self, dim: int) -> np.ndarray:
        if self.kind == "explicit":
            return self.matrix
        return self.scalar * np.eye(dim)

    def psd_violation(self, tol: float = EPS_PSD) -> Optional[str]:
        """Return a description if the matrix is not PSD, else None."""
        if self.kind == "zero":
            return None
        if self.kind == "identity_scaled":
            return None if self.scale >= -tol else f"identity scale {self.scale} < 0"
        try:
            ok = is_psd(self.matrix, tol=tol)
        except Exception as exc:  # not square / not symmetric
            return str(exc)
        return None if ok else "explicit matrix has negative eigenvalues"


# ---------------------------------------------------------------------------
# configuration


def gamma_upper_bound(alpha: float) -> float:
    """Largest admissible second relaxation factor for a given alpha:
    (1 - alpha + sqrt((1 + alpha)^2 + 4 (1 - alpha^2))) / 2, > 1 on [0, 1)."""
    if not 0.0 <= alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0, 1), got {alpha}")
    return 0.5 * (1.0 - alpha + math.sqrt((1.0 + alpha) ** 2 + 4.0 * (1.0 - alpha ** 2)))


@dataclass(frozen=True, eq=False)
class SolverConfig:
    algorithm: str
    alpha: float
    gamma: float
    beta: float
    S: ProxMatrix = field(default_factory=ProxMatrix.zero)
    T: ProxMatrix = field(default_factory=ProxMatrix.zero)
    schedule: Optional[StepSchedule] = None
    max_iters: int = 1000
    seed: int = 0
    minibatch: int = 1
    ergodic: str = "paper"  # "uniform" offered for plotting only


def admm_config(beta: float = 1.0, **kw) -> SolverConfig:
    return SolverConfig(algorithm="admm", alpha=0.0, gamma=1.0, beta=beta, **kw)


def prsm_config(beta: float = 1.0, **kw) -> SolverConfig:
    return SolverConfig(algorithm="prsm", alpha=1.0, gamma=1.0, beta=beta, **kw)


def scprsm_config(alpha: float, beta: float = 1.0, **kw) -> SolverConfig:
    return SolverConfig(algorithm="scprsm", alpha=alpha, gamma=alpha, beta=beta, **kw)


def spb_scprsm_config(alpha: float, gamma: float, beta: float = 1.0,
                      S: Optional[ProxMatrix] = None, T: Optional[ProxMatrix] = None,
                      **kw) -> SolverConfig:
    return SolverConfig(algorithm="spb_scprsm", alpha=alpha, gamma=gamma, beta=beta,
                        S=S or ProxMatrix.zero(), T=T or ProxMatrix.zero(), **kw)


def sto_admm_config(schedule: StepSchedule, beta: float = 1.0, **kw) -> SolverConfig:
    return SolverConfig(algorithm="sto_admm", alpha=0.0, gamma=1.0, beta=beta,
                        schedule=schedule, **kw)


def sto_spb_scprsm_config(alpha: float, gamma: float, schedule: StepSchedule,
                          beta: float = 1.0, S: Optional[ProxMatrix] = None,
                          T: Optional[ProxMatrix] = None, **kw) -> SolverConfig:
    return SolverConfig(algorithm="sto_spb_scprsm", alpha=alpha, gamma=gamma, beta=beta,
                        S=S or ProxMatrix.zero(), T=T or ProxMatrix.zero(),
                        schedule=schedule, **kw)


def validate_config(cfg: SolverConfig) -> list[str]:
    """Collect every violated constraint; an empty list means valid."""
    v = []
    if cfg.algorithm not in ALGORITHMS:
        v.append(f"unknown algorithm {cfg.algorithm!r}")
        return v
    if not cfg.beta > 0:
        v.append(f"beta must be positive, got {cfg.beta}")
    if cfg.max_iters < 0:
        v.append(f"max_iters must be nonnegative, got {cfg.max_iters}")
    if cfg.minibatch < 1:
        v.append(f"minibatch must be >= 1, got {cfg.minibatch}")
    if cfg.ergodic not in ("paper", "uniform"):
        v.append(f"ergodic must be 'paper' or 'uniform', got {cfg.ergodic!r}")

    alg = cfg.algorithm
    if alg in ("admm", "sto_admm"):
        if cfg.alpha != 0.0 or cfg.gamma != 1.0:
            v.append(f"{alg} requires alpha=0, gamma=1 (got alpha={cfg.alpha}, gamma={cfg.gamma})")
        if cfg.S.kind != "zero" or cfg.T.kind != "zero":
            v.append(f"{alg} has no semi-proximal terms; S and T must be zero")
    elif alg == "prsm":
        if cfg.alpha != 1.0 or cfg.gamma != 1.0:
            v.append("prsm requires alpha=gamma=1")
        if cfg.S.kind != "zero" or cfg.T.kind != "zero":
            v.append("prsm requires S=T=0")
    elif alg == "scprsm":
        if not (cfg.alpha == cfg.gamma and 0.0 < cfg.alpha < 1.0):
            v.append("scprsm requires alpha=gamma in (0,1)")
        if cfg.S.kind != "zero" or cfg.T.kind != "zero":
            v.append("scprsm requires S=T=0")
    else:  # spb_scprsm, sto_spb_scprsm
        if not 0.0 <= cfg.alpha < 1.0:
            v.append(f"alpha must be in [0,1), got {cfg.alpha}")
        else:
            ub = gamma_upper_bound(cfg.alpha)
            if not 0.0 < cfg.gamma < ub:
                v.append(f"gamma must be in (0, {ub:.6g}) for alpha={cfg.alpha}, got {cfg.gamma}")

    for name, prox in (("S", cfg.S), ("T", cfg.T)):
        why = prox.psd_violation(tol=EPS_PSD)
        if why is not None:
            v.append(f"{name} is not positive semidefinite: {why}")

    if alg in STOCHASTIC_ALGORITHMS and cfg.schedule is None:
        v.append(f"{alg} requires a step-size schedule")
    return v


# ---------------------------------------------------------------------------
# iterate state


@dataclass
class IterateState:
    """Iterates plus running ergodic averages and the sampling RNG.

    With the "paper" averaging convention, after k completed steps the
    averages cover t = k - 1 terms: x_bar over x_1..x_{k-1} and y_bar,
    lam_bar over y_2..y_k, lam_2..lam_k (the x-average lags by one index).
    Under "uniform" all three average iterates 1..k and t_bar = k.
    """

    k: int
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    lam_half: np.ndarray
    x_bar: np.ndarray
    y_bar: np.ndarray
    lam_bar: np.ndarray
    t_bar: int
    rng: np.random.Generator

    @property
    def rng_state(self):
        return self.rng.bit_generator.state


def init_state(p: pm.SplittingProblem, cfg: SolverConfig) -> IterateState:
    """Zero-initialized state (x_0 = y_0 = 0, lam_0 = 0) with a fresh
    counter-based generator."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    z1, z2, zm = np.zeros(p.d1), np.zeros(p.d2), np.zeros(p.m)
    return IterateState(k=0, x=z1, y=z2, lam=zm.copy(), lam_half=zm.copy(),
                        x_bar=z1.copy(), y_bar=z2.copy(), lam_bar=zm.copy(),
                        t_bar=0, rng=rng)


def _advance(state: IterateState, cfg: SolverConfig, x_new, y_new, lam_new,
             lam_half) -> IterateState:
    k_new = state.k + 1
    x_bar, y_bar, lam_bar, t_bar = state.x_bar, state.y_bar, state.lam_bar, state.t_bar
    if cfg.ergodic == "paper":
        if k_new >= 2:
            t_bar = k_new - 1
            x_bar = x_bar + (state.x - x_bar) / t_bar
            y_bar = y_bar + (y_new - y_bar) / t_bar
            lam_bar = lam_bar + (lam_new - lam_bar) / t_bar
    else:
        t_bar = k_new
        x_bar = x_bar + (x_new - x_bar) / t_bar
        y_bar = y_bar + (y_new - y_bar) / t_bar
        lam_bar = lam_bar + (lam_new - lam_bar) / t_bar
    return IterateState(k=k_new, x=x_new, y=y_new, lam=lam_new, lam_half=lam_half,
                        x_bar=x_bar, y_bar=y_bar, lam_bar=lam_bar, t_bar=t_bar,
                        rng=state.rng)


# ---------------------------------------------------------------------------
# subproblem pieces


def _y_prox_step(p: pm.SplittingProblem, x_new, y_k, lam, t_spec: ProxMatrix,
                 beta: float):
    """Exact y-subproblem via the theta2 prox.

    Needs beta * B'B + T to be a scaled identity, which holds for the
    built-in x - y = 0 encoding with scalar T.
    """
    if not (isinstance(p.B, ScaledIdentity) and t_spec.is_scalar):
        raise SubproblemUnsolvable(
            "y-subproblem requires B a scaled identity and scalar T "
            "(register a custom prox-compatible encoding otherwise)"
        )
    c_b = p.B.scale
    t = t_spec.scalar
    q = beta * c_b * c_b + t
    u = apply_map(p.A, x_new) - p.b
    v = (c_b * lam - beta * c_b * u + t * y_k) / q
    return pm.theta2_prox(p, v, q)


def _minibatch_subgradient(p: pm.SplittingProblem, x, rng: np.random.Generator,
                           minibatch: int) -> np.ndarray:
    if p.n_samples < 1:
        raise EmptyDataset("cannot sample from an empty dataset")
    idx = rng.integers(0, p.n_samples, size=minibatch)
    g = pm.theta1_subgradient(p, x, pm.sample(p, int(idx[0])))
    for j in idx[1:]:
        g = g + pm.theta1_subgradient(p, x, pm.sample(p, int(j)))
    if minibatch > 1:
        g = g / minibatch
    return g


def _sto_x_closed(p, x_k, y_k, lam, g, eta: float, s_scale: float, beta: float):
    """Closed-form stochastic x-update for A = c I (any model, scalar S)."""
    c_a = p.A.scale
    num = -g + c_a * lam - beta * c_a * (apply_map(p.B, y_k) - p.b) \
        + (s_scale + 1.0 / eta) * x_k
    den = beta * c_a * c_a + s_scale + 1.0 / eta
    return num / den


def _sto_x_linear(p, x_k, y_k, lam, g, eta: float, s_spec: ProxMatrix, beta: float):
    """Dense stationarity solve of the stochastic x-subproblem."""
    if isinstance(p.A, ScaledIdentity):
        ata = (p.A.scale ** 2) * np.eye(p.d1)
        at_lam = p.A.scale * lam
        at_by = p.A.scale * (apply_map(p.B, y_k) - p.b)
    else:
        A = np.asarray(p.A, dtype=np.float64)
        ata = A.T @ A
        at_lam = A.T @ lam
        at_by = A.T @ (apply_map(p.B, y_k) - p.b)
    mat = beta * ata + (1.0 / eta) * np.eye(p.d1) + s_spec.dense(p.d1)
    rhs = (1.0 / eta) * x_k + s_spec.apply(x_k) - g + at_lam - beta * at_by
    try:
        return np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SubproblemUnsolvable(f"singular x-subproblem system: {exc}") from exc


def _batch_x_solve(p: pm.SplittingProblem, x_k, y_k, lam, s_spec: ProxMatrix,
                   beta: float, ctx: Optional[dict] = None):
    """Exact batch x-subproblem.

    Least-squares solves the normal equations; logistic runs a Newton
    iteration; custom models need a registered solver in
    ``problem.meta['batch_x_solver']``.
    """
    if p.theta1_kind == pm.LEAST_SQUARES:
        if ctx is not None and "chol" in ctx:
            rhs = ctx["dtr"] + apply_map_t(p.A, lam) \
                - beta * apply_map_t(p.A, apply_map(p.B, y_k) - p.b) \
                + s_spec.apply(x_k)
            return sla.cho_solve(ctx["chol"], rhs)
        mat = _ls_normal_matrix(p, s_spec, beta)
        rhs = np.asarray(p.design.T @ p.response).ravel() + apply_map_t(p.A, lam) \
            - beta * apply_map_t(p.A, apply_map(p.B, y_k) - p.b) + s_spec.apply(x_k)
        try:
            return np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError as exc:
            raise SubproblemUnsolvable(f"singular x-subproblem system: {exc}") from exc
    if p.theta1_kind == pm.LOGISTIC:
        return _batch_x_newton(p, x_k, y_k, lam, s_spec, beta)
    solver = p.meta.get("batch_x_solver")
    if solver is None:
        raise SubproblemUnsolvable(
            "custom theta1 needs problem.meta['batch_x_solver'] for batch algorithms"
        )
    return np.asarray(solver(p, x_k, y_k, lam, beta, s_spec), dtype=np.float64)


def _ls_normal_matrix(p, s_spec: ProxMatrix, beta: float) -> np.ndarray:
    dtd = p.design.T @ p.design
    if sp.issparse(dtd):
        dtd = dtd.toarray()
    mat = np.asarray(dtd, dtype=np.float64).copy()
    if p.ridge:
        mat[np.diag_indices_from(mat)] += p.n_samples * p.ridge
    if isinstance(p.A, ScaledIdentity):
        mat[np.diag_indices_from(mat)] += beta * p.A.scale ** 2
    else:
        A = np.asarray(p.A, dtype=np.float64)
        mat += beta * A.T @ A
    mat += s_spec.dense(p.d1)
    return mat


def _batch_x_newton(p, x_k, y_k, lam, s_spec: ProxMatrix, beta: float,
                    tol: float = 1e-12, max_iter: int = 100):
    D = p.design
    by = apply_map(p.B, y_k) - p.b
    x = x_k.copy()

    def grad(xv):
        g = pm.theta1_full_gradient(p, xv)
        g = g - apply_map_t(p.A, lam) + beta * apply_map_t(p.A, apply_map(p.A, xv) + by)
        return g + s_spec.apply(xv - x_k)

    for _ in range(max_iter):
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol * (1.0 + float(np.linalg.norm(x))):
            return x
        z = p.response * (D @ x + p.intercept)
        w = expit(z) * expit(-z) / p.n_samples
        if sp.issparse(D):
            hess = (D.multiply(w[:, None])).T @ D
            hess = np.asarray(hess.todense(), dtype=np.float64)
        else:
            hess = np.asarray(D.T @ (w[:, None] * D), dtype=np.float64)
        if isinstance(p.A, ScaledIdentity):
            hess[np.diag_indices_from(hess)] += beta * p.A.scale ** 2
        else:
            A = np.asarray(p.A, dtype=np.float64)
            hess += beta * A.T @ A
        hess += s_spec.dense(p.d1)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError as exc:
            raise SubproblemUnsolvable(f"singular Newton system: {exc}") from exc
        # halving line search on the gradient norm, plain Newton usually takes it
        t = 1.0
        for _ in range(60):
            x_try = x - t * step
            if float(np.linalg.norm(grad(x_try))) < gnorm:
                x = x_try
                break
            t *= 0.5
        else:
            raise SubproblemUnsolvable("logistic x-subproblem Newton stalled")
    raise SubproblemUnsolvable("logistic x-subproblem Newton did not converge")


# ---------------------------------------------------------------------------
# single steps


def step_batch_admm(p: pm.SplittingProblem, state: IterateState, cfg: SolverConfig,
                    _ctx: Optional[dict] = None) -> IterateState:
    """One plain ADMM sweep: exact x and y minimizations of the augmented
    Lagrangian, then lam <- lam - beta * r."""
    beta = cfg.beta
    zero = ProxMatrix.zero()
    x_new = _batch_x_solve(p, state.x, state.y, state.lam, zero, beta, ctx=_ctx)
    y_new = _y_prox_step(p, x_new, state.y, state.lam, zero, beta)
    r = pm.constraint_residual(p, x_new, y_new)
    lam_new = state.lam - beta * r
    return _advance(state, cfg, x_new, y_new, lam_new, lam_half=state.lam)


def step_batch_spb_scprsm(p: pm.SplittingProblem, state: IterateState,
                          cfg: SolverConfig, _ctx: Optional[dict] = None) -> IterateState:
    """One semi-proximal strictly-contractive PRSM sweep (covers PRSM and
    SCPRSM as the S = T = 0 special cases)."""
    beta = cfg.beta
    x_new = _batch_x_solve(p, state.x, state.y, state.lam, cfg.S, beta, ctx=_ctx)
    lam_half = state.lam - cfg.alpha * beta * (
        apply_map(p.A, x_new) + apply_map(p.B, state.y) - p.b)
    y_new = _y_prox_step(p, x_new, state.y, lam_half, cfg.T, beta)
    lam_new = lam_half - cfg.gamma * beta * pm.constraint_residual(p, x_new, y_new)
    return _advance(state, cfg, x_new, y_new, lam_new, lam_half=lam_half)


def step_sto_spb_scprsm(p: pm.SplittingProblem, state: IterateState,
                        cfg: SolverConfig) -> IterateState:
    """One stochastic semi-proximal step: sample a minibatch, linearize
    theta1 at x_k, solve the proximal x-subproblem, then the two-factor
    multiplier and prox updates."""
    beta = cfg.beta
    eta = schedule_eta(cfg.schedule, state.k + 1)
    if eta <= 0:
        raise NonpositiveEta(f"schedule produced eta={eta}")
    g = _minibatch_subgradient(p, state.x, state.rng, cfg.minibatch)
    if isinstance(p.A, ScaledIdentity) and cfg.S.is_scalar:
        x_new = _sto_x_closed(p, state.x, state.y, state.lam, g, eta, cfg.S.scalar, beta)
    else:
        x_new = _sto_x_linear(p, state.x, state.y, state.lam, g, eta, cfg.S, beta)
    lam_half = state.lam - cfg.alpha * beta * (
        apply_map(p.A, x_new) + apply_map(p.B, state.y) - p.b)
    y_new = _y_prox_step(p, x_new, state.y, lam_half, cfg.T, beta)
    lam_new = lam_half - cfg.gamma * beta * pm.constraint_residual(p, x_new, y_new)
    return _advance(state, cfg, x_new, y_new, lam_new, lam_half=lam_half)


def step_sto_admm(p: pm.SplittingProblem, state: IterateState,
                  cfg: SolverConfig) -> IterateState:
    """One stochastic ADMM step (linearized x-step, y-step against lam_k,
    single multiplier update)."""
    beta = cfg.beta
    eta = schedule_eta(cfg.schedule, state.k + 1)
    if eta <= 0:
        raise NonpositiveEta(f"schedule produced eta={eta}")
    g = _minibatch_subgradient(p, state.x, state.rng, cfg.minibatch)
    if isinstance(p.A, ScaledIdentity):
        c_a = p.A.scale
        num = -g + c_a * state.lam - beta * c_a * (apply_map(p.B, state.y) - p.b) \
            + (1.0 / eta) * state.x
        den = beta * c_a * c_a + 1.0 / eta
        x_new = num / den
    else:
        x_new = _sto_x_linear(p, state.x, state.y, state.lam, g, eta,
                              ProxMatrix.zero(), beta)
    y_new = _y_prox_step(p, x_new, state.y, state.lam, ProxMatrix.zero(), beta)
    lam_new = state.lam - beta * pm.constraint_residual(p, x_new, y_new)
    return _advance(state, cfg, x_new, y_new, lam_new, lam_half=state.lam)


_STEPS = {
    "admm": step_batch_admm,
    "prsm": step_batch_spb_scprsm,
    "scprsm": step_batch_spb_scprsm,
    "spb_scprsm": step_batch_spb_scprsm,
    "sto_admm": step_sto_admm,
    "sto_spb_scprsm": step_sto_spb_scprsm,
}


# ---------------------------------------------------------------------------
# specialized closed-form x-updates (the printed single-sample formulas)


def _scalar_s(cfg: SolverConfig) -> Optional[float]:
    return cfg.S.scalar if cfg.S.is_scalar else None


def x_update_lasso(state: IterateState, cfg: SolverConfig, s: pm.SampleRef,
                   eta: float) -> np.ndarray:
    """Single-sample least-squares x-update in the x - y = 0 encoding:

        ((r_i - d_i'x) d_i + lam + beta y + (s + 1/eta) x) / (beta + s + 1/eta)

    with s the scaled-identity weight of S (the reference setting is S = I,
    s = 1).  An explicit S falls back to the dense stationarity solve.
    Also the group-Lasso x-update, whose smooth term is identical.
    """
    if eta <= 0:
        raise NonpositiveEta(f"eta must be positive, got {eta}")
    beta = cfg.beta
    gterm = (s.response - float(s.row @ state.x)) * s.row
    sc = _scalar_s(cfg)
    if sc is None:
        return _x_update_fallback(state, cfg, -gterm, eta)
    num = gterm + state.lam + beta * state.y + (sc + 1.0 / eta) * state.x
    return num / (beta + sc + 1.0 / eta)


x_update_group_lasso = x_update_lasso


def x_update_logistic(state: IterateState, cfg: SolverConfig, s: pm.SampleRef,
                      eta: float, x0: float = 0.0) -> np.ndarray:
    """Single-sample logistic x-update in the x - y = 0 encoding:

        ((r_i d_i / (1 + exp(r_i (d_i'x + x0))) + lam + beta y + (s + 1/eta) x)
            / (beta + s + 1/eta)

    i.e. minus the sampled logistic subgradient in the numerator.
    """
    if eta <= 0:
        raise NonpositiveEta(f"eta must be positive, got {eta}")
    beta = cfg.beta
    z = s.response * (float(s.row @ state.x) + x0)
    gterm = (s.response * expit(-z)) * s.row
    sc = _scalar_s(cfg)
    if sc is None:
        return _x_update_fallback(state, cfg, -gterm, eta)
    num = gterm + state.lam + beta * state.y + (sc + 1.0 / eta) * state.x
    return num / (beta + sc + 1.0 / eta)


def _x_update_fallback(state: IterateState, cfg: SolverConfig, g, eta: float):
    d = state.x.shape[0]
    mat = cfg.beta * np.eye(d) + (1.0 / eta) * np.eye(d) + cfg.S.dense(d)
    rhs = (1.0 / eta) * state.x + cfg.S.apply(state.x) - g + state.lam \
        + cfg.beta * state.y
    try:
        return np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SubproblemUnsolvable(f"singular x-subproblem system: {exc}") from exc


# ---------------------------------------------------------------------------
# run loops


def _prepare_ctx(p: pm.SplittingProblem, cfg: SolverConfig) -> Optional[dict]:
    """Cache the batch least-squares factorization once per run."""
    if cfg.algorithm not in BATCH_ALGORITHMS or p.theta1_kind != pm.LEAST_SQUARES:
        return None
    s_spec = ProxMatrix.zero() if cfg.algorithm == "admm" else cfg.S
    mat = _ls_normal_matrix(p, s_spec, cfg.beta)
    try:
        chol = sla.cho_factor(mat)
    except np.linalg.LinAlgError:
        return None  # fall back to per-step dense solves
    return {"chol": chol, "dtr": np.asarray(p.design.T @ p.response).ravel()}


def iterate(p: pm.SplittingProblem, cfg: SolverConfig,
            max_steps: Optional[int] = None,
            state: Optional[IterateState] = None) -> Iterator[IterateState]:
    """Yield successive iterate states; validates the config up front.

    Passing a ``state`` resumes from it (its RNG continues where it left
    off), so a run split across calls reproduces the unsplit run exactly.
    """
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid solver config: " + "; ".join(violations))
    step = _STEPS[cfg.algorithm]
    ctx = _prepare_ctx(p, cfg)
    if state is None:
        state = init_state(p, cfg)
    n = cfg.max_iters if max_steps is None else max_steps
    if ctx is not None:
        for _ in range(n):
            state = step(p, state, cfg, _ctx=ctx)
            yield state
    else:
        for _ in range(n):
            state = step(p, state, cfg)
            yield state


def run(p: pm.SplittingProblem, cfg: SolverConfig, max_steps: Optional[int] = None,
        record_states: bool = False, state: Optional[IterateState] = None):
    """Run to the iteration budget; returns (final_state, states or None)."""
    states = [] if record_states else None
    last = state if state is not None else init_state(p, cfg)
    for last in iterate(p, cfg, max_steps=max_steps, state=state):
        if record_states:
            states.append(last)
    return last, states
