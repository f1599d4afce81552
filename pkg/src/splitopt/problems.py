"""Splitting-problem abstraction: two convex terms coupled by Ax + By = b.

The smooth term theta1 is served through per-sample subgradient oracles (one
row of a design matrix at a time) and the nonsmooth term theta2 through a
proximal oracle.  Built-in models: least-squares + l1 (Lasso), least-squares
+ group l2 (Group Lasso) and logistic + l1, all in the x - y = 0 encoding
(A = I, B = -I, b = 0).  Custom models register their own callables.

Scale conventions for the built-in least-squares models:

* ``objective`` reports the sum-form value 0.5 * ||D x - r||^2 (+ ridge and
  penalty terms), i.e. the model as usually written for batch solvers.
* per-sample values and subgradients are the unscaled single-row quantities
  0.5 * (d_i' x - r_i)^2, whose expectation over a uniform row is 1/n of the
  sum-form loss.  Stochastic solvers consume these as-is, so the problem a
  stochastic run optimizes weighs ``mu`` against the mean loss, not the sum.
  Pick ``mu`` accordingly (the bench layer divides a sum-scale mu by n).

For logistic models the objective is the mean log-loss, so the per-sample
and full-data conventions already agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    NonpositiveScale,
    UnsupportedTheta1,
    UnsupportedTheta2,
)
from .linalg import (
    ScaledIdentity,
    apply_map,
    as_vector,
    block_soft_threshold,
    check_partition,
    soft_threshold,
)

LEAST_SQUARES = "least-squares"
LOGISTIC = "logistic"
CUSTOM = "custom"

L1 = "l1"
GROUP_L2 = "group-l2"


@dataclass(frozen=True)
class SampleRef:
    """One training sample: its index, dense design row and response."""

    index: int
    row: np.ndarray
    response: float


@dataclass
class SplittingProblem:
    d1: int
    d2: int
    m: int
    A: object
    B: object
    b: np.ndarray
    n_samples: int
    theta1_kind: str
    theta2_kind: str
    mu: float
    groups: Optional[list] = None
    design: object = None
    response: Optional[np.ndarray] = None
    intercept: float = 0.0
    ridge: float = 0.0
    theta1_subgrad_fn: Optional[Callable] = None
    theta1_value_fn: Optional[Callable] = None
    theta2_prox_fn: Optional[Callable] = None
    theta2_value_fn: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.b = as_vector(self.b, dim=self.m, name="b")
        for name, op, shape in (("A", self.A, (self.m, self.d1)),
                                ("B", self.B, (self.m, self.d2))):
            if isinstance(op, ScaledIdentity):
                if op.shape != shape:
                    raise DimensionMismatch(f"{name} has shape {op.shape}, expected {shape}")
            else:
                arr = np.asarray(op, dtype=np.float64)
                if arr.shape != shape:
                    raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
        if (self.groups is not None) != (self.theta2_kind == GROUP_L2):
            raise ValueError("groups must be given exactly when theta2_kind is group-l2")
        if self.groups is not None:
            self.groups = check_partition(self.groups, self.d2)
        if self.theta1_kind in (LEAST_SQUARES, LOGISTIC):
            if self.design is None or self.response is None:
                raise ValueError(f"{self.theta1_kind} model needs design and response")
            n, d = self.design.shape
            if n != self.n_samples or d != self.d1:
                raise DimensionMismatch(
                    f"design is {self.design.shape}, expected ({self.n_samples}, {self.d1})"
                )
            self.response = as_vector(self.response, dim=n, name="response")


def _identity_encoding(d: int):
    return ScaledIdentity(1.0, d), ScaledIdentity(-1.0, d), np.zeros(d)


def lasso_problem(design, response, mu: float, ridge: float = 0.0) -> SplittingProblem:
    """Least-squares + mu * ||y||_1 under x - y = 0; optional ridge term."""
    n, d = design.shape
    A, B, b = _identity_encoding(d)
    return SplittingProblem(
        d1=d, d2=d, m=d, A=A, B=B, b=b, n_samples=n,
        theta1_kind=LEAST_SQUARES, theta2_kind=L1, mu=mu,
        design=design, response=np.asarray(response, dtype=np.float64),
        ridge=ridge,
    )


def group_lasso_problem(design, response, mu: float, groups: Sequence,
                        ridge: float = 0.0) -> SplittingProblem:
    """Least-squares + mu * sum of group l2 norms under x - y = 0."""
    n, d = design.shape
    A, B, b = _identity_encoding(d)
    return SplittingProblem(
        d1=d, d2=d, m=d, A=A, B=B, b=b, n_samples=n,
        theta1_kind=LEAST_SQUARES, theta2_kind=GROUP_L2, mu=mu,
        groups=list(groups),
        design=design, response=np.asarray(response, dtype=np.float64),
        ridge=ridge,
    )


def logistic_problem(design, response, mu: float, intercept: float = 0.0) -> SplittingProblem:
    """Mean logistic loss + mu * ||y||_1 under x - y = 0.

    The intercept is a fixed constant (never updated; default 0).
    """
    n, d = design.shape
    A, B, b = _identity_encoding(d)
    return SplittingProblem(
        d1=d, d2=d, m=d, A=A, B=B, b=b, n_samples=n,
        theta1_kind=LOGISTIC, theta2_kind=L1, mu=mu,
        design=design, response=np.asarray(response, dtype=np.float64),
        intercept=intercept,
    )


def custom_problem(d1, d2, m, A, B, b, n_samples,
                   theta1_subgrad, theta2_prox,
                   theta1_value=None, theta2_value=None) -> SplittingProblem:
    """Problem with registered oracles.

    ``theta1_subgrad(x, index) -> array`` is the per-sample subgradient,
    ``theta2_prox(v, scale) -> array`` solves argmin theta2(u) +
    (scale/2)||u - v||^2.  Value callables are optional and only needed for
    objective reporting.
    """
    return SplittingProblem(
        d1=d1, d2=d2, m=m, A=A, B=B, b=np.asarray(b, dtype=np.float64),
        n_samples=n_samples, theta1_kind=CUSTOM, theta2_kind=CUSTOM, mu=0.0,
        theta1_subgrad_fn=theta1_subgrad, theta2_prox_fn=theta2_prox,
        theta1_value_fn=theta1_value, theta2_value_fn=theta2_value,
    )


def sample(p: SplittingProblem, index: int) -> SampleRef:
    """Materialize one training sample as a dense row.

    Custom problems carry no design matrix; their oracles work from the
    index, so the SampleRef holds a zero placeholder row.
    """
    if p.n_samples == 0:
        raise EmptyDataset("problem has no samples")
    if not 0 <= index < p.n_samples:
        raise IndexError(f"sample index {index} out of range [0, {p.n_samples})")
    if p.design is None:
        return SampleRef(index=index, row=np.zeros(p.d1), response=0.0)
    row = p.design[index]
    if sp.issparse(row):
        row = np.asarray(row.todense()).ravel()
    else:
        row = np.asarray(row, dtype=np.float64).ravel()
    return SampleRef(index=index, row=row, response=float(p.response[index]))


def _design_matvec(p, x):
    return p.design @ x


def theta1_value(p: SplittingProblem, x: np.ndarray) -> float:
    """Full-data smooth term.

    Least-squares: 0.5||Dx - r||^2 + (n * ridge / 2)||x||^2 (sum over rows).
    Logistic: mean of log(1 + exp(-r_i (d_i'x + x0))).
    """
    x = as_vector(x, dim=p.d1, name="x")
    if p.theta1_kind == LEAST_SQUARES:
        resid = _design_matvec(p, x) - p.response
        val = 0.5 * float(resid @ resid)
        if p.ridge:
            val += 0.5 * p.n_samples * p.ridge * float(x @ x)
        return val
    if p.theta1_kind == LOGISTIC:
        z = p.response * (_design_matvec(p, x) + p.intercept)
        return float(np.mean(np.logaddexp(0.0, -z)))
    if p.theta1_value_fn is None:
        raise UnsupportedTheta1("custom theta1 has no registered value oracle")
    return float(p.theta1_value_fn(x))


def theta2_value(p: SplittingProblem, y: np.ndarray) -> float:
    y = as_vector(y, dim=p.d2, name="y")
    if p.theta2_kind == L1:
        return p.mu * float(np.abs(y).sum())
    if p.theta2_kind == GROUP_L2:
        return p.mu * float(sum(np.linalg.norm(y[g]) for g in p.groups))
    if p.theta2_value_fn is None:
        raise UnsupportedTheta2("custom theta2 has no registered value oracle")
    return float(p.theta2_value_fn(y))


def objective(p: SplittingProblem, x: np.ndarray, y: np.ndarray) -> float:
    """Full-data theta1(x) + theta2(y)."""
    return theta1_value(p, x) + theta2_value(p, y)


def theta1_sample_value(p: SplittingProblem, x: np.ndarray, s: SampleRef) -> float:
    """Single-sample smooth loss (unscaled)."""
    x = as_vector(x, dim=p.d1, name="x")
    if p.theta1_kind == LEAST_SQUARES:
        resid = float(s.row @ x) - s.response
        val = 0.5 * resid * resid
        if p.ridge:
            val += 0.5 * p.ridge * float(x @ x)
        return val
    if p.theta1_kind == LOGISTIC:
        z = s.response * (float(s.row @ x) + p.intercept)
        return float(np.logaddexp(0.0, -z))
    if p.theta1_value_fn is None:
        raise UnsupportedTheta1("custom theta1 has no registered value oracle")
    return float(p.theta1_value_fn(x, s.index))


def theta1_subgradient(p: SplittingProblem, x: np.ndarray, s: SampleRef) -> np.ndarray:
    """Per-sample subgradient of theta1 at x.

    Least-squares: (d'x - r) d (+ ridge * x); logistic:
    -r d / (1 + exp(r (d'x + x0))).
    """
    x = as_vector(x, dim=p.d1, name="x")
    if p.theta1_kind == LEAST_SQUARES:
        g = (float(s.row @ x) - s.response) * s.row
        if p.ridge:
            g = g + p.ridge * x
        return g
    if p.theta1_kind == LOGISTIC:
        z = s.response * (float(s.row @ x) + p.intercept)
        return (-s.response * expit(-z)) * s.row
    if p.theta1_subgrad_fn is None:
        raise UnsupportedTheta1("custom theta1 has no registered subgradient oracle")
    return as_vector(p.theta1_subgrad_fn(x, s.index), dim=p.d1, name="theta1 subgradient")


def theta1_full_gradient(p: SplittingProblem, x: np.ndarray) -> np.ndarray:
    """Gradient of the full-data smooth term (same scale as theta1_value)."""
    x = as_vector(x, dim=p.d1, name="x")
    if p.theta1_kind == LEAST_SQUARES:
        resid = _design_matvec(p, x) - p.response
        g = p.design.T @ resid
        g = np.asarray(g).ravel()
        if p.ridge:
            g = g + p.n_samples * p.ridge * x
        return g
    if p.theta1_kind == LOGISTIC:
        z = p.response * (_design_matvec(p, x) + p.intercept)
        w = -p.response * expit(-z) / p.n_samples
        return np.asarray(p.design.T @ w).ravel()
    raise UnsupportedTheta1("custom theta1 has no full gradient oracle")


def theta2_prox(p: SplittingProblem, v: np.ndarray, scale: float) -> np.ndarray:
    """argmin_u theta2(u) + (scale/2) ||u - v||^2."""
    if scale <= 0:
        raise NonpositiveScale(f"scale {scale} must be positive")
    v = as_vector(v, dim=p.d2, name="v")
    if p.theta2_kind == L1:
        return soft_threshold(v, p.mu / scale)
    if p.theta2_kind == GROUP_L2:
        return block_soft_threshold(v, p.groups, p.mu / scale)
    if p.theta2_prox_fn is None:
        raise UnsupportedTheta2("custom theta2 has no registered prox oracle")
    return as_vector(p.theta2_prox_fn(v, scale), dim=p.d2, name="theta2 prox")


def constraint_residual(p: SplittingProblem, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Ax + By - b."""
    x = as_vector(x, dim=p.d1, name="x")
    y = as_vector(y, dim=p.d2, name="y")
    return apply_map(p.A, x) + apply_map(p.B, y) - p.b
