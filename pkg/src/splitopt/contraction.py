"""Numerical contraction certificates for the splitting iteration.

Assembles the block matrices that weight the iteration's Lyapunov analysis,

    M = (I        0          )    K = ((1-a)b B'B   (1-a)b B'         )
        (a*b*B    (a+g)*b*I  )        ((1-a)b B     (2-a-g)b I        )

    H = 1/(a+g) * ((a+g-ag)b B'B   -a B'  )      P = (S  0)
                  (-a B            (1/b) I)          (0  T)

    G = (S  0                              0                 )
        (0  T + ((a+g-ag)/(a+g)) b B'B     -(a/(a+g)) B'     )
        (0  -(a/(a+g)) B                   (1/((a+g) b)) I   )

(a = alpha, g = gamma, b = beta), computes the regime constants

    gamma < 1:  c1 = (1 - sqrt(1 - (a+g)(1-g))) / (a+g)
    gamma = 1:  c2 = (1-a)/(1+a)
    gamma > 1:  c2, c3 = delta (g-1) (1-a)/(1+a) and
                tau = (1-a)/(1+a) * min(1 - (g-1)/((1-a) delta),
                      ((g-1)/(a+g)) ((1+a)/(g-1) - (1+a)/(1-a) - delta))
                with delta free in ((g-1)/(1-a), (1+a)/(g-1) - (1+a)/(1-a))

and certifies the matrix identities and inequalities behind them by direct
eigenvalue computation:  M'HM = diag((1-a)b B'B, (a+g)b I)  and, for
gamma < 1,  K - c1 M'HM  positive semidefinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import problems as pm
from .errors import ConfigMismatch, EmptyDeltaInterval, WrongRegime
from .linalg import ScaledIdentity, as_matrix, symmetric_eigenvalues
from .solvers import gamma_upper_bound

GAMMA_EQ_TOL = 1e-12
MTHM_TOL = 1e-10
EIG_TOL = 1e-10

REGIME_LT = "gamma_lt_1"
REGIME_EQ = "gamma_eq_1"
REGIME_GT = "gamma_gt_1"


@dataclass(frozen=True, eq=False)
class ContractionCertificate:
    alpha: float
    gamma: float
    beta: float
    B: np.ndarray
    S: np.ndarray
    T: np.ndarray
    M: np.ndarray
    K: np.ndarray
    H: np.ndarray
    G: np.ndarray
    P: np.ndarray
    MtHM: np.ndarray
    regime: str
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    tau: Optional[float] = None
    delta: Optional[float] = None
    verified: bool = False


def classify_regime(gamma: float) -> str:
    if abs(gamma - 1.0) <= GAMMA_EQ_TOL:
        return REGIME_EQ
    return REGIME_LT if gamma < 1.0 else REGIME_GT


def build_matrices(alpha: float, gamma: float, beta: float, B,
                   S=None, T=None) -> ContractionCertificate:
    """Assemble the certificate matrices for given parameters.

    ``B`` is the m x d2 constraint block; ``S`` (d1 x d1) and ``T``
    (d2 x d2) default to zero matrices of the matching sizes (S defaults to
    the empty 0 x 0 block when omitted, since it only enters P and G).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    ub = gamma_upper_bound(alpha)
    if not 0.0 < gamma < ub:
        raise ValueError(f"gamma must be in (0, {ub:.6g}) for alpha={alpha}, got {gamma}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    B = as_matrix(B, name="B")
    m, d2 = B.shape
    S = np.zeros((0, 0)) if S is None else as_matrix(S, name="S")
    T = np.zeros((d2, d2)) if T is None else as_matrix(T, shape=(d2, d2), name="T")
    d1 = S.shape[0]

    ag = alpha + gamma
    btb = B.T @ B
    i_m = np.eye(m)
    i_d2 = np.eye(d2)

    M = np.block([[i_d2, np.zeros((d2, m))],
                  [alpha * beta * B, ag * beta * i_m]])
    K = np.block([[(1 - alpha) * beta * btb, (1 - alpha) * beta * B.T],
                  [(1 - alpha) * beta * B, (2 - alpha - gamma) * beta * i_m]])
    H = np.block([[(ag - alpha * gamma) * beta * btb, -alpha * B.T],
                  [-alpha * B, (1.0 / beta) * i_m]]) / ag
    P = np.block([[S, np.zeros((d1, d2))],
                  [np.zeros((d2, d1)), T]])
    G = np.block([
        [S, np.zeros((d1, d2)), np.zeros((d1, m))],
        [np.zeros((d2, d1)), T + ((ag - alpha * gamma) / ag) * beta * btb,
         -(alpha / ag) * B.T],
        [np.zeros((m, d1)), -(alpha / ag) * B, (1.0 / (ag * beta)) * i_m],
    ])
    MtHM = M.T @ H @ M
    return ContractionCertificate(
        alpha=alpha, gamma=gamma, beta=beta, B=B, S=S, T=T,
        M=M, K=K, H=H, G=G, P=P, MtHM=MtHM, regime=classify_regime(gamma),
    )


def mthm_expected(cert: ContractionCertificate) -> np.ndarray:
    """diag((1-alpha) beta B'B, (alpha+gamma) beta I)."""
    m, d2 = cert.B.shape
    return np.block([
        [(1 - cert.alpha) * cert.beta * (cert.B.T @ cert.B), np.zeros((d2, m))],
        [np.zeros((m, d2)), (cert.alpha + cert.gamma) * cert.beta * np.eye(m)],
    ])


def mthm_max_deviation(cert: ContractionCertificate) -> float:
    return float(np.abs(cert.MtHM - mthm_expected(cert)).max())


def check_mthm_identity(cert: ContractionCertificate, tol: float = MTHM_TOL) -> bool:
    return mthm_max_deviation(cert) <= tol


def delta_interval(alpha: float, gamma: float) -> tuple[float, float]:
    """Admissible (lo, hi) for the free parameter delta when gamma > 1.

    The interval is nonempty exactly when gamma < gamma_upper_bound(alpha).
    """
    if gamma <= 1.0:
        raise WrongRegime("delta only enters the gamma > 1 regime")
    lo = (gamma - 1.0) / (1.0 - alpha)
    hi = (1.0 + alpha) / (gamma - 1.0) - (1.0 + alpha) / (1.0 - alpha)
    return lo, hi


def compute_constants(cert: ContractionCertificate,
                      delta: Optional[float] = None) -> ContractionCertificate:
    """Fill the regime constants; returns a new certificate.

    For gamma > 1 the free parameter delta defaults to the midpoint of its
    admissible interval (maximizing distance from both failure boundaries);
    an explicit override must lie inside the interval.
    """
    a, g = cert.alpha, cert.gamma
    if cert.regime == REGIME_LT:
        rad = 1.0 - (a + g) * (1.0 - g)
        c1 = (1.0 - math.sqrt(max(rad, 0.0))) / (a + g)
        return replace(cert, c1=c1)
    if cert.regime == REGIME_EQ:
        return replace(cert, c2=(1.0 - a) / (1.0 + a))
    lo, hi = delta_interval(a, g)
    if not lo < hi:
        raise EmptyDeltaInterval(
            f"no admissible delta for alpha={a}, gamma={g} (interval ({lo:.6g}, {hi:.6g}))"
        )
    if delta is None:
        delta = 0.5 * (lo + hi)
    elif not lo < delta < hi:
        raise ValueError(f"delta={delta} outside admissible interval ({lo:.6g}, {hi:.6g})")
    c2 = (1.0 - a) / (1.0 + a)
    c3 = delta * (g - 1.0) * (1.0 - a) / (1.0 + a)
    tau = c2 * min(
        1.0 - (g - 1.0) / ((1.0 - a) * delta),
        ((g - 1.0) / (a + g)) * ((1.0 + a) / (g - 1.0) - (1.0 + a) / (1.0 - a) - delta),
    )
    return replace(cert, c2=c2, c3=c3, tau=tau, delta=delta)


def contraction_margin(cert: ContractionCertificate,
                       c1: Optional[float] = None) -> float:
    """Smallest eigenvalue of K - c1 * M'HM (gamma < 1 regime)."""
    if cert.regime != REGIME_LT:
        raise WrongRegime(
            "the K-c1*M'HM certificate applies only when gamma < 1; "
            "gamma >= 1 regimes are certified by Lyapunov monitoring"
        )
    if c1 is None:
        if cert.c1 is None:
            raise ValueError("constants not computed; call compute_constants first")
        c1 = cert.c1
    eigs = symmetric_eigenvalues(cert.K - c1 * cert.MtHM)
    return float(eigs[0])


def verify_contraction(cert: ContractionCertificate, tol: float = EIG_TOL) -> bool:
    """True iff K - c1 M'HM is PSD up to -tol."""
    return contraction_margin(cert) >= -tol


def g_eigmin(cert: ContractionCertificate) -> float:
    return float(symmetric_eigenvalues(cert.G)[0])


def certify(alpha: float, gamma: float, beta: float, B, S=None, T=None,
            delta: Optional[float] = None) -> ContractionCertificate:
    """Build matrices, compute constants and run every applicable check."""
    cert = compute_constants(build_matrices(alpha, gamma, beta, B, S=S, T=T),
                             delta=delta)
    ok = check_mthm_identity(cert) and g_eigmin(cert) >= -EIG_TOL
    if cert.regime == REGIME_LT:
        ok = ok and verify_contraction(cert)
    return replace(cert, verified=ok)


def certificate_summary(cert: ContractionCertificate) -> dict:
    """JSON-ready summary with the eigenvalue margins."""
    out = {
        "schema_version": 1,
        "alpha": cert.alpha,
        "gamma": cert.gamma,
        "beta": cert.beta,
        "regime": cert.regime,
        "constants": {k: getattr(cert, k) for k in ("c1", "c2", "c3", "tau", "delta")
                      if getattr(cert, k) is not None},
        "checks": {
            "mthm_max_deviation": mthm_max_deviation(cert),
            "mthm_identity": check_mthm_identity(cert),
            "g_eigmin": g_eigmin(cert),
            "g_psd": g_eigmin(cert) >= -EIG_TOL,
        },
        "verified": cert.verified,
    }
    if cert.regime == REGIME_LT and cert.c1 is not None:
        out["checks"]["contraction_margin"] = contraction_margin(cert)
        out["checks"]["contraction"] = verify_contraction(cert)
    return out


# ---------------------------------------------------------------------------
# Lyapunov monitoring


def _weighted_sq(vec: np.ndarray, mat: np.ndarray) -> float:
    return float(vec @ mat @ vec)


def potential_at(problem: pm.SplittingProblem, cert: ContractionCertificate,
                 w_star, x, y, lam, y_prev=None) -> float:
    """Lyapunov potential at a single iterate (see lyapunov_trace)."""
    xs, ys, ls = w_star
    dev = np.concatenate([x - np.asarray(xs, dtype=float).ravel(),
                          y - np.asarray(ys, dtype=float).ravel(),
                          lam - np.asarray(ls, dtype=float).ravel()])
    phi = _weighted_sq(dev, cert.G)
    if cert.regime in (REGIME_EQ, REGIME_GT):
        if cert.c2 is None:
            raise ValueError("constants not computed; call compute_constants first")
        dy = np.zeros_like(y) if y_prev is None else y - y_prev
        phi += cert.c2 * _weighted_sq(dy, cert.T)
    if cert.regime == REGIME_GT:
        r = pm.constraint_residual(problem, x, y)
        phi += cert.c3 * cert.beta * float(r @ r)
    return phi


def lyapunov_trace(problem: pm.SplittingProblem, config, states: Sequence,
                   cert: ContractionCertificate, w_star) -> np.ndarray:
    """Per-iterate Lyapunov potential along a recorded run.

    Potential by regime (w = (x, y, lam), deviations from the reference
    point ``w_star``):

        gamma < 1:  ||w_k - w*||_G^2
        gamma = 1:  + c2 ||y_k - y_{k-1}||_T^2
        gamma > 1:  + c2 ||y_k - y_{k-1}||_T^2 + c3 beta ||r_k||^2

    ``states`` is a sequence of IterateState (or (x, y, lam) triples) from a
    deterministic batch run whose parameters match the certificate; the
    stochastic solvers satisfy the descent only in expectation, so monitoring
    them is advisory.
    """
    if (config.alpha, config.gamma, config.beta) != (cert.alpha, cert.gamma, cert.beta):
        raise ConfigMismatch(
            f"run has (alpha, gamma, beta)=({config.alpha}, {config.gamma}, {config.beta}), "
            f"certificate has ({cert.alpha}, {cert.gamma}, {cert.beta})"
        )
    b_run = problem.B.dense() if isinstance(problem.B, ScaledIdentity) else np.asarray(problem.B)
    if b_run.shape != cert.B.shape or not np.allclose(b_run, cert.B, atol=1e-12):
        raise ConfigMismatch("problem constraint block B differs from the certificate's")
    if cert.regime != REGIME_LT and cert.c2 is None:
        raise ValueError("constants not computed; call compute_constants first")

    phis = []
    y_prev = None
    for st in states:
        if hasattr(st, "x"):
            x, y, lam = st.x, st.y, st.lam
        else:
            x, y, lam = st
        phis.append(potential_at(problem, cert, w_star, x, y, lam, y_prev=y_prev))
        y_prev = y
    return np.asarray(phis)


def count_descent_violations(phis, slack: float = 0.0, start: int = 1) -> int:
    """Number of indices k >= start with phi_{k+1} > phi_k + slack."""
    phis = np.asarray(phis, dtype=float)
    if phis.size <= start + 1:
        return 0
    diffs = phis[start + 1:] - phis[start:-1]
    return int(np.sum(diffs > slack))
