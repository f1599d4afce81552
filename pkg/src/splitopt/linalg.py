"""Small dense linear algebra: validated arrays, weighted norms, PSD checks,
and the shrinkage operators every solver consumes.

All functions are pure and operate on float64 numpy arrays; validated inputs
are never mutated, so values can be shared freely across concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidPartition,
    NegativeThreshold,
    NonFiniteEntries,
    NotPositiveSemidefiniteQuadraticForm,
    NotSquare,
    NotSymmetric,
)

# Absolute slack for quadratic-form nonnegativity; double-precision
# accumulation error at the matrix sizes this toolkit handles.
EPS_PSD = 1e-10

# Relative tolerance for symmetry checks.
SYM_RTOL = 1e-12


def as_vector(v, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and return ``v`` as a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"{name} has dim {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries(f"{name} contains NaN or Inf")
    return arr


def as_matrix(a, shape: tuple[int, int] | None = None, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class ScaledIdentity:
    """Lightweight c * I_n used for constraint maps so built-in models never
    materialize d x d identity blocks."""

    scale: float
    dim: int

    @property
    def shape(self):
        return (self.dim, self.dim)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.scale * v

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.scale * v

    def dense(self) -> np.ndarray:
        return self.scale * np.eye(self.dim)


def apply_map(op, v: np.ndarray) -> np.ndarray:
    """Apply a constraint map (ndarray or ScaledIdentity) to a vector."""
    if isinstance(op, ScaledIdentity):
        return op.matvec(v)
    return op @ v


def apply_map_t(op, v: np.ndarray) -> np.ndarray:
    """Apply the transpose of a constraint map to a vector."""
    if isinstance(op, ScaledIdentity):
        return op.rmatvec(v)
    return op.T @ v


def check_symmetric(g: np.ndarray, name: str = "matrix") -> np.ndarray:
    g = as_matrix(g, name=name)
    if g.shape[0] != g.shape[1]:
        raise NotSquare(f"{name} has shape {g.shape}")
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() > SYM_RTOL * scale:
        raise NotSymmetric(f"{name} is not symmetric to relative tol {SYM_RTOL:g}")
    return g


def weighted_norm(v, g) -> float:
    """G-weighted norm sqrt(v' G v) for symmetric positive semidefinite G.

    Small negative quadratic-form values (down to -EPS_PSD) are clamped to
    zero; anything more negative raises.
    """
    g = check_symmetric(g, name="G")
    v = as_vector(v, dim=g.shape[0], name="v")
    q = float(v @ g @ v)
    if q < -EPS_PSD:
        raise NotPositiveSemidefiniteQuadraticForm(
            f"v'Gv = {q:.3e} below -{EPS_PSD:g}"
        )
    return float(np.sqrt(max(q, 0.0)))


def symmetric_eigenvalues(g) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    g = check_symmetric(g, name="G")
    return np.linalg.eigvalsh(g)


def is_psd(g, tol: float = EPS_PSD) -> bool:
    """True iff the smallest eigenvalue of symmetric ``g`` is >= -tol."""
    eigs = symmetric_eigenvalues(g)
    if eigs.size == 0:
        return True
    return bool(eigs[0] >= -tol)


def soft_threshold(v, a: float) -> np.ndarray:
    """Componentwise shrinkage: v_i -> sign(v_i) * max(|v_i| - a, 0).

    This is the proximal operator of a * ||.||_1.
    """
    if a < 0:
        raise NegativeThreshold(f"threshold {a} < 0")
    v = as_vector(v, name="v")
    return np.sign(v) * np.maximum(np.abs(v) - a, 0.0)


def check_partition(blocks, dim: int) -> list[np.ndarray]:
    """Validate that ``blocks`` partitions range(dim); returns index arrays."""
    out = []
    for b in blocks:
        idx = np.asarray(b, dtype=np.intp)
        if idx.ndim != 1:
            raise InvalidPartition("each block must be a 1-D index list")
        out.append(idx)
    if out:
        allidx = np.concatenate(out)
    else:
        allidx = np.empty(0, dtype=np.intp)
    if allidx.size != dim or not np.array_equal(np.sort(allidx), np.arange(dim)):
        raise InvalidPartition(
            f"blocks must be disjoint and cover all {dim} indices"
        )
    return out


def block_soft_threshold(v, blocks, a: float) -> np.ndarray:
    """Groupwise shrinkage: v_b -> max(0, 1 - a/||v_b||_2) * v_b per block.

    Proximal operator of a * sum of block Euclidean norms; an all-zero block
    stays zero.
    """
    if a < 0:
        raise NegativeThreshold(f"threshold {a} < 0")
    v = as_vector(v, name="v")
    blocks = check_partition(blocks, v.shape[0])
    out = np.empty_like(v)
    for idx in blocks:
        vb = v[idx]
        if idx.size == 1:
            # singleton blocks reduce to scalar soft thresholding exactly
            out[idx] = np.sign(vb) * np.maximum(np.abs(vb) - a, 0.0)
            continue
        nrm = float(np.linalg.norm(vb))
        if nrm == 0.0:
            out[idx] = 0.0
        else:
            out[idx] = max(0.0, 1.0 - a / nrm) * vb
    return out
