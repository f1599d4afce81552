"""Synthetic dataset generators and LIBSVM-format text IO.

Generators are deterministic given their seed (fixed draw order, one
generator instance per call), so repeated calls are bitwise identical.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import BadDimensions, EmptyFile, NonIncreasingIndices, ParseError

REGRESSION = "regression"
BINARY = "binary"

# below this nonzero density a parsed design matrix stays sparse
SPARSE_DENSITY_CUTOFF = 0.10

_TOKEN = re.compile(r"\S+")


@dataclass
class Dataset:
    """Design matrix (dense or CSR), responses, and optional ground truth."""

    D: object
    r: np.ndarray
    kind: str = REGRESSION
    ground_truth: Optional[np.ndarray] = None
    groups: Optional[list] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def d(self) -> int:
        return self.D.shape[1]

    def __post_init__(self):
        if self.r.shape[0] != self.D.shape[0]:
            raise BadDimensions(
                f"{self.r.shape[0]} responses for {self.D.shape[0]} rows")
        if self.kind == BINARY and not np.all(np.isin(self.r, (-1.0, 1.0))):
            raise ValueError("binary responses must be in {-1, +1}")


def _normalize_rows(D: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(D, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return D / norms


def gen_lasso(n: int, d: int, nnz: int = 100, noise_var: float = 1e-3,
              seed: int = 0, normalize_rows: bool = False):
    """Gaussian design, sparse ground truth, r = D xbar + noise.

    Returns ``(Dataset, mu)`` with mu = 0.1 * ||D'r||_inf computed from the
    generated data.  ``noise_var`` is the variance of the N(0, noise_var I)
    noise.  Row normalization is off by default for regression data.
    """
    if n < 1 or d < 1 or not 0 <= nnz <= d or noise_var < 0:
        raise BadDimensions(f"bad generator arguments n={n}, d={d}, nnz={nnz}, "
                            f"noise_var={noise_var}")
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, d))
    if normalize_rows:
        D = _normalize_rows(D)
    xbar = np.zeros(d)
    support = rng.choice(d, size=nnz, replace=False)
    xbar[support] = rng.standard_normal(nnz)
    eps = rng.normal(0.0, np.sqrt(noise_var), n)
    r = D @ xbar + eps
    mu = 0.1 * float(np.abs(D.T @ r).max())
    ds = Dataset(D=D, r=r, kind=REGRESSION, ground_truth=xbar,
                 meta={"generator": "lasso", "seed": seed, "n": n, "d": d,
                       "nnz": nnz, "noise_var": noise_var,
                       "normalize_rows": normalize_rows, "mu": mu})
    return ds, mu


def gen_group_lasso(n: int = 200, n_groups: int = 10, max_block: int = 50,
                    frac_nnz: float = 0.05, noise_var: float = 1e-3,
                    seed: int = 0, normalize_rows: bool = False):
    """Grouped design: block sizes i.i.d. uniform on {1..max_block}.

    Per block, round(frac_nnz * size) uniformly-placed ground-truth entries
    are standard normal, the rest zero (small blocks can be entirely zero).
    Returns ``(Dataset, mu)`` with mu = 0.1 * max_g ||(D'r)_g||_inf, which
    reads the per-group quantity as a subvector of D'r; the max over groups
    of a per-group max makes this algebraically equal to 0.1 ||D'r||_inf.
    """
    if n < 1 or n_groups < 1 or max_block < 1 or not 0 <= frac_nnz <= 1:
        raise BadDimensions(f"bad generator arguments n={n}, n_groups={n_groups}, "
                            f"max_block={max_block}, frac_nnz={frac_nnz}")
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, max_block + 1, size=n_groups)
    d = int(sizes.sum())
    groups = []
    start = 0
    for sz in sizes:
        groups.append(np.arange(start, start + int(sz)))
        start += int(sz)
    D = rng.standard_normal((n, d))
    if normalize_rows:
        D = _normalize_rows(D)
    xbar = np.zeros(d)
    for g in groups:
        k = int(round(frac_nnz * len(g)))
        if k > 0:
            pos = rng.choice(len(g), size=k, replace=False)
            xbar[g[pos]] = rng.standard_normal(k)
    eps = rng.normal(0.0, np.sqrt(noise_var), n)
    r = D @ xbar + eps
    dtr = D.T @ r
    mu = 0.1 * float(max(np.abs(dtr[g]).max() for g in groups))
    ds = Dataset(D=D, r=r, kind=REGRESSION, ground_truth=xbar, groups=groups,
                 meta={"generator": "group_lasso", "seed": seed, "n": n,
                       "n_groups": n_groups, "max_block": max_block,
                       "frac_nnz": frac_nnz, "noise_var": noise_var,
                       "normalize_rows": normalize_rows, "mu": mu,
                       "block_sizes": [int(s) for s in sizes]})
    return ds, mu


def gen_logistic(n: int, d: int, nnz: int = 100, seed: int = 0,
                 normalize_rows: bool = True):
    """Binary labels r = sign(D xbar + noise) with sign(0) -> +1.

    Rows are normalized to unit Euclidean norm by default (the
    per-sample-loss reading of a "normalized" design).  Returns
    ``(Dataset, mu)`` with the fixed mu = 1.
    """
    if n < 1 or d < 1 or not 0 <= nnz <= d:
        raise BadDimensions(f"bad generator arguments n={n}, d={d}, nnz={nnz}")
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, d))
    if normalize_rows:
        D = _normalize_rows(D)
    xbar = np.zeros(d)
    support = rng.choice(d, size=nnz, replace=False)
    xbar[support] = rng.standard_normal(nnz)
    eps = rng.normal(0.0, np.sqrt(1e-3), n)
    z = D @ xbar + eps
    labels = np.where(z >= 0.0, 1.0, -1.0)
    ds = Dataset(D=D, r=labels, kind=BINARY, ground_truth=xbar,
                 meta={"generator": "logistic", "seed": seed, "n": n, "d": d,
                       "nnz": nnz, "normalize_rows": normalize_rows, "mu": 1.0})
    return ds, 1.0


# ---------------------------------------------------------------------------
# LIBSVM text format


def read_libsvm(path, kind: str = REGRESSION, n_features: Optional[int] = None) -> Dataset:
    """Parse ``<label> <idx>:<val> ...`` lines (1-based, strictly increasing
    indices per line).

    The feature dimension is the maximum index seen unless ``n_features``
    overrides it (it may only enlarge).  The design matrix is stored sparse
    when its density is below 10%.  With ``kind="binary"``, two-valued labels
    are mapped onto {-1, +1} (smaller value to -1).
    """
    labels = []
    rows, cols, vals = [], [], []
    max_idx = 0
    n_lines = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = list(_TOKEN.finditer(line))
            if not tokens:
                continue
            row_id = n_lines
            n_lines += 1
            first = tokens[0]
            try:
                labels.append(float(first.group()))
            except ValueError:
                raise ParseError(lineno, first.start() + 1,
                                 f"bad label {first.group()!r}") from None
            prev_idx = 0
            for tok in tokens[1:]:
                text = tok.group()
                col = tok.start() + 1
                idx_s, sep, val_s = text.partition(":")
                if not sep:
                    raise ParseError(lineno, col, f"expected idx:value, got {text!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise ParseError(lineno, col, f"bad feature index {idx_s!r}") from None
                if idx < 1:
                    raise ParseError(lineno, col, f"feature index {idx} must be >= 1")
                if idx <= prev_idx:
                    raise NonIncreasingIndices(
                        lineno, col, f"index {idx} after {prev_idx} (must increase)")
                try:
                    val = float(val_s)
                except ValueError:
                    raise ParseError(lineno, col + len(idx_s) + 1,
                                     f"bad feature value {val_s!r}") from None
                prev_idx = idx
                max_idx = max(max_idx, idx)
                rows.append(row_id)
                cols.append(idx - 1)
                vals.append(val)
    if n_lines == 0:
        raise EmptyFile(f"{path} contains no data lines")

    d = max_idx if n_features is None else int(n_features)
    if d < max_idx:
        raise ParseError(0, 0, f"n_features={d} smaller than max index {max_idx}")
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n_lines, d), dtype=np.float64)
    density = mat.nnz / max(n_lines * d, 1)
    D = mat if density < SPARSE_DENSITY_CUTOFF and d > 0 else mat.toarray()

    r = np.asarray(labels, dtype=np.float64)
    if kind == BINARY:
        uniq = np.unique(r)
        if set(uniq.tolist()) <= {-1.0, 1.0}:
            pass
        elif uniq.size == 2:
            r = np.where(r == uniq[0], -1.0, 1.0)
        else:
            raise ValueError(
                f"binary labels requested but file has {uniq.size} distinct values")
    return Dataset(D=D, r=r, kind=kind, meta={"path": str(path)})


def write_libsvm(ds: Dataset, path) -> None:
    """Write in the same text format; 17 significant digits round-trip doubles."""
    D = ds.D
    sparse = sp.issparse(D)
    if sparse:
        D = D.tocsr()
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            parts = [f"{ds.r[i]:.17g}"]
            if sparse:
                start, end = D.indptr[i], D.indptr[i + 1]
                for j, v in zip(D.indices[start:end], D.data[start:end]):
                    parts.append(f"{j + 1}:{v:.17g}")
            else:
                row = D[i]
                for j in np.nonzero(row)[0]:
                    parts.append(f"{j + 1}:{row[j]:.17g}")
            fh.write(" ".join(parts) + "\n")


def write_manifest(path, manifest: dict) -> None:
    payload = {"schema_version": 1, **manifest}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
