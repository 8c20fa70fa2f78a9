"""Triplet accumulation, CSR storage and direct solves.

CSR matrices are plain :class:`scipy.sparse.csr_matrix` objects with sorted
indices and no duplicate entries; this module only adds the checks and error
reporting the solver pipeline relies on.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, InvalidIndex, SingularMatrix

log = logging.getLogger(__name__)


@dataclass
class Triplets:
    """COO-style accumulator; duplicates are summed by :func:`to_csr`."""

    n: int
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def add(self, rows, cols, values) -> None:
        self.rows.append(np.asarray(rows, dtype=np.int64).ravel())
        self.cols.append(np.asarray(cols, dtype=np.int64).ravel())
        self.values.append(np.asarray(values, dtype=float).ravel())

    def add_blocks(self, row_dofs, col_dofs, blocks) -> None:
        """Scatter dense blocks: ``blocks[e, a, b]`` goes to ``(row_dofs[e, a], col_dofs[e, b])``."""
        row_dofs = np.asarray(row_dofs)
        col_dofs = np.asarray(col_dofs)
        na, nb = blocks.shape[1:]
        self.add(
            np.broadcast_to(row_dofs[:, :, None], (len(row_dofs), na, nb)),
            np.broadcast_to(col_dofs[:, None, :], (len(col_dofs), na, nb)),
            blocks,
        )

    def arrays(self):
        if not self.rows:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        return np.concatenate(self.rows), np.concatenate(self.cols), np.concatenate(self.values)


def to_csr(triplets: Triplets) -> sp.csr_matrix:
    rows, cols, vals = triplets.arrays()
    n = triplets.n
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise InvalidIndex(f"triplet index outside [0, {n})")
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def add(A: sp.csr_matrix, B: sp.csr_matrix) -> sp.csr_matrix:
    if A.shape != B.shape:
        raise DimensionMismatch(f"cannot add {A.shape} and {B.shape}")
    C = (A + B).tocsr()
    C.sort_indices()
    return C


def matvec(A: sp.csr_matrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by vector of shape {x.shape}")
    return A @ x


def defect_bound(A, x, rhs) -> float:
    """Acceptable residual ``1e-10 (||A||_F ||x||_2 + ||rhs||_2)``."""
    return 1e-10 * (spla.norm(A, "fro") * np.linalg.norm(x) + np.linalg.norm(rhs))


def direct_solve(A, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` with sparse LU (SuperLU, partial pivoting).

    Raises :class:`SingularMatrix` with the offending pivot index when a pivot
    of U vanishes to working precision.
    """
    A = sp.csc_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    n = A.shape[0]
    if A.shape[1] != n or rhs.shape != (n,):
        raise DimensionMismatch(f"cannot solve {A.shape} system with rhs of shape {rhs.shape}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            lu = spla.splu(A)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        pivot = _dense_zero_pivot(A)
        raise SingularMatrix(f"matrix is singular (pivot {pivot}): {exc}", pivot=pivot) from exc
    pivots = np.abs(lu.U.diagonal())
    scale = pivots.max() if pivots.size else 0.0
    tiny = np.flatnonzero(pivots <= n * np.finfo(float).eps * scale)
    if scale == 0.0 or tiny.size:
        # pivot index reported in the original column ordering
        col = int(np.argsort(lu.perm_c)[tiny[0]]) if tiny.size else 0
        raise SingularMatrix(f"zero pivot at column {col}", pivot=col)
    x = lu.solve(rhs)
    r = A @ x - rhs
    defect = float(np.abs(r).max()) if n else 0.0
    log.debug("direct solve: n=%d, defect_inf=%.3e", n, defect)
    if n and np.linalg.norm(r) > defect_bound(A, x, rhs):
        log.warning("direct solve defect %.3e exceeds bound %.3e", np.linalg.norm(r), defect_bound(A, x, rhs))
    return x


def _dense_zero_pivot(A, max_n=4000):
    """Locate the first vanishing pivot with dense partial-pivoting LU, if affordable."""
    n = A.shape[0]
    if n > max_n:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, _ = scipy.linalg.lu_factor(A.toarray(), check_finite=False)
    d = np.abs(np.diag(lu))
    tiny = np.flatnonzero(d <= n * np.finfo(float).eps * max(d.max(), 1e-300))
    return int(tiny[0]) if tiny.size else None


def dump_matrix_market(A, path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
