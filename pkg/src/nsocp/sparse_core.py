"""Sparse CSR matrices, block assembly, and deterministic direct solves.

All heavy lifting (CSR arithmetic, sparse LU) is delegated to scipy; this
module pins down the storage invariants and error behavior the rest of the
package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "SparseError",
    "SingularMatrixError",
    "Triplet",
    "CsrMatrix",
    "BlockSpec",
    "from_triplets",
    "spmv",
    "solve_linear",
    "assemble_block",
    "identity",
    "diagonal",
    "write_matrix_market",
]

# Pivot smaller than this times the largest initial row magnitude is
# reported as singular.
PIVOT_RTOL = 1e-14


class SparseError(ValueError):
    """Malformed sparse data (bad indices, inconsistent dimensions)."""


class SingularMatrixError(SparseError):
    """Structurally or numerically singular matrix in a direct solve."""

    def __init__(self, pivot_row: int):
        self.pivot_row = pivot_row
        super().__init__(f"matrix is singular (deficient pivot in row {pivot_row})")


@dataclass(frozen=True)
class Triplet:
    row: int
    col: int
    value: float


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed-sparse-row matrix with validated structure.

    Within each row the column indices are strictly increasing and no
    duplicate (row, col) pair is stored.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        off, col, val = self.row_offsets, self.col_indices, self.values
        if len(off) != self.n_rows + 1 or off[0] != 0 or off[-1] != len(val):
            raise SparseError("row_offsets inconsistent with values")
        if np.any(np.diff(off) < 0):
            raise SparseError("row_offsets must be non-decreasing")
        if len(col) != len(val):
            raise SparseError("col_indices and values length mismatch")
        if len(col) and (col.min() < 0 or col.max() >= self.n_cols):
            raise SparseError("column index out of range")
        if len(col) > 1:
            # strictly increasing within each row; decreases are only allowed
            # exactly at row boundaries
            decreasing = np.flatnonzero(np.diff(col) <= 0) + 1
            if not np.all(np.isin(decreasing, off)):
                bad = decreasing[~np.isin(decreasing, off)][0]
                row = int(np.searchsorted(off, bad, side="right")) - 1
                raise SparseError(f"row {row}: column indices not strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols),
        )
        return m

    @classmethod
    def from_scipy(cls, m) -> "CsrMatrix":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(
            n_rows=m.shape[0],
            n_cols=m.shape[1],
            row_offsets=m.indptr.astype(np.int64),
            col_indices=m.indices.astype(np.int64),
            values=m.data.astype(np.float64),
        )

    def to_triplets(self) -> list[Triplet]:
        out = []
        for i in range(self.n_rows):
            for k in range(self.row_offsets[i], self.row_offsets[i + 1]):
                out.append(Triplet(i, int(self.col_indices[k]), float(self.values[k])))
        return out


def from_triplets(n_rows: int, n_cols: int, entries: Sequence[Triplet]) -> CsrMatrix:
    """Build a CSR matrix from (row, col, value) entries; duplicates are summed."""
    rows = np.array([e.row for e in entries], dtype=np.int64)
    cols = np.array([e.col for e in entries], dtype=np.int64)
    vals = np.array([e.value for e in entries], dtype=np.float64)
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows):
        raise SparseError("row index out of range")
    if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
        raise SparseError("column index out of range")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
    return CsrMatrix.from_scipy(coo)


def identity(n: int) -> CsrMatrix:
    return CsrMatrix.from_scipy(sp.identity(n, format="csr"))


def diagonal(d: np.ndarray) -> CsrMatrix:
    return CsrMatrix.from_scipy(sp.diags(np.asarray(d, dtype=float), format="csr"))


def spmv(m: CsrMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_cols,):
        raise SparseError(f"dimension mismatch: matrix has {m.n_cols} columns, vector has {x.shape}")
    return m.to_scipy() @ x


def _factorize(m_sp: sp.csc_matrix):
    """Sparse LU with explicit singularity detection.

    The matrix must already be row-equilibrated (max row magnitude 1), so
    a pivot below PIVOT_RTOL marks a numerically deficient row.
    """
    try:
        lu = splu(m_sp, permc_spec="COLAMD")
    except RuntimeError as exc:
        row = _first_deficient_row(m_sp)
        raise SingularMatrixError(row) from exc
    udiag = np.abs(lu.U.diagonal())
    bad = np.flatnonzero(udiag < PIVOT_RTOL)
    if len(bad):
        raise SingularMatrixError(int(lu.perm_r[bad[0]]) if lu.perm_r is not None else int(bad[0]))
    return lu


def _first_deficient_row(m_sp) -> int:
    """Best-effort identification of a deficient pivot row (small systems)."""
    n = m_sp.shape[0]
    if n <= 2000:
        a = m_sp.toarray()
        scale = np.max(np.abs(a)) or 1.0
        perm = np.arange(n)
        for k in range(n):
            piv = int(np.argmax(np.abs(a[k:, k]))) + k
            if np.abs(a[piv, k]) < PIVOT_RTOL * scale:
                return int(perm[k])
            if piv != k:
                a[[k, piv]] = a[[piv, k]]
                perm[[k, piv]] = perm[[piv, k]]
            a[k + 1:] -= np.outer(a[k + 1:, k] / a[k, k], a[k])
        return n - 1
    return -1


def solve_linear(m: CsrMatrix, b: np.ndarray) -> np.ndarray:
    """Solve m x = b by sparse LU with partial pivoting (deterministic).

    Rows are equilibrated first so the singularity test is invariant under
    row scaling (the prox rows of the KKT system carry entries of order
    gamma times a mesh factor and are perfectly well conditioned). One
    refinement step keeps the relative residual below 1e-10.
    """
    if m.n_rows != m.n_cols:
        raise SparseError("solve_linear requires a square matrix")
    b = np.asarray(b, dtype=float)
    if b.shape != (m.n_rows,):
        raise SparseError("right-hand side has wrong length")
    m_sp = m.to_scipy()
    row_mags = np.abs(m_sp).max(axis=1).toarray().ravel() if m.nnz else np.zeros(m.n_rows)
    dead = np.flatnonzero(row_mags == 0)
    if len(dead):
        raise SingularMatrixError(int(dead[0]))
    inv = sp.diags(1.0 / row_mags)
    m_eq = (inv @ m_sp).tocsr()
    b_eq = b / row_mags
    lu = _factorize(m_eq.tocsc())
    x = lu.solve(b_eq)
    # single refinement step
    r = b_eq - m_eq @ x
    x = x + lu.solve(r)
    return x


@dataclass
class BlockSpec:
    """3x3 (or general) grid of optional blocks with scalar multipliers.

    ``blocks[i][j]`` is either a CsrMatrix or None (zero block);
    ``multipliers[i][j]`` scales the block.
    """

    blocks: list[list[Optional[CsrMatrix]]]
    multipliers: Optional[list[list[float]]] = None


def assemble_block(spec: BlockSpec) -> CsrMatrix:
    """Concatenate a grid of sparse blocks into one CSR matrix."""
    nbr = len(spec.blocks)
    nbc = len(spec.blocks[0]) if nbr else 0
    mult = spec.multipliers or [[1.0] * nbc for _ in range(nbr)]

    row_dims = [None] * nbr
    col_dims = [None] * nbc
    for i in range(nbr):
        for j in range(nbc):
            blk = spec.blocks[i][j]
            if blk is None:
                continue
            if row_dims[i] is None:
                row_dims[i] = blk.n_rows
            elif row_dims[i] != blk.n_rows:
                raise SparseError(f"inconsistent row dimension in block row {i}")
            if col_dims[j] is None:
                col_dims[j] = blk.n_cols
            elif col_dims[j] != blk.n_cols:
                raise SparseError(f"inconsistent column dimension in block column {j}")
    if any(d is None for d in row_dims) or any(d is None for d in col_dims):
        raise SparseError("every block row and column needs at least one block")

    grid = []
    for i in range(nbr):
        row = []
        for j in range(nbc):
            blk = spec.blocks[i][j]
            if blk is None:
                row.append(None)
            else:
                row.append(mult[i][j] * blk.to_scipy())
        grid.append(row)
    return CsrMatrix.from_scipy(sp.bmat(grid, format="csr"))


def write_matrix_market(m: CsrMatrix, path) -> None:
    """Debug dump in MatrixMarket coordinate text format."""
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{m.n_rows} {m.n_cols} {m.nnz}\n")
        for t in m.to_triplets():
            fh.write(f"{t.row + 1} {t.col + 1} {t.value:.17g}\n")
