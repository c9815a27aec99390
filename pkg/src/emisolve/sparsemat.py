"""Compressed sparse symmetric matrix carrier and export helpers.

Thin wrapper over a scipy CSR matrix: keeps the raw arrays accessible,
carries a symmetry flag, and provides the Matrix Market / CSV exports used
by the command-line tools.
"""

import numpy as np
import scipy.sparse as sp


class SparseSymMatrix:
    """Square sparse matrix stored in CSR form with a symmetry flag."""

    def __init__(self, matrix, symmetric: bool = True):
        csr = sp.csr_matrix(matrix)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix is {csr.shape}, expected square")
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        self.csr = csr
        self.symmetric = symmetric

    @classmethod
    def from_coo(cls, rows, cols, vals, size, symmetric=True):
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(size, size))
        return cls(coo, symmetric=symmetric)

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def values(self) -> np.ndarray:
        return self.csr.data

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def matvec(self, x):
        return self.csr @ x

    def __matmul__(self, x):
        return self.csr @ x

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def symmetry_defect(self) -> float:
        """max |A_ij - A_ji|, zero for an exactly symmetric matrix."""
        d = self.csr - self.csr.T
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def is_symmetric(self, rel_tol: float = 1e-14) -> bool:
        scale = float(np.abs(self.csr.data).max()) if self.csr.nnz else 1.0
        return self.symmetry_defect() <= rel_tol * scale

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()


def as_csr(A) -> sp.csr_matrix:
    """Accept a SparseSymMatrix, scipy sparse matrix or dense array."""
    if isinstance(A, SparseSymMatrix):
        return A.csr
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A))


def write_matrix_market(A, path) -> None:
    """Write a symmetric matrix in 1-based Matrix Market coordinate format.

    Only the lower triangle is stored, per the symmetric-format convention.
    """
    csr = as_csr(A)
    coo = sp.tril(csr).tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{csr.shape[0]} {csr.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {v:.16e}\n")


def write_vector_csv(vec, path, header: str = "value") -> None:
    """Write a vector as a single-column CSV with a header row."""
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for v in np.asarray(vec).ravel():
            fh.write(f"{v:.12g}\n")
