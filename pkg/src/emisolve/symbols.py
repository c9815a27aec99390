"""Spectral symbols of the discrete operators and their Toeplitz realizations.

A symbol is a real trigonometric polynomial stored as a cosine series over
multi-indices; evaluating it, sampling it on uniform grids (monotone
rearrangement), building the multilevel Toeplitz matrix it generates, and
rewriting it with matrix-valued coefficients (reblocking) are all supported.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparsemat import SparseSymMatrix


class SymbolError(ValueError):
    """Arity or size mismatch in a symbol operation."""


@dataclass(frozen=True)
class SymbolFn:
    """Cosine series f(theta) = sum_k c_k cos(k . theta) over multi-indices k.

    Real-valued and even by construction.  ``coeffs`` maps each multi-index
    (a tuple of length ``arity``) to its cosine coefficient.
    """

    name: str
    arity: int
    coeffs: tuple

    def coeff_items(self):
        return self.coeffs

    def bandwidth(self) -> int:
        return max(max(abs(c) for c in k) for k, _ in self.coeffs)


def stiffness_symbol_1d() -> SymbolFn:
    """Symbol of the 1D linear-element stiffness sequence: 2 - 2 cos(theta)."""
    return SymbolFn("f_1d", 1, (((0,), 2.0), ((1,), -2.0)))


def mass_symbol_1d() -> SymbolFn:
    """Symbol of the 1D linear-element mass sequence: 2/3 + cos(theta)/3."""
    return SymbolFn("h_1d", 1, (((0,), 2.0 / 3.0), ((1,), 1.0 / 3.0)))


def stiffness_symbol_2d() -> SymbolFn:
    """Symbol of the 2D bilinear-element stiffness sequence (9-point stencil)."""
    return SymbolFn(
        "f_square",
        2,
        (
            ((0, 0), 8.0 / 3.0),
            ((1, 0), -2.0 / 3.0),
            ((0, 1), -2.0 / 3.0),
            ((1, 1), -2.0 / 3.0),
            ((1, -1), -2.0 / 3.0),
        ),
    )


def constant_symbol(value: float, arity: int = 1, name: str = "const") -> SymbolFn:
    return SymbolFn(name, arity, (((0,) * arity, float(value)),))


@dataclass(frozen=True)
class CompositeSymbolG:
    """Two-domain composite symbol on [0,1] x [0,pi]^ki x [0,pi]^ke.

    Takes the intra symbol for x <= split_ratio and the extra symbol above;
    split_ratio is the asymptotic interior share of the DOFs (1/4 for the
    square-in-square cell geometry).
    """

    split_ratio: float
    intra: SymbolFn
    extra: SymbolFn

    def __post_init__(self):
        if not 0.0 <= self.split_ratio <= 1.0:
            raise SymbolError(f"split ratio {self.split_ratio} outside [0, 1]")


def composite_symbol(split_ratio: float = 0.25) -> CompositeSymbolG:
    """Composite symbol of the whole block system for scenario (i)."""
    f = stiffness_symbol_2d()
    return CompositeSymbolG(split_ratio, f, f)


def eval_symbol(s: SymbolFn, theta) -> np.ndarray:
    """Evaluate the cosine series at angles; last axis must match the arity."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if s.arity == 1 and th.shape[-1] != 1:
        th = th[..., None]
    if th.shape[-1] != s.arity:
        raise SymbolError(f"symbol {s.name} has arity {s.arity}, got angles of length {th.shape[-1]}")
    out = np.zeros(th.shape[:-1])
    for k, c in s.coeff_items():
        out += c * np.cos(th @ np.asarray(k, dtype=float))
    return out if out.shape else float(out)


def angular_grid(m: int) -> np.ndarray:
    """Uniform grid j*pi/m, j = 1..m, on the angular domain."""
    if m < 1:
        raise SymbolError(f"grid size {m} must be positive")
    return np.arange(1, m + 1) * (np.pi / m)


def _tensor_samples(s: SymbolFn, sizes) -> np.ndarray:
    if len(sizes) != s.arity:
        raise SymbolError(f"symbol {s.name} has arity {s.arity}, got {len(sizes)} grid sizes")
    grids = [angular_grid(m) for m in sizes]
    mesh = np.meshgrid(*grids, indexing="ij")
    theta = np.stack([g.ravel() for g in mesh], axis=-1)
    return eval_symbol(s, theta)


def sample_rearranged(s, sizes) -> np.ndarray:
    """Samples on the uniform tensor grid of the symbol's domain, sorted ascending.

    For a plain symbol ``sizes`` has one entry per angular variable.  For a
    composite symbol ``sizes`` is (m_x, m_intra, m_extra): each of the m_x
    uniform points of the fictitious [0,1] variable contributes the full
    tensor sampling of its side's symbol, so repeated values are kept with
    their multiplicity.
    """
    if isinstance(s, SymbolFn):
        vals = _tensor_samples(s, tuple(int(m) for m in sizes))
        return np.sort(vals)
    if not isinstance(s, CompositeSymbolG):
        raise SymbolError(f"cannot sample object of type {type(s).__name__}")
    sizes = tuple(int(m) for m in sizes)
    if len(sizes) != 3:
        raise SymbolError("composite sampling needs sizes (m_x, m_intra, m_extra)")
    m_x, m_i, m_e = sizes
    if m_x < 1:
        raise SymbolError(f"x-grid size {m_x} must be positive")
    x = np.arange(1, m_x + 1) / m_x
    n_lo = int(np.count_nonzero(x <= s.split_ratio + 1e-15))
    n_hi = m_x - n_lo
    parts = []
    if n_lo:
        parts.append(np.tile(_tensor_samples(s.intra, (m_i,) * s.intra.arity), n_lo))
    if n_hi:
        parts.append(np.tile(_tensor_samples(s.extra, (m_e,) * s.extra.arity), n_hi))
    return np.sort(np.concatenate(parts))


def count_matched_sizes(n_values: int, m_x: int = 4) -> tuple:
    """Grid sizes for a composite 2D/2D symbol so the sample count is close to n."""
    m = max(1, round(np.sqrt(n_values / m_x)))
    return (m_x, m, m)


def _fourier_coeffs(s: SymbolFn) -> dict:
    """Fourier coefficients of the cosine series, mirrored over +/-k."""
    four = {}
    zero = (0,) * s.arity
    for k, c in s.coeff_items():
        if k == zero:
            four[zero] = four.get(zero, 0.0) + c
        else:
            mk = tuple(-x for x in k)
            four[k] = four.get(k, 0.0) + c / 2.0
            four[mk] = four.get(mk, 0.0) + c / 2.0
    return four


def _shift(n: int, k: int) -> sp.csr_matrix:
    """n x n matrix with ones on the diagonal (i, i - k)."""
    return sp.eye(n, n, k=-k, format="csr")


def build_toeplitz(s: SymbolFn, n) -> SparseSymMatrix:
    """Toeplitz matrix generated by the symbol, unilevel or two-level.

    ``n`` is the size (unilevel) or a pair of per-level sizes; the entry at
    multi-index offset k is the k-th Fourier coefficient of the symbol.
    """
    if isinstance(n, (int, np.integer)):
        n = (int(n),)
    n = tuple(int(v) for v in n)
    if len(n) != s.arity:
        raise SymbolError(f"symbol {s.name} has arity {s.arity}, got {len(n)} sizes")
    if any(v < 1 for v in n):
        raise SymbolError(f"sizes {n} must be positive")
    total = int(np.prod(n))
    T = sp.csr_matrix((total, total))
    for k, c in _fourier_coeffs(s).items():
        term = _shift(n[0], k[0])
        for lvl in range(1, len(n)):
            term = sp.kron(term, _shift(n[lvl], k[lvl]), format="csr")
        T = T + c * term
    return SparseSymMatrix(T, symmetric=True)


def reblock_symbol(s: SymbolFn, k: int):
    """Rewrite a unilevel symbol with k x k matrix coefficients.

    Returns (A_0, A_1, A_minus1) such that the block tridiagonal Toeplitz
    matrix with those blocks equals T_n of the scalar symbol whenever k
    divides n.  Requires the scalar bandwidth to be smaller than k.
    """
    if s.arity != 1:
        raise SymbolError("reblocking is defined for unilevel symbols")
    bw = s.bandwidth()
    if bw >= k:
        raise SymbolError(f"bandwidth {bw} must be smaller than the block size {k}")
    four = _fourier_coeffs(s)

    def f(idx: int) -> float:
        return four.get((idx,), 0.0)

    A0 = np.array([[f(r - c) for c in range(k)] for r in range(k)])
    A1 = np.array([[f(k + r - c) for c in range(k)] for r in range(k)])
    return A0, A1, A1.T


def assemble_block_toeplitz(A0, A1, Am1, nblocks: int) -> SparseSymMatrix:
    """Block tridiagonal Toeplitz matrix from k x k coefficient blocks."""
    k = A0.shape[0]
    eye = sp.eye(nblocks, format="csr")
    sub = sp.eye(nblocks, nblocks, k=-1, format="csr")
    sup = sp.eye(nblocks, nblocks, k=1, format="csr")
    T = (
        sp.kron(eye, A0, format="csr")
        + sp.kron(sub, A1, format="csr")
        + sp.kron(sup, Am1, format="csr")
    )
    return SparseSymMatrix(T, symmetric=True)


def write_samples_csv(samples, path, header: str = "sample") -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for v in np.asarray(samples).ravel():
            fh.write(f"{v:.12g}\n")
