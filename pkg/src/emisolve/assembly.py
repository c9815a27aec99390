"""Assembly of the EMI block system on the square-in-square grid.

Bilinear stiffness on each subdomain, linear trace mass and coupling along
the membrane loop, the 4x4 block matrix with symmetric Dirichlet
elimination on the outer boundary, membrane load vectors, and the splitting
of the scaled system into a time-step-free part plus a low-rank membrane
part.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import DofClassification, GridError, GridSpec, build_grid
from .sparsemat import SparseSymMatrix

# Bilinear element stiffness on a square cell, nodes ordered (SW, SE, NE, NW).
# Scale-free in 2D; multiply by the conductivity.
_Q1_STIFFNESS = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0

# Linear elements on the two right triangles of a cell, split along SW-NE.
# This is the triangulated-mesh variant behind the reference iteration
# tables; same nodes, 5-point assembled stencil.
_P1_TRI_LOWER = 0.5 * np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])   # (SW, SE, NE)
_P1_TRI_UPPER = 0.5 * np.array([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0], [-1.0, -1.0, 2.0]])   # (SW, NE, NW)

ELEMENTS = ("q1", "p1")

_GAUSS2 = (0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0)))


class AssemblyError(ValueError):
    """Invalid assembly request."""


def sine_source(x, y):
    """Membrane source of the benchmark problem."""
    return np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)


def _cell_nodes(N: int, which: str):
    """Corner node ids (SW, SE, NE, NW) of every cell of one subdomain."""
    q = N // 4
    cx, cy = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    cx = cx.ravel()
    cy = cy.ravel()
    inside = (cx >= q) & (cx < 3 * q) & (cy >= q) & (cy < 3 * q)
    keep = inside if which == "i" else ~inside
    cx, cy = cx[keep], cy[keep]
    m = N + 1
    sw = cy * m + cx
    return np.column_stack([sw, sw + 1, sw + m + 1, sw + m])


def assemble_stiffness(
    dofs: DofClassification, subdomain: str, sigma: float = 1.0, element: str = "q1"
) -> SparseSymMatrix:
    """Stiffness matrix of one subdomain over its own DOFs.

    The result is N_e x N_e (or N_i x N_i) in the local ordering
    [interior | membrane copy]; no boundary conditions are applied, so every
    row of a pure-Neumann subdomain sums to zero.  ``element`` selects
    bilinear cells ("q1", default) or the triangulated variant ("p1").
    """
    if subdomain not in ("e", "i"):
        raise AssemblyError(f"subdomain must be 'e' or 'i', got {subdomain!r}")
    if sigma <= 0:
        raise AssemblyError(f"conductivity sigma={sigma} must be positive")
    if element not in ELEMENTS:
        raise AssemblyError(f"element must be one of {ELEMENTS}, got {element!r}")
    nodes = _cell_nodes(dofs.N, subdomain)
    if subdomain == "e":
        amap, size, shift = dofs.e_map, dofs.n_e, 0
    else:
        amap, size, shift = dofs.i_map, dofs.n_i, dofs.n_e
    if element == "q1":
        loc = amap[nodes] - shift
        if (loc < 0).any():
            raise AssemblyError("cell touches a node outside its subdomain")
        ncells = loc.shape[0]
        rows = np.repeat(loc, 4, axis=1).ravel()
        cols = np.tile(loc, (1, 4)).ravel()
        vals = np.tile(sigma * _Q1_STIFFNESS.ravel(), ncells)
    else:
        tris = np.vstack([nodes[:, [0, 1, 2]], nodes[:, [0, 2, 3]]])
        loc = amap[tris] - shift
        if (loc < 0).any():
            raise AssemblyError("cell touches a node outside its subdomain")
        ntris = nodes.shape[0]
        local = np.vstack(
            [
                np.tile(_P1_TRI_LOWER.ravel(), (ntris, 1)),
                np.tile(_P1_TRI_UPPER.ravel(), (ntris, 1)),
            ]
        )
        rows = np.repeat(loc, 3, axis=1).ravel()
        cols = np.tile(loc, (1, 3)).ravel()
        vals = sigma * local.ravel()
    return SparseSymMatrix.from_coo(rows, cols, vals, size)


def _loop_edge_matrix(n_gamma: int, h: float) -> sp.csr_matrix:
    """Linear trace mass matrix on the closed membrane loop (size N_Gamma)."""
    idx = np.arange(n_gamma)
    nxt = (idx + 1) % n_gamma
    rows = np.concatenate([idx, idx, nxt, nxt])
    cols = np.concatenate([idx, nxt, idx, nxt])
    vals = np.concatenate(
        [
            np.full(n_gamma, h / 3.0),
            np.full(n_gamma, h / 6.0),
            np.full(n_gamma, h / 6.0),
            np.full(n_gamma, h / 3.0),
        ]
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_gamma, n_gamma)).tocsr()


def assemble_membrane(dofs: DofClassification):
    """Trace mass matrices and the coupling matrix on the membrane loop.

    Returns (M_e, M_i, T_ei), all N_Gamma x N_Gamma in the loop ordering.
    With matching meshes the three matrices coincide entrywise: the traces
    of the two copies of each membrane basis function are the same hat
    function on the loop.
    """
    M_e = SparseSymMatrix(_loop_edge_matrix(dofs.n_gamma, dofs.h))
    M_i = SparseSymMatrix(_loop_edge_matrix(dofs.n_gamma, dofs.h))
    T_ei = SparseSymMatrix(_loop_edge_matrix(dofs.n_gamma, dofs.h))
    return M_e, M_i, T_ei


def assemble_rhs(dofs: DofClassification, f_source) -> np.ndarray:
    """Load vector of the membrane source, via 2-point Gauss per loop edge.

    Exterior membrane entries carry the negative trace integral, interior
    ones the positive; all other entries vanish.
    """
    m = dofs.n_gamma
    coords = dofs.coords[dofs.e_gamma_dofs()]
    nxt = np.roll(np.arange(m), -1)
    p0 = coords
    p1 = coords[nxt]
    h = dofs.h
    vals = np.zeros(m)
    for s in _GAUSS2:
        pts = p0 + s * (p1 - p0)
        f = f_source(pts[:, 0], pts[:, 1])
        w = h / 2.0
        np.add.at(vals, np.arange(m), w * (1.0 - s) * f)
        np.add.at(vals, nxt, w * s * f)
    rhs = np.zeros(dofs.n)
    rhs[dofs.e_gamma_dofs()] = -vals
    rhs[dofs.i_gamma_dofs()] = vals
    return rhs


def unit_rhs(dofs: DofClassification) -> np.ndarray:
    """Normalized all-ones right-hand side with outer-boundary entries zeroed."""
    b = np.ones(dofs.n)
    b[dofs.boundary_dofs] = 0.0
    return b / np.linalg.norm(b)


@dataclass
class EmiSystem:
    """Assembled block system, its constituent operators and parameters."""

    dofs: DofClassification
    tau: float
    sigma_e: float
    sigma_i: float
    stiffness_e: SparseSymMatrix     # conductivity-scaled, no tau, no BC
    stiffness_i: SparseSymMatrix
    mass_e: SparseSymMatrix          # N_Gamma x N_Gamma trace mass
    mass_i: SparseSymMatrix
    coupling: SparseSymMatrix        # N_Gamma x N_Gamma cross mass
    matrix: SparseSymMatrix          # the n x n block operator
    rhs: np.ndarray
    rhs_kind: str
    element: str = "q1"

    @property
    def n(self) -> int:
        return self.dofs.n

    @property
    def n_gamma(self) -> int:
        return self.dofs.n_gamma


def assemble_system(
    dofs: DofClassification,
    tau: float,
    sigma_e: float = 1.0,
    sigma_i: float = 1.0,
    bc: str = "dirichlet",
    rhs: str = "sine",
    element: str = "q1",
) -> EmiSystem:
    """Assemble the full block operator and right-hand side.

    The membrane coupling enters with a negative sign, so the membrane block
    is the Gram matrix of trace differences and positive semidefinite.
    Dirichlet rows and columns on the outer boundary are eliminated
    symmetrically, keeping the original diagonal entry in place.
    """
    if tau <= 0:
        raise AssemblyError(f"tau={tau} must be positive")
    if bc != "dirichlet":
        raise AssemblyError(f"unsupported boundary treatment {bc!r}")

    K_e = assemble_stiffness(dofs, "e", sigma_e, element=element)
    K_i = assemble_stiffness(dofs, "i", sigma_i, element=element)
    M_e, M_i, T_ei = assemble_membrane(dofs)

    rows, cols, vals = [], [], []

    def add(block, row0, col0, scale=1.0):
        coo = block.csr.tocoo()
        rows.append(coo.row + row0)
        cols.append(coo.col + col0)
        vals.append(scale * coo.data)

    add(K_e, 0, 0, tau)
    add(K_i, dofs.i_in_start, dofs.i_in_start, tau)
    eg, ig = dofs.e_gamma_start, dofs.i_gamma_start
    add(M_e, eg, eg)
    add(M_i, ig, ig)
    add(T_ei, eg, ig, -1.0)
    add(T_ei, ig, eg, -1.0)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)

    A = sp.coo_matrix((vals, (rows, cols)), shape=(dofs.n, dofs.n)).tocsr()
    A.sum_duplicates()

    # Symmetric elimination: drop boundary rows/columns, keep the diagonal.
    bd = np.zeros(dofs.n, dtype=bool)
    bd[dofs.boundary_dofs] = True
    coo = A.tocoo()
    keep = (~bd[coo.row] & ~bd[coo.col]) | (coo.row == coo.col)
    A = sp.coo_matrix(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=A.shape
    ).tocsr()

    matrix = SparseSymMatrix(A)
    for s0, s1 in (
        (0, dofs.n_e_in),
        (eg, eg + dofs.n_gamma),
        (dofs.i_in_start, dofs.i_in_start + dofs.n_i_in),
        (ig, ig + dofs.n_gamma),
    ):
        if np.all(matrix.csr.diagonal()[s0:s1] == 0.0):
            raise AssemblyError("boundary treatment zeroed an entire block")

    if callable(rhs):
        b = assemble_rhs(dofs, rhs)
        rhs_kind = getattr(rhs, "__name__", "custom")
    elif rhs == "sine":
        b = assemble_rhs(dofs, sine_source)
        rhs_kind = "sine"
    elif rhs == "unit":
        b = unit_rhs(dofs)
        rhs_kind = "unit"
    else:
        raise AssemblyError(f"unknown rhs choice {rhs!r}")

    return EmiSystem(
        dofs=dofs,
        tau=tau,
        sigma_e=sigma_e,
        sigma_i=sigma_i,
        stiffness_e=K_e,
        stiffness_i=K_i,
        mass_e=M_e,
        mass_i=M_i,
        coupling=T_ei,
        matrix=matrix,
        rhs=b,
        rhs_kind=rhs_kind,
        element=element,
    )


def build_system(
    N: int,
    tau: float,
    sigma_e: float = 1.0,
    sigma_i: float = 1.0,
    rhs: str = "sine",
    element: str = "q1",
) -> EmiSystem:
    """Convenience wrapper: grid plus system in one call."""
    return assemble_system(build_grid(GridSpec(N)), tau, sigma_e, sigma_i, rhs=rhs, element=element)


@dataclass
class SplitPair:
    """Splitting of the tau-scaled operator into stiffness plus membrane parts.

    ``base`` collects every stiffness block and is independent of tau;
    ``membrane`` holds the 1/tau-scaled trace mass and coupling blocks, whose
    rank is at most 2 N_Gamma (exactly N_Gamma for matching meshes, where the
    coupling equals the one-sided mass).
    """

    base: SparseSymMatrix
    membrane: SparseSymMatrix
    rank_bound: int


def membrane_perturbation(sys: EmiSystem, scale: float = 1.0) -> sp.csr_matrix:
    """The membrane mass/coupling blocks embedded in the full index space."""
    dofs = sys.dofs
    eg, ig = dofs.e_gamma_start, dofs.i_gamma_start
    rows, cols, vals = [], [], []

    def add(block, row0, col0, sgn):
        coo = block.csr.tocoo()
        rows.append(coo.row + row0)
        cols.append(coo.col + col0)
        vals.append(sgn * scale * coo.data)

    add(sys.mass_e, eg, eg, 1.0)
    add(sys.mass_i, ig, ig, 1.0)
    add(sys.coupling, eg, ig, -1.0)
    add(sys.coupling, ig, eg, -1.0)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofs.n, dofs.n),
    ).tocsr()


def split_B_R(sys: EmiSystem) -> SplitPair:
    """Split (1/tau) A into the tau-free part plus the low-rank membrane part."""
    inv_tau = 1.0 / sys.tau
    R = membrane_perturbation(sys, scale=inv_tau)
    B = (inv_tau * sys.matrix.csr - R).tocsr()
    B.eliminate_zeros()
    return SplitPair(
        base=SparseSymMatrix(B),
        membrane=SparseSymMatrix(R),
        rank_bound=2 * sys.n_gamma,
    )
