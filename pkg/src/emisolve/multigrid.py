"""Geometric multigrid V-cycle preconditioner for the whole block system.

Coarse grids halve the resolution down to the 4-cell grid; prolongation is
bilinear interpolation within each subdomain, which restricts to 1D linear
interpolation along the membrane loop so both copies of every membrane node
coarsen consistently.  Coarse operators are Galerkin triple products with
restriction equal to the prolongation transpose; the coarsest level is
solved densely.  One V(1,1) cycle with damped Jacobi smoothing is a
symmetric linear operator, usable directly inside CG.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import EmiSystem
from .grid import DofClassification, GridSpec, build_grid
from .sparsemat import as_csr


class MultigridError(ValueError):
    """Invalid multigrid configuration or grid."""


@dataclass
class MgConfig:
    """Smoothing counts, Jacobi damping, coarsest-size guard, cycle type."""

    nu_pre: int = 1
    nu_post: int = 1
    omega: float = 2.0 / 3.0
    coarse_threshold: int = 200
    cycle: str = "V"

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise MultigridError(f"Jacobi damping omega={self.omega} outside (0, 1]")
        if self.nu_pre + self.nu_post < 1:
            raise MultigridError("at least one smoothing step is required")
        if self.cycle != "V":
            raise MultigridError(f"unsupported cycle type {self.cycle!r}")


@dataclass
class MgLevel:
    N: int
    dofs: DofClassification
    A: sp.csr_matrix
    inv_diag: np.ndarray


@dataclass
class MgHierarchy:
    levels: list
    prolongations: list          # P[l] maps level l+1 -> level l
    coarse_factor: tuple = field(repr=False, default=None)
    config: MgConfig = None

    @property
    def depth(self) -> int:
        return len(self.levels)


# Interpolation stencils by node parity: (dx, dy, weight) into the coarse grid.
_PARITY_STENCILS = {
    (0, 0): ((0, 0, 1.0),),
    (1, 0): ((0, 0, 0.5), (1, 0, 0.5)),
    (0, 1): ((0, 0, 0.5), (0, 1, 0.5)),
    (1, 1): ((0, 0, 0.25), (1, 0, 0.25), (0, 1, 0.25), (1, 1, 0.25)),
}


def _prolongation(fine: DofClassification, coarse: DofClassification) -> sp.csr_matrix:
    """Interpolation matrix from the coarse DOF space to the fine one.

    Each fine DOF interpolates within its own class: exterior DOFs from
    exterior coarse DOFs, interior from interior, membrane copies along the
    loop from the matching copies.  Couplings into eliminated outer-boundary
    DOFs are dropped (their value is the known zero), and boundary DOFs
    interpolate only along the boundary, so the eliminated structure is
    reproduced on every level.
    """
    if fine.N != 2 * coarse.N:
        raise MultigridError(f"level sizes {fine.N} and {coarse.N} are not nested 2:1")
    if coarse.N % 4 != 0:
        raise MultigridError(f"coarse N={coarse.N} breaks membrane-node alignment")
    mf = fine.N + 1
    mc = coarse.N + 1
    fine_bd = np.zeros(fine.n, dtype=bool)
    fine_bd[fine.boundary_dofs] = True
    coarse_bd = np.zeros(coarse.n, dtype=bool)
    coarse_bd[coarse.boundary_dofs] = True

    rows, cols, vals = [], [], []

    def add_class(nodes, fine_start, coarse_map):
        gx = nodes % mf
        gy = nodes // mf
        fdofs = fine_start + np.arange(len(nodes))
        for parity, stencil in _PARITY_STENCILS.items():
            mask = (gx % 2 == parity[0]) & (gy % 2 == parity[1])
            if not mask.any():
                continue
            bx, by = gx[mask] // 2, gy[mask] // 2
            f = fdofs[mask]
            for dx, dy, w in stencil:
                cdof = coarse_map[(by + dy) * mc + (bx + dx)]
                if (cdof < 0).any():
                    raise MultigridError("interpolation reached a node outside the class")
                keep = ~(coarse_bd[cdof] & ~fine_bd[f]) & ~(fine_bd[f] & ~coarse_bd[cdof])
                rows.append(f[keep])
                cols.append(cdof[keep])
                vals.append(np.full(keep.sum(), w))

    add_class(fine.e_in_nodes, fine.e_in_start, coarse.e_map)
    add_class(fine.gamma_nodes, fine.e_gamma_start, coarse.e_map)
    add_class(fine.i_in_nodes, fine.i_in_start, coarse.i_map)
    add_class(fine.gamma_nodes, fine.i_gamma_start, coarse.i_map)

    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine.n, coarse.n),
    ).tocsr()


def build_hierarchy(system: EmiSystem, config: MgConfig = None) -> MgHierarchy:
    """Galerkin hierarchy for the assembled system, coarsening down to N=4."""
    cfg = config or MgConfig()
    N = system.dofs.N
    if N < 8 or (N & (N - 1)) != 0:
        raise MultigridError(f"multigrid needs N a power of two and >= 8, got {N}")

    levels = [MgLevel(N, system.dofs, system.matrix.csr, _safe_inv_diag(system.matrix.csr))]
    prolongations = []
    while levels[-1].N > 4:
        fine = levels[-1]
        coarse_N = fine.N // 2
        if coarse_N % 4 != 0:
            raise MultigridError(f"coarsening to N={coarse_N} breaks membrane alignment")
        coarse_dofs = build_grid(GridSpec(coarse_N))
        P = _prolongation(fine.dofs, coarse_dofs)
        A_c = (P.T @ fine.A @ P).tocsr()
        A_c.sum_duplicates()
        levels.append(MgLevel(coarse_N, coarse_dofs, A_c, _safe_inv_diag(A_c)))
        prolongations.append(P)

    coarsest = levels[-1]
    if coarsest.dofs.n > cfg.coarse_threshold:
        raise MultigridError(
            f"coarsest level has dimension {coarsest.dofs.n}, above the threshold {cfg.coarse_threshold}"
        )
    factor = scipy.linalg.cho_factor(coarsest.A.toarray())
    return MgHierarchy(levels=levels, prolongations=prolongations, coarse_factor=factor, config=cfg)


def _safe_inv_diag(A) -> np.ndarray:
    d = A.diagonal()
    if (d == 0.0).any():
        raise MultigridError("zero diagonal entry on a multigrid level")
    return 1.0 / d


def _cycle(h: MgHierarchy, level: int, r: np.ndarray) -> np.ndarray:
    lvl = h.levels[level]
    if level == h.depth - 1:
        return scipy.linalg.cho_solve(h.coarse_factor, r)
    cfg = h.config
    x = cfg.omega * lvl.inv_diag * r
    for _ in range(cfg.nu_pre - 1):
        x += cfg.omega * lvl.inv_diag * (r - lvl.A @ x)
    P = h.prolongations[level]
    resid = r - lvl.A @ x
    x += P @ _cycle(h, level + 1, P.T @ resid)
    for _ in range(cfg.nu_post):
        x += cfg.omega * lvl.inv_diag * (r - lvl.A @ x)
    return x


def v_cycle(h: MgHierarchy, r: np.ndarray) -> np.ndarray:
    """One V(nu_pre, nu_post) cycle applied to a residual, from a zero guess."""
    return _cycle(h, 0, np.asarray(r, dtype=float))


class MgPreconditioner:
    """One V-cycle per application, for use inside preconditioned CG."""

    tag = "mg"

    def __init__(self, system: EmiSystem, config: MgConfig = None):
        self.hierarchy = build_hierarchy(system, config)

    def apply(self, r):
        return v_cycle(self.hierarchy, r)
