"""Structured square-in-square grid with duplicated membrane nodes.

The domain is the unit square meshed with N x N square cells; an inner
axis-aligned box (the cell) is carved out and every node on its boundary
appears twice, once per side of the interface.  Degrees of freedom are
grouped into four ordered classes: exterior interior, exterior membrane,
interior interior, interior membrane.
"""

from dataclasses import dataclass, field

import numpy as np

# Inner box of scenario (i); axis-aligned, corners must land on grid nodes.
INNER_BOX = (0.25, 0.75)


class GridError(ValueError):
    """Invalid grid parameters."""


@dataclass(frozen=True)
class GridSpec:
    """Mesh resolution N (cells per side) and element order p.

    Only p = 1 (bilinear elements) is supported; the parameter is kept so
    callers can request higher orders explicitly and get a clear error.
    """

    N: int
    p: int = 1

    def __post_init__(self):
        if self.p != 1:
            raise GridError(f"element order p={self.p} is not supported (p=1 only)")
        if self.N < 4:
            raise GridError(f"N={self.N}: at least 4 cells per side are required")
        if self.N % 4 != 0:
            raise GridError(
                f"N={self.N} is not divisible by 4; the inner-box corners "
                f"{INNER_BOX} must land on grid nodes"
            )


@dataclass(frozen=True)
class DofClassification:
    """Index sets, coordinates and lookup maps for the four DOF classes.

    Global ordering is [e_in | e_gamma | i_in | i_gamma].  Membrane DOFs
    traverse the interface loop counter-clockwise starting at the lower-left
    corner of the inner box; the j-th exterior membrane DOF and the j-th
    interior membrane DOF sit at the same grid node.
    """

    N: int
    p: int
    h: float
    e_in_nodes: np.ndarray       # grid-node ids per class, in global DOF order
    gamma_nodes: np.ndarray      # membrane loop, shared by both copies
    i_in_nodes: np.ndarray
    coords: np.ndarray           # (n, 2) coordinates per global DOF
    e_map: np.ndarray            # grid-node id -> exterior DOF id (or -1)
    i_map: np.ndarray            # grid-node id -> interior DOF id (or -1)
    boundary_dofs: np.ndarray    # global ids of outer-boundary DOFs (all e_in)

    @property
    def n_gamma(self) -> int:
        return len(self.gamma_nodes)

    @property
    def n_e_in(self) -> int:
        return len(self.e_in_nodes)

    @property
    def n_i_in(self) -> int:
        return len(self.i_in_nodes)

    @property
    def n_e(self) -> int:
        return self.n_e_in + self.n_gamma

    @property
    def n_i(self) -> int:
        return self.n_i_in + self.n_gamma

    @property
    def n(self) -> int:
        return self.n_e + self.n_i

    # Offsets of the four blocks in the global ordering.
    @property
    def e_in_start(self) -> int:
        return 0

    @property
    def e_gamma_start(self) -> int:
        return self.n_e_in

    @property
    def i_in_start(self) -> int:
        return self.n_e

    @property
    def i_gamma_start(self) -> int:
        return self.n_e + self.n_i_in

    def e_gamma_dofs(self) -> np.ndarray:
        return np.arange(self.e_gamma_start, self.e_gamma_start + self.n_gamma)

    def i_gamma_dofs(self) -> np.ndarray:
        return np.arange(self.i_gamma_start, self.i_gamma_start + self.n_gamma)


def _membrane_loop(N: int) -> np.ndarray:
    """Grid nodes of the interface loop, counter-clockwise from the lower-left corner."""
    q = N // 4
    lo, hi = q, 3 * q
    nodes = []
    for gx in range(lo, hi):          # bottom edge, left to right
        nodes.append((gx, lo))
    for gy in range(lo, hi):          # right edge, bottom to top
        nodes.append((hi, gy))
    for gx in range(hi, lo, -1):      # top edge, right to left
        nodes.append((gx, hi))
    for gy in range(hi, lo, -1):      # left edge, top to bottom
        nodes.append((lo, gy))
    arr = np.array(nodes, dtype=np.int64)
    return arr[:, 1] * (N + 1) + arr[:, 0]


def build_grid(spec: GridSpec) -> DofClassification:
    """Classify all DOFs of the square-in-square discretization."""
    N = spec.N
    h = 1.0 / N
    q = N // 4
    m = N + 1

    gx, gy = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    gx = gx.ravel()
    gy = gy.ravel()
    in_closed_box = (gx >= q) & (gx <= 3 * q) & (gy >= q) & (gy <= 3 * q)
    in_open_box = (gx > q) & (gx < 3 * q) & (gy > q) & (gy < 3 * q)

    node_ids = gy * m + gx
    e_in_nodes = node_ids[~in_closed_box]           # row-major order
    i_in_nodes = node_ids[in_open_box]
    gamma_nodes = _membrane_loop(N)

    n_gamma = len(gamma_nodes)
    n_e_in = len(e_in_nodes)
    n_i_in = len(i_in_nodes)
    n_e = n_e_in + n_gamma
    n = n_e + n_i_in + n_gamma

    e_map = np.full(m * m, -1, dtype=np.int64)
    i_map = np.full(m * m, -1, dtype=np.int64)
    e_map[e_in_nodes] = np.arange(n_e_in)
    e_map[gamma_nodes] = n_e_in + np.arange(n_gamma)
    i_map[i_in_nodes] = n_e + np.arange(n_i_in)
    i_map[gamma_nodes] = n_e + n_i_in + np.arange(n_gamma)

    def xy(nodes):
        return np.column_stack(((nodes % m) * h, (nodes // m) * h))

    coords = np.vstack([xy(e_in_nodes), xy(gamma_nodes), xy(i_in_nodes), xy(gamma_nodes)])

    on_boundary = (gx == 0) | (gx == N) | (gy == 0) | (gy == N)
    boundary_dofs = e_map[node_ids[on_boundary]]
    boundary_dofs.sort()

    return DofClassification(
        N=N,
        p=spec.p,
        h=h,
        e_in_nodes=e_in_nodes,
        gamma_nodes=gamma_nodes,
        i_in_nodes=i_in_nodes,
        coords=coords,
        e_map=e_map,
        i_map=i_map,
        boundary_dofs=boundary_dofs,
    )


def gamma_pairing(dofs: DofClassification) -> np.ndarray:
    """Pairs (exterior DOF, interior DOF) of coincident membrane nodes.

    Returns an (N_Gamma, 2) array; pair j holds the two copies of the j-th
    loop node, whose coordinates agree exactly.
    """
    e = dofs.e_gamma_dofs()
    i = dofs.i_gamma_dofs()
    return np.column_stack([e, i])
