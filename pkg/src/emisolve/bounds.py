"""CG iteration bounds from clustered spectra with outliers.

Instantiates the classical bound k = q + ceil(log(2/eps) / log(1/alpha))
for a spectrum contained in [a, b] up to q outliers above b, computes the
outlier data of the scaled block system over a time-step sweep, and checks
the clustering of the block-diagonally preconditioned operator.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import EmiSystem, assemble_system, membrane_perturbation, split_B_R
from .grid import DofClassification
from .krylov import SolveConfig, cg_solve
from .spectra import dense_spectrum


class BoundsError(ValueError):
    """Invalid bound inputs."""


@dataclass(frozen=True)
class LemmaInputs:
    """Spectral interval [a, b], outlier count q, relative error target eps."""

    a: float
    b: float
    q: int
    eps: float

    def __post_init__(self):
        if not self.a > 0:
            raise BoundsError(f"a={self.a} must be positive")
        if self.b < self.a:
            raise BoundsError(f"b={self.b} must be at least a={self.a}")
        if self.q < 0:
            raise BoundsError(f"q={self.q} must be nonnegative")
        if not 0.0 < self.eps < 1.0:
            raise BoundsError(f"eps={self.eps} must lie in (0, 1)")


def axelsson_bound(inp: LemmaInputs) -> int:
    """Iteration count sufficient for a relative energy error eps.

    alpha = (sqrt(b) - sqrt(a)) / (sqrt(b) + sqrt(a)); a = b degenerates to
    one sweep for the clustered part.
    """
    if inp.a == inp.b:
        return inp.q + 1
    alpha = (math.sqrt(inp.b) - math.sqrt(inp.a)) / (math.sqrt(inp.b) + math.sqrt(inp.a))
    return inp.q + math.ceil(math.log(2.0 / inp.eps) / math.log(1.0 / alpha))


@dataclass
class OutlierReport:
    """Outlier data of the scaled system at one time-step value."""

    tau: float
    n_gamma: int
    a: float                  # smallest eigenvalue of the scaled system
    b: float                  # largest eigenvalue of the tau-free part
    q: int                    # eigenvalues above b
    outliers: np.ndarray
    k_bound: int
    observed_iterations: int
    converged: bool

    @property
    def two_n_gamma(self) -> int:
        return 2 * self.n_gamma


def outlier_report(
    dofs: DofClassification,
    taus,
    sigma_e: float = 1.0,
    sigma_i: float = 1.0,
    eps: float = 1e-6,
    tol: float = 1e-6,
    maxit: int = 20000,
) -> list:
    """Outlier analysis over a tau sweep, with observed CG iteration counts.

    Uses a = lambda_min of the scaled system, b = lambda_max of the tau-free
    split part, q = #{eigenvalues above b}; the observed count comes from an
    unpreconditioned CG run with the normalized unit right-hand side.
    """
    reports = []
    b_val = None
    for tau in taus:
        sys = assemble_system(dofs, tau, sigma_e, sigma_i, rhs="unit")
        if b_val is None:
            split = split_B_R(sys)
            b_val = float(dense_spectrum(split.base).eigenvalues[-1])
        eigs = dense_spectrum(sys.matrix).eigenvalues / tau
        a_val = float(eigs[0])
        outliers = eigs[eigs > b_val]
        q = int(len(outliers))
        k = axelsson_bound(LemmaInputs(a_val, b_val, q, eps))
        run = cg_solve(sys.matrix, sys.rhs, cfg=SolveConfig(tol=tol, maxit=maxit))
        reports.append(
            OutlierReport(
                tau=float(tau),
                n_gamma=dofs.n_gamma,
                a=a_val,
                b=b_val,
                q=q,
                outliers=outliers,
                k_bound=k,
                observed_iterations=run.iterations,
                converged=run.converged,
            )
        )
    return reports


def write_outlier_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write("tau,a,b,q,two_N_gamma,k_bound,observed_iters\n")
        for r in reports:
            fh.write(
                f"{r.tau:.12g},{r.a:.12g},{r.b:.12g},{r.q},{r.two_n_gamma},"
                f"{r.k_bound},{r.observed_iterations}\n"
            )


@dataclass
class ClusterReport:
    """Eigenvalue clustering of the block-diagonally preconditioned operator."""

    n: int
    n_gamma: int
    eigenvalues: np.ndarray
    outside: dict                 # delta -> count outside [1 - delta, 1 + delta]

    @property
    def four_n_gamma(self) -> int:
        return 4 * self.n_gamma

    def fraction_inside(self, delta: float) -> float:
        return 1.0 - self.outside[delta] / self.n


def block_diag_preconditioner(sys: EmiSystem, drop_membrane: bool = False) -> np.ndarray:
    """Dense block-diagonal preconditioner: interior stiffness blocks, identity on the membrane."""
    dofs = sys.dofs
    A = sys.matrix.csr if not drop_membrane else (sys.matrix.csr - membrane_perturbation(sys)).tocsr()
    P = np.zeros((dofs.n, dofs.n))
    s = slice(0, dofs.n_e_in)
    P[s, s] = A[s, s].toarray()
    s = slice(dofs.i_in_start, dofs.i_in_start + dofs.n_i_in)
    P[s, s] = A[s, s].toarray()
    g = dofs.e_gamma_dofs()
    P[g, g] = 1.0
    g = dofs.i_gamma_dofs()
    P[g, g] = 1.0
    return P


def cluster_report(sys: EmiSystem, deltas=(0.1, 0.01), size_cap: int = 2000,
                   drop_membrane: bool = False) -> ClusterReport:
    """Spectrum of P^{-1/2} A P^{-1/2} and counts outside bands around 1.

    ``drop_membrane`` zeroes the membrane mass/coupling blocks first, which
    reduces the operator to two decoupled bulk problems.
    """
    n = sys.n
    if n > size_cap:
        raise BoundsError(f"dimension {n} exceeds the cluster-report cap {size_cap}")
    P = block_diag_preconditioner(sys, drop_membrane=drop_membrane)
    w, V = scipy.linalg.eigh(P)
    if w[0] <= 0.0:
        raise BoundsError(f"singular block in the preconditioner (smallest eigenvalue {w[0]:.3e})")
    P_inv_half = (V / np.sqrt(w)) @ V.T
    A = sys.matrix.to_dense()
    if drop_membrane:
        A = A - membrane_perturbation(sys).toarray()
    S = P_inv_half @ A @ P_inv_half
    S = 0.5 * (S + S.T)
    eigs = scipy.linalg.eigvalsh(S)
    outside = {
        float(d): int(np.count_nonzero((eigs < 1.0 - d) | (eigs > 1.0 + d))) for d in deltas
    }
    return ClusterReport(n=n, n_gamma=sys.n_gamma, eigenvalues=eigs, outside=outside)
