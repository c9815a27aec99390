import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from emisolve import build_system
from emisolve.krylov import (
    IndefiniteOperatorError,
    PreconditionerError,
    SolveConfig,
    SsorPreconditioner,
    TriangularSolver,
    cg_solve,
    ilu0_factor,
    make_preconditioner,
)

rng = np.random.default_rng(2024)


def spd_random(n, density=0.08, seed=0):
    B = sp.random(n, n, density=density, random_state=seed)
    A = (B @ B.T).tocsr() + sp.eye(n) * n * 0.05
    return A.tocsr()


def test_identity_converges_in_one_iteration():
    A = sp.eye(30).tocsr()
    rep = cg_solve(A, rng.standard_normal(30))
    assert rep.iterations == 1 and rep.converged


def test_two_cluster_matrix_two_iterations():
    d = np.concatenate([np.full(10, 1.0), np.full(10, 3.0)])
    rep = cg_solve(sp.diags(d).tocsr(), rng.standard_normal(20))
    assert rep.iterations <= 2 and rep.converged


def test_reported_residual_is_true_residual():
    A = spd_random(60)
    b = rng.standard_normal(60)
    rep = cg_solve(A, b, cfg=SolveConfig(tol=1e-8))
    assert rep.converged
    assert np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b) <= 1e-8
    assert rep.rel_residual == pytest.approx(
        np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b), rel=1e-12
    )
    assert len(rep.history) == rep.iterations
    assert (rep.history > 0).all()


def test_indefinite_breakdown():
    A = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(IndefiniteOperatorError):
        cg_solve(A, np.array([0.0, 1.0]))


def test_maxit_report():
    A = spd_random(80, seed=5)
    rep = cg_solve(A, rng.standard_normal(80), cfg=SolveConfig(tol=1e-14, maxit=2))
    assert not rep.converged
    assert rep.iterations == 2


def test_zero_rhs():
    rep = cg_solve(sp.eye(4).tocsr(), np.zeros(4))
    assert rep.converged and rep.iterations == 0


def test_solution_correctness_with_each_preconditioner():
    sys = build_system(8, 0.01)
    A, b = sys.matrix.csr, sys.rhs
    for tag in ("identity", "jacobi", "ssor", "ilu0"):
        M = make_preconditioner(A, tag)
        rep = cg_solve(A, b, M=M, cfg=SolveConfig(precond=tag))
        assert rep.converged, tag
        assert np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b) <= 1e-6, tag


@pytest.mark.parametrize("tag", ["identity", "jacobi", "ssor", "ilu0"])
def test_preconditioner_symmetry_probe(tag):
    sys = build_system(8, 0.01)
    M = make_preconditioner(sys.matrix.csr, tag)
    local = np.random.default_rng(7)
    for _ in range(20):
        u = local.standard_normal(sys.n)
        v = local.standard_normal(sys.n)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        Mu, Mv = M.apply(u), M.apply(v)
        scale = max(1.0, abs(u @ Mv), abs(v @ Mu))
        assert abs(u @ Mv - v @ Mu) <= 1e-12 * scale


def test_jacobi_on_identity_is_identity():
    M = make_preconditioner(sp.eye(9).tocsr(), "jacobi")
    v = rng.standard_normal(9)
    assert np.array_equal(M.apply(v), v)


def test_zero_diagonal_reports_row():
    A = sp.diags([1.0, 0.0, 2.0]).tocsr()
    with pytest.raises(PreconditionerError, match="row 1"):
        make_preconditioner(A, "jacobi")


def test_unknown_tag():
    with pytest.raises(PreconditionerError, match="unknown"):
        make_preconditioner(sp.eye(2).tocsr(), "amg")


def test_ilu0_tridiagonal_is_exact():
    T = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(40, 40)).tocsr()
    M = make_preconditioner(T, "ilu0")
    rep = cg_solve(T, rng.standard_normal(40), M=M, cfg=SolveConfig(precond="ilu0"))
    assert rep.iterations == 1


def test_ilu0_matches_dense_reference():
    # brute-force pattern-restricted elimination as an independent oracle
    sys = build_system(8, 0.1)
    A = sys.matrix.csr
    dense = A.toarray()
    pattern = dense != 0
    n = dense.shape[0]
    ref = dense.copy()
    for i in range(n):
        for k in range(i):
            if pattern[i, k]:
                ref[i, k] /= ref[k, k]
                for j in range(k + 1, n):
                    if pattern[i, j]:
                        ref[i, j] -= ref[i, k] * ref[k, j]
    L, U = ilu0_factor(A)
    assert np.abs((L + U).toarray() - np.where(pattern, ref, 0.0)).max() == 0.0


def test_ssor_matches_dense_formula():
    sys = build_system(8, 0.1)
    A = sys.matrix.to_dense()
    omega = 1.3
    M = SsorPreconditioner(sys.matrix.csr, omega=omega, ordering="natural")
    r = rng.standard_normal(sys.n)
    D = np.diag(A.diagonal()) / omega
    Lo = np.tril(A, -1)
    Up = np.triu(A, 1)
    z_ref = np.linalg.solve(
        D + Up, np.diag(A.diagonal()) @ np.linalg.solve(D + Lo, r)
    ) * ((2.0 - omega) / omega)
    assert np.abs(M.apply(r) - z_ref).max() < 1e-11


def test_ssor_omega_guard():
    with pytest.raises(PreconditionerError, match="omega"):
        make_preconditioner(sp.eye(3).tocsr(), "ssor", omega=2.5)


@pytest.mark.parametrize("lower", [True, False])
def test_triangular_solver_vs_scipy(lower):
    A = spd_random(150, seed=11)
    T = (sp.tril(A) if lower else sp.triu(A)).tocsr()
    b = rng.standard_normal(150)
    x = TriangularSolver(T, lower=lower).solve(b)
    ref = spla.spsolve_triangular(T, b, lower=lower)
    assert np.abs(x - ref).max() < 1e-10


def test_triangular_solver_unit_diag():
    L = sp.tril(spd_random(50, seed=3), k=-1).tocsr() + sp.eye(50, format="csr")
    b = rng.standard_normal(50)
    x = TriangularSolver(L, lower=True, unit_diag=True).solve(b)
    assert np.abs(L @ x - b).max() < 1e-10


def test_tau_robustness_small_grid():
    # iteration counts barely move across four decades of tau
    counts = []
    for tau in (1.0, 0.1, 0.01, 0.001):
        sys = build_system(16, tau)
        counts.append(cg_solve(sys.matrix, sys.rhs).iterations)
    assert max(counts) / min(counts) <= 2.0


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolveConfig(maxit=0)


def test_report_json_dict():
    rep = cg_solve(sp.eye(3).tocsr(), np.ones(3))
    d = rep.to_json_dict(n=3)
    assert d["iterations"] == 1 and d["converged"] and d["n"] == 3
