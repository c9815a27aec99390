import numpy as np
import pytest

from emisolve import GridSpec, build_grid, build_system, cg_solve
from emisolve.krylov import SolveConfig
from emisolve.multigrid import (
    MgConfig,
    MgPreconditioner,
    MultigridError,
    build_hierarchy,
    v_cycle,
)

rng = np.random.default_rng(99)


@pytest.fixture(scope="module")
def hierarchy16():
    return build_hierarchy(build_system(16, 1.0))


def test_level_sizes(hierarchy16):
    assert [l.N for l in hierarchy16.levels] == [16, 8, 4]
    assert hierarchy16.levels[-1].dofs.n <= 200


def test_membrane_halves_per_level(hierarchy16):
    gammas = [l.dofs.n_gamma for l in hierarchy16.levels]
    assert gammas == [32, 16, 8]


def test_variational_coarse_operators(hierarchy16):
    for lvl, P in zip(range(len(hierarchy16.prolongations)), hierarchy16.prolongations):
        A_f = hierarchy16.levels[lvl].A
        A_c = hierarchy16.levels[lvl + 1].A
        G = (P.T @ A_f @ P).toarray()
        scale = np.abs(G).max()
        assert np.abs(G - A_c.toarray()).max() <= 1e-12 * scale


def test_galerkin_equals_assembled_on_free_dofs(hierarchy16):
    # nested spaces: the triple product reproduces the directly assembled
    # coarse operator away from the eliminated boundary rows
    sys8 = build_system(8, 1.0)
    free = np.ones(sys8.n, bool)
    free[sys8.dofs.boundary_dofs] = False
    diff = (hierarchy16.levels[1].A - sys8.matrix.csr)[free][:, free]
    defect = np.abs(diff.toarray()).max() if diff.nnz else 0.0
    assert defect <= 1e-12


def test_zero_residual_maps_to_zero(hierarchy16):
    assert np.all(v_cycle(hierarchy16, np.zeros(hierarchy16.levels[0].dofs.n)) == 0.0)


def test_v_cycle_linear(hierarchy16):
    n = hierarchy16.levels[0].dofs.n
    r1, r2 = rng.standard_normal(n), rng.standard_normal(n)
    lhs = v_cycle(hierarchy16, 2.0 * r1 - 0.5 * r2)
    rhs = 2.0 * v_cycle(hierarchy16, r1) - 0.5 * v_cycle(hierarchy16, r2)
    assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(lhs).max())


def test_v_cycle_symmetric(hierarchy16):
    n = hierarchy16.levels[0].dofs.n
    for _ in range(5):
        u, r = rng.standard_normal(n), rng.standard_normal(n)
        u /= np.linalg.norm(u)
        r /= np.linalg.norm(r)
        lhs = u @ v_cycle(hierarchy16, r)
        rhs = r @ v_cycle(hierarchy16, u)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), abs(rhs))


def test_requires_power_of_two():
    with pytest.raises(MultigridError, match="power of two"):
        build_hierarchy(build_system(12, 1.0))
    with pytest.raises(MultigridError, match="power of two"):
        build_hierarchy(build_system(4, 1.0))


def test_coarse_threshold_guard():
    with pytest.raises(MultigridError, match="threshold"):
        build_hierarchy(build_system(8, 1.0), MgConfig(coarse_threshold=10))


def test_config_validation():
    with pytest.raises(MultigridError):
        MgConfig(omega=0.0)
    with pytest.raises(MultigridError):
        MgConfig(nu_pre=0, nu_post=0)
    with pytest.raises(MultigridError):
        MgConfig(cycle="W")


def test_smoother_reduces_energy_norm():
    sys = build_system(16, 1.0)
    A = sys.matrix.csr
    omega = 2.0 / 3.0
    inv_diag = 1.0 / A.diagonal()
    for _ in range(20):
        e = rng.standard_normal(sys.n)
        before = e @ (A @ e)
        e_next = e - omega * inv_diag * (A @ e)
        after = e_next @ (A @ e_next)
        assert after < before


def test_pcg_mg_small_grid():
    sys = build_system(32, 1.0)
    rep = cg_solve(sys.matrix, sys.rhs, M=MgPreconditioner(sys), cfg=SolveConfig(precond="mg"))
    assert rep.converged
    assert rep.iterations <= 12


def test_pcg_mg_small_tau():
    sys = build_system(32, 0.001)
    rep = cg_solve(sys.matrix, sys.rhs, M=MgPreconditioner(sys), cfg=SolveConfig(precond="mg"))
    assert rep.converged
    assert rep.iterations <= 12
