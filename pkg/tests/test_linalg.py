import numpy as np
import pytest
import scipy.sparse as sp

from oseen_phs.assembly import assemble_divergence, assemble_mass, assemble_pressure_mass, assemble_stiffness
from oseen_phs.assembly import build_dofmap
from oseen_phs.linalg import block_rhs, factorize_saddle, solve_saddle, spmv
from oseen_phs.utils.errors import DimensionError, SingularSystemError
from oseen_phs.type import SaddleSystem


def small_system(rng: np.random.Generator, n: int = 6, m: int = 2) -> SaddleSystem:
    q = rng.standard_normal((n, n))
    a = q @ q.T + n * np.eye(n)
    bt = rng.standard_normal((n, m))
    return SaddleSystem(a=sp.csr_matrix(a), bt=sp.csr_matrix(bt), rhs=rng.standard_normal(n + m))


def dense_solution(system: SaddleSystem) -> np.ndarray:
    return np.linalg.solve(system.block_matrix().toarray(), system.rhs)


def stokes_system(mesh, rng, shift: float, viscosity: float, schur=None) -> SaddleSystem:
    free = build_dofmap(mesh).free_dofs
    a = (shift * assemble_mass(mesh) + viscosity * assemble_stiffness(mesh))[free][:, free]
    bt = assemble_divergence(mesh).T.tocsr()[free]
    rhs = block_rhs(rng.standard_normal(len(free)), np.zeros(bt.shape[1]))
    return SaddleSystem(a=a.tocsr(), bt=bt, rhs=rhs, schur=schur)


def test_spmv(rng):
    matrix = sp.random(5, 4, density=0.5, format="csr", random_state=1)
    x = rng.standard_normal(4)

    assert np.allclose(spmv(matrix, x), matrix.toarray() @ x)


@pytest.mark.parametrize("x", [np.zeros(3), np.zeros((4, 1))])
def test_spmv_rejects_wrong_shape(x):
    with pytest.raises(DimensionError):
        spmv(sp.eye(4, format="csr"), x)


@pytest.mark.parametrize("backend", ["lu", "gmres"])
def test_solve_small_system(rng, backend):
    system = small_system(rng)
    solution, residual, iterations = solve_saddle(system, tol=1e-12, backend=backend)

    assert np.allclose(solution, dense_solution(system), atol=1e-9)
    assert residual <= 1e-10 * np.linalg.norm(system.rhs)
    assert iterations >= 1


def test_factorization_is_reused(rng):
    system = small_system(rng)
    factorization = factorize_saddle(system)

    for _ in range(3):
        rhs = rng.standard_normal(factorization.size)
        result = factorization.solve(rhs)
        assert np.allclose(system.block_matrix() @ result.solution, rhs, atol=1e-10)


def test_zero_rhs(rng):
    result = factorize_saddle(small_system(rng)).solve(np.zeros(8))

    assert np.array_equal(result.solution, np.zeros(8))
    assert result.iterations == 0


def test_rhs_size_is_checked(rng):
    with pytest.raises(DimensionError):
        factorize_saddle(small_system(rng)).solve(np.zeros(5))


def test_without_constraints(rng):
    a = sp.diags([2.0, 4.0, 8.0], format="csr")
    system = SaddleSystem(a=a, bt=sp.csr_matrix((3, 0)), rhs=np.array([2.0, 2.0, 2.0]))

    solution, _, _ = solve_saddle(system)

    assert np.allclose(solution, [1.0, 0.5, 0.25])


def test_singular_system():
    a = sp.diags([2.0, 3.0, 4.0], format="csr")
    bt = sp.csr_matrix(np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))
    system = SaddleSystem(a=a, bt=bt, rhs=np.ones(5))

    with pytest.raises(SingularSystemError):
        solve_saddle(system)


@pytest.mark.parametrize(
    "a, bt, rhs",
    [
        (sp.eye(3, 2, format="csr"), sp.csr_matrix((3, 1)), np.zeros(4)),
        (sp.eye(3, format="csr"), sp.csr_matrix((2, 1)), np.zeros(4)),
        (sp.eye(3, format="csr"), sp.csr_matrix((3, 1)), np.zeros(3)),
    ],
)
def test_system_shapes_are_validated(a, bt, rhs):
    with pytest.raises(ValueError):
        SaddleSystem(a=a, bt=bt, rhs=rhs)


@pytest.mark.parametrize("backend", ["lu", "gmres"])
def test_stokes_system(channel, rng, backend):
    system = stokes_system(channel, rng, 1.0, 1.0)
    bt = system.bt
    free = build_dofmap(channel).free_dofs

    solution, residual, _ = solve_saddle(system, tol=1e-10, backend=backend)

    assert residual <= 1e-8 * np.linalg.norm(system.rhs)
    assert np.allclose(bt.T @ solution[: len(free)], 0.0, atol=1e-9)
    if backend == "lu":
        assert np.allclose(solution, dense_solution(system), atol=1e-8)


@pytest.mark.parametrize("shift, viscosity", [(1.0, 1.0), (200.0, 1.0), (200.0, 1e-3)])
def test_backends_agree(channel, rng, shift, viscosity):
    tol = 1e-10
    h = channel.max_edge_length
    schur = sp.csr_matrix(assemble_pressure_mass(channel) / (viscosity + shift * h**2))
    system = stokes_system(channel, rng, shift, viscosity, schur=schur)

    direct, _, _ = solve_saddle(system, tol=tol, backend="lu")
    iterative, residual, _ = solve_saddle(system, tol=tol, backend="gmres")

    # forward error of two solutions that both meet the residual target
    condition = np.linalg.cond(system.block_matrix().toarray())
    assert residual <= 10 * tol * np.linalg.norm(system.rhs)
    assert np.linalg.norm(iterative - direct) <= 10 * tol * condition * np.linalg.norm(direct)


def test_small_system_backends_agree(rng):
    tol = 1e-10
    system = small_system(rng)

    direct, _, _ = solve_saddle(system, tol=tol, backend="lu")
    iterative, _, _ = solve_saddle(system, tol=tol, backend="gmres")

    condition = np.linalg.cond(system.block_matrix().toarray())
    assert np.linalg.norm(iterative - direct) <= 10 * tol * condition * np.linalg.norm(direct)


def test_schur_shape_is_validated(channel, rng):
    with pytest.raises(ValueError):
        stokes_system(channel, rng, 1.0, 1.0, schur=sp.eye(3, format="csr"))


def test_block_rhs():
    assert np.array_equal(block_rhs(np.ones(2)), np.ones(2))
    assert np.array_equal(block_rhs(np.ones(2), np.zeros(1)), [1.0, 1.0, 0.0])
