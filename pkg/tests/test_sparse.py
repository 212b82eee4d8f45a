import numpy as np
import pytest
import scipy.sparse as sp

from numerics.exceptions import SingularMatrixError, SolverError
from numerics.kernels import grid, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import main_problem


def _system(Ne: int = 12):
    mesh = grid.uniform_mesh2d(Ne)
    spec = main_problem()
    return operators.assemble_upwind(mesh, spec), operators.assemble_source(mesh, spec)


def test_consolidate_sums_duplicates_and_drops_zeros() -> None:
    A = sp.coo_matrix(([1.0, 2.0, 0.0], ([0, 0, 1], [0, 0, 1])), shape=(2, 2))
    C = sparse_ops.consolidate(A)
    assert C.nnz == 1
    assert C[0, 0] == pytest.approx(3.0)
    assert C.has_sorted_indices


def test_triple_product_is_exactly_symmetric(rng) -> None:
    D = sp.random(7, 5, density=0.5, random_state=3, format="csr")
    S = sparse_ops.triple_product(D.T, rng.uniform(0.0, 1.0, 7), D)
    assert S.shape == (5, 5)
    assert abs(S - S.T).max() == 0.0


def test_triple_product_rejects_nonconforming_weights() -> None:
    D = sp.identity(4, format="csr")
    with pytest.raises(ValueError):
        sparse_ops.triple_product(D.T, np.ones(3), D)


def test_direct_solve_meets_residual_target(rng) -> None:
    A, _ = _system()
    b = rng.standard_normal(A.shape[0])
    x, report = sparse_ops.solve(A, b, tol=1e-12)
    assert report.method == "direct"
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_zero_rhs_returns_zero() -> None:
    A, _ = _system(6)
    x, report = sparse_ops.solve(A, np.zeros(A.shape[0]))
    assert not x.any()
    assert report.residual_norm == 0.0


def test_singular_matrix_raises_solver_error() -> None:
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        sparse_ops.solve(A, np.array([1.0, 0.0]))
    assert issubclass(SingularMatrixError, SolverError)


def test_iterative_solve(rng) -> None:
    A, f = _system()
    x, report = sparse_ops.solve(A, f, tol=1e-10, method="iterative")
    assert report.method == "iterative"
    assert np.linalg.norm(A @ x - f) <= 1e-10 * np.linalg.norm(f)


def test_solve_rejects_bad_arguments() -> None:
    A, f = _system(6)
    with pytest.raises(ValueError):
        sparse_ops.solve(A, f, method="magic")
    with pytest.raises(ValueError):
        sparse_ops.solve(A, f[:-1])


def test_matrix_market_dump(tmp_path) -> None:
    A, _ = _system(6)
    path = sparse_ops.dump_matrix_market(A, tmp_path / "ops" / "upwind.mtx", comment="upwind")
    assert path.exists()
    assert path.read_text().startswith("%%MatrixMarket")
