import numpy as np
import pytest

from numerics.models import GridFunction, ProblemSpec, SourceSpec
from numerics.kernels import grid, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import MAIN_BETA, NIST_BETA, main_problem


def _galerkin_errors(spec: ProblemSpec, Ne: int, method: str = "galerkin"):
    mesh = grid.uniform_mesh2d(Ne)
    f = operators.assemble_source(mesh, spec)
    A = operators.assemble_galerkin(mesh, spec) if method == "galerkin" else operators.assemble_upwind(mesh, spec)
    values, _ = sparse_ops.solve(A, f)
    exact = grid.grid_function_from_callable(mesh, operators.exact_solution(spec))
    error = GridFunction(mesh, values) - exact
    return grid.discrete_l2_norm(error), float(np.max(np.abs(error.values)))


def test_convection_is_skew_symmetric() -> None:
    C = operators.convection_part(grid.uniform_mesh2d(12), main_problem())
    assert abs(C + C.T).max() <= 1e-13 * abs(C).max()


def test_one_dimensional_supg_equals_upwind() -> None:
    mesh = grid.uniform_mesh2d(20, dim=1)
    spec = ProblemSpec(1e-3, (1.0,), SourceSpec.gaussian((0.5,)))
    f = operators.assemble_source(mesh, spec)
    A_supg, _ = operators.assemble_supg(mesh, spec, f)
    A_up = operators.assemble_upwind(mesh, spec)
    assert abs(A_supg - A_up).max() <= 1e-12 * abs(A_up).max()


def test_compact_supg_is_one_dimensional_only(main_spec) -> None:
    mesh = grid.uniform_mesh2d(8)
    with pytest.raises(ValueError):
        operators.assemble_supg(mesh, main_spec, operators.assemble_source(mesh, main_spec), stencil="compact")


def test_operator_rejects_mismatched_beta() -> None:
    mesh = grid.uniform_mesh2d(8, dim=1)
    with pytest.raises(ValueError):
        operators.assemble_galerkin(mesh, main_problem())
    with pytest.raises(ValueError):
        operators.assemble_edge_difference(mesh, "y")


@pytest.mark.parametrize("method", ["cip", "lps"])
def test_symmetric_stabilizations_are_psd(method, main_spec) -> None:
    mesh = grid.uniform_mesh2d(10)
    f = operators.assemble_source(mesh, main_spec)
    K = operators.assemble_galerkin(mesh, main_spec)
    A = operators.assemble_cip(mesh, main_spec) if method == "cip" else operators.assemble_lps(mesh, main_spec, f)[0]
    S = (A - K).toarray()
    assert np.allclose(S, S.T, atol=1e-14)
    assert np.linalg.eigvalsh(S).min() >= -1e-12


def test_layer_profile_boundary_values_and_ode() -> None:
    eps = 0.05
    assert operators.layer_profile(np.array([0.0, 1.0]), eps) == pytest.approx([0.0, 0.0], abs=1e-14)
    t = np.linspace(0.0, 1.0, 11)
    residual = (-eps * operators.layer_profile_second_derivative(t, eps)
                + operators.layer_profile_derivative(t, eps))
    assert residual == pytest.approx(np.ones_like(t))


def test_layer_solution_satisfies_the_pde(rng) -> None:
    spec = ProblemSpec(5e-2, NIST_BETA, SourceSpec.nist_layer())
    exact = operators.exact_solution(spec)
    x, y = rng.uniform(0.05, 0.9, size=(2, 20))
    d = 1e-4
    u = exact(x, y)
    laplacian = (exact(x + d, y) + exact(x - d, y) + exact(x, y + d) + exact(x, y - d) - 4.0 * u) / d**2
    u_x = (exact(x + d, y) - exact(x - d, y)) / (2.0 * d)
    u_y = (exact(x, y + d) - exact(x, y - d)) / (2.0 * d)
    residual = -spec.eps * laplacian + spec.beta[0] * u_x + spec.beta[1] * u_y
    assert residual == pytest.approx(operators.evaluate_source((x, y), spec), abs=1e-5)
    edge = np.linspace(0.0, 1.0, 7)
    assert exact(edge, np.zeros(7)) == pytest.approx(np.zeros(7), abs=1e-14)
    assert exact(np.ones(7), edge) == pytest.approx(np.zeros(7), abs=1e-14)


def test_first_difference_is_exact_for_quadratics_on_graded_nodes() -> None:
    axis = grid.shishkin_mesh2d(30, 1e-2, dim=1).x
    t = axis.interior_nodes
    G = operators.centered_first_difference_1d(axis)
    # u(t) = t(1 - t) vanishes at both ends
    assert G @ (t * (1.0 - t)) == pytest.approx(1.0 - 2.0 * t, abs=1e-12)


@pytest.mark.parametrize("Ne, l2", [(20, 1.039e-3), (40, 2.594e-4), (80, 6.484e-5), (160, 1.621e-5)])
def test_manufactured_errors_inactive_regime(Ne, l2) -> None:
    spec = ProblemSpec(1.0, MAIN_BETA, SourceSpec.manufactured_sine())
    error, _ = _galerkin_errors(spec, Ne)
    assert error == pytest.approx(l2, rel=1e-2)


def test_manufactured_linf_inactive_regime() -> None:
    spec = ProblemSpec(1.0, MAIN_BETA, SourceSpec.manufactured_sine())
    _, linf = _galerkin_errors(spec, 20)
    assert linf == pytest.approx(2.078e-3, rel=1e-2)


@pytest.mark.parametrize("Ne, l2", [(30, 9.076e-4), (45, 4.031e-4), (120, 5.666e-5)])
def test_manufactured_errors_active_regime(Ne, l2) -> None:
    spec = ProblemSpec(2e-3, MAIN_BETA, SourceSpec.manufactured_sine())
    error, _ = _galerkin_errors(spec, Ne)
    assert error == pytest.approx(l2, rel=1e-2)


def test_layer_problem_errors_on_coarse_mesh() -> None:
    spec = ProblemSpec(1e-2, NIST_BETA, SourceSpec.nist_layer())
    gal_l2, gal_linf = _galerkin_errors(spec, 30)
    up_l2, up_linf = _galerkin_errors(spec, 30, method="upwind")
    assert gal_l2 == pytest.approx(2.514e-2, rel=2e-2)
    assert gal_linf == pytest.approx(0.2699, rel=2e-2)
    assert up_l2 == pytest.approx(3.578e-2, rel=2e-2)
    assert up_linf == pytest.approx(0.358, rel=2e-2)


def test_gaussian_center_must_match_dimension() -> None:
    mesh = grid.uniform_mesh2d(8, dim=1)
    spec = ProblemSpec(1e-3, (1.0,), SourceSpec.gaussian((0.5, 0.5)))
    with pytest.raises(ValueError):
        operators.assemble_source(mesh, spec)


@pytest.mark.parametrize("Ne, l2", [(30, 2.895e-3), (60, 2.531e-4), (120, 5.276e-5)])
def test_layer_problem_on_shishkin_mesh(Ne, l2) -> None:
    spec = ProblemSpec(1e-2, NIST_BETA, SourceSpec.nist_layer())
    mesh = grid.shishkin_mesh2d(Ne, spec.eps)
    values, _ = sparse_ops.solve(operators.assemble_galerkin(mesh, spec), operators.assemble_source(mesh, spec))
    exact = grid.grid_function_from_callable(mesh, operators.exact_solution(spec))
    assert grid.discrete_l2_norm(GridFunction(mesh, values) - exact) == pytest.approx(l2, rel=5e-2)
