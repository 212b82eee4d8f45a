import numpy as np
import pytest

from numerics.models import GridFunction
from numerics.kernels import grid, lfa, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import MAIN_BETA, main_problem


@pytest.fixture(scope="module")
def modal45():
    return lfa.modal_set(2e-3, MAIN_BETA, 45)


def test_modal_set_at_main_resolution(modal45) -> None:
    assert modal45.mode_count == 1936
    assert modal45.dominant_count == 1780
    assert modal45.mean_rho_gal == pytest.approx(4.445, rel=5e-3)
    assert modal45.B_mean == pytest.approx(0.686, rel=1e-2)
    assert modal45.peclet == pytest.approx(5.556, rel=1e-3)


def test_gamma0_balance_at_main_resolution(modal45) -> None:
    raw, projected = lfa.gamma0_balance(modal45, modal45.peclet, 1.0, 0.08, 0.25)
    assert raw == pytest.approx(0.452, rel=1e-2)
    assert projected == pytest.approx(0.25)


def test_gamma0_balance_without_excess(modal45) -> None:
    raw, projected = lfa.gamma0_balance(modal45, modal45.peclet, 100.0, 0.08, 0.25)
    assert raw == 0.0
    assert projected == pytest.approx(0.08)


def test_one_dimensional_dominant_count() -> None:
    modal = lfa.modal_set(1e-3, (1.0,), 80)
    assert modal.mode_count == 79
    assert modal.dominant_count == 71


def test_sine_basis_is_orthonormal() -> None:
    basis = lfa.sine_basis_1d(44)
    assert np.allclose(basis.T @ basis, np.eye(44), atol=1e-12)


def test_sine_mode_rejects_out_of_range_index() -> None:
    with pytest.raises(ValueError):
        lfa.sine_mode(10, 10)


def test_rayleigh_without_stabilization_is_galerkin_mean(modal45) -> None:
    assert lfa.rayleigh_rho_stab(None, modal45) == pytest.approx(modal45.mean_rho_gal)


@pytest.mark.parametrize("method, expected", [("upwind", 0.930), ("supg", 1.879), ("cip", 3.149), ("lps", 3.478)])
def test_stabilized_rayleigh_means(method, expected, modal45) -> None:
    mesh, spec = grid.uniform_mesh2d(45), main_problem()
    f = operators.assemble_source(mesh, spec)
    K = operators.assemble_galerkin(mesh, spec)
    A = {
        "upwind": lambda: operators.assemble_upwind(mesh, spec),
        "supg": lambda: operators.assemble_supg(mesh, spec, f)[0],
        "cip": lambda: operators.assemble_cip(mesh, spec),
        "lps": lambda: operators.assemble_lps(mesh, spec, f)[0],
    }[method]()
    assert lfa.rayleigh_rho_stab(A - K, modal45) == pytest.approx(expected, rel=2e-2)
    assert lfa.rayleigh_rho_stab(A - K, modal45) < modal45.mean_rho_gal


def test_reference_modal_solve_scales_a_single_mode(modal45) -> None:
    p, q = 3, 5
    phi = lfa.sine_mode(45, p, q)
    solved = lfa.reference_modal_solve(modal45, phi)
    modulus = np.hypot(modal45.a, modal45.b)[q - 1, p - 1]
    assert np.allclose(solved.values, phi.values / modulus, atol=1e-12)


def test_sine_mode_is_an_eigenvector_of_the_dirichlet_laplacian() -> None:
    Ne, p, q = 24, 5, 17
    mesh = grid.uniform_mesh2d(Ne)
    phi = lfa.sine_mode(Ne, p, q)
    angles = lfa.mode_angles(Ne)
    eigenvalue = (2.0 * Ne**2) * (2.0 - np.cos(angles[p - 1]) - np.cos(angles[q - 1]))
    applied = operators.diffusion_part(mesh, 1.0) @ phi.values
    assert np.max(np.abs(applied - eigenvalue * phi.values)) <= 1e-10 * eigenvalue


def test_reference_modal_solve_without_convection_is_the_laplacian_solve(rng) -> None:
    Ne, eps = 20, 3e-2
    modal = lfa.modal_set(eps, (0.0, 0.0), Ne)
    assert modal.dominant_count == 0
    assert np.all(modal.b == 0.0)
    mesh = grid.uniform_mesh2d(Ne)
    f = GridFunction(mesh, rng.standard_normal(mesh.n_interior))
    expected, _ = sparse_ops.solve(operators.diffusion_part(mesh, eps), f.values)
    solved = lfa.reference_modal_solve(modal, f)
    assert np.max(np.abs(solved.values - expected)) <= 1e-10 * np.max(np.abs(expected))


def test_reference_modal_solve_rejects_wrong_shape(modal45) -> None:
    phi = lfa.sine_mode(30, 1, 1)
    with pytest.raises(ValueError):
        lfa.reference_modal_solve(modal45, phi)


def test_footprint_shapes() -> None:
    points, jacobian = lfa.footprint_sample(2e-3, MAIN_BETA, 1 / 45, grid_density=16)
    assert points.shape == (256,)
    assert jacobian.shape == (256,)
    assert np.all(points.real > 0.0)
    points_1d, jacobian_1d = lfa.footprint_sample(1e-3, (1.0,), 1 / 80, grid_density=16)
    assert points_1d.shape == (16,)
    assert jacobian_1d is None


def test_rectified_modulus_has_a_corner() -> None:
    profile = lfa.corner_profile(2e-3, MAIN_BETA, 1 / 45, MAIN_BETA)
    expected = profile["expected_slope"]
    assert expected == pytest.approx(45.0)
    assert profile["right_slope"] == pytest.approx(expected, rel=1e-2)
    assert profile["left_slope"] == pytest.approx(-expected, rel=1e-2)


def test_symbol_matches_periodic_stencil(rng) -> None:
    size, h = 16, 1 / 45
    j = np.arange(size)
    J, K = np.meshgrid(j, j, indexing="xy")
    for _ in range(4):
        m = rng.integers(0, size, 2)
        theta = 2.0 * np.pi * m / size
        field = np.exp(1j * (theta[0] * J + theta[1] * K))
        sym = lfa.symbol(2e-3, MAIN_BETA, h, (theta[0], theta[1]))
        applied = lfa.apply_periodic_stencil(2e-3, MAIN_BETA, h, field)
        assert np.allclose(applied, (sym.a + 1j * sym.b) * field, atol=1e-10)


def test_symbol_needs_one_angle_per_direction() -> None:
    with pytest.raises(ValueError):
        lfa.symbol(1e-3, (1.0, 0.0), 0.1, (0.3,))


def test_alpha_star() -> None:
    assert lfa.alpha_star(1e-3, 0.0) == pytest.approx(0.0)
    assert lfa.alpha_star(1.0, np.sqrt(3.0)) == pytest.approx(1.0)
