import dataclasses

import numpy as np
import pytest

from numerics.models import AdscParams, GridFunction, ProblemSpec, SourceSpec
from numerics.kernels import adsc as adsc_kernel
from numerics.kernels import grid, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import MAIN_BETA, NIST_BETA


@pytest.fixture
def adsc_service(services):
    return services["adsc_service"]


def test_gamma_law() -> None:
    params = AdscParams()
    gamma0, gamma1, eta = adsc_kernel.gamma_law(5.56, params)
    assert gamma0 == pytest.approx(0.198, abs=1e-3)
    assert gamma1 == pytest.approx(2.0 * gamma0)
    assert eta == pytest.approx(1.0 - 1.0 / 5.56)
    assert adsc_kernel.gamma_law(0.9, params) == (0.0, 0.0, 0.0)
    assert adsc_kernel.gamma_law(1.0, params) == (0.0, 0.0, 0.0)


def test_gamma_law_is_vectorised() -> None:
    gamma0, _, eta = adsc_kernel.gamma_law(np.array([0.5, 3.0, 1e6]), AdscParams())
    assert gamma0[0] == 0.0
    assert eta[0] == 0.0
    assert gamma0[2] == pytest.approx(0.25, abs=1e-5)


def test_params_validation() -> None:
    with pytest.raises(ValueError):
        AdscParams(gamma_min=0.3, gamma_max=0.2)
    with pytest.raises(ValueError):
        AdscParams(omega=0.0)
    with pytest.raises(ValueError):
        AdscParams(few_shot_cap=0)


def test_theta_score_range(rng) -> None:
    mesh = grid.uniform_mesh2d(16)
    U = GridFunction(mesh, rng.standard_normal(mesh.n_interior))
    theta = adsc_kernel.theta_score(U, MAIN_BETA, 1e-12).values
    assert theta.min() >= 0.0
    assert theta.max() < 1.0 + 1e-12
    chi = adsc_kernel.activation(adsc_kernel.theta_score(U, MAIN_BETA, 1e-12), 5e-2)
    assert np.all((chi >= 0.0) & (chi < 1.0))


def test_theta_score_vanishes_on_monotone_field() -> None:
    mesh = grid.uniform_mesh2d(12)
    U = grid.grid_function_from_callable(mesh, lambda x, y: x + y)
    theta = adsc_kernel.theta_score(U, MAIN_BETA, 1e-12).as_array()
    assert np.all(theta[:-1, :-1] == 0.0)


def test_edge_transfer() -> None:
    mesh = grid.uniform_mesh2d(4, dim=1)
    chi = np.array([1.0, 0.0, 0.0])
    (averaged,) = adsc_kernel.edge_transfer(chi, mesh)
    (sharp,) = adsc_kernel.edge_transfer(chi, mesh, kind="max")
    assert averaged == pytest.approx([1.0, 0.5, 0.0, 0.0])
    assert sharp == pytest.approx([1.0, 1.0, 0.0, 0.0])
    (zero_padded,) = adsc_kernel.edge_transfer(chi, mesh, boundary="zero")
    assert zero_padded == pytest.approx([0.5, 0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        adsc_kernel.edge_transfer(chi, mesh, kind="median")
    with pytest.raises(ValueError):
        adsc_kernel.edge_transfer(chi, mesh, boundary="reflect")


def test_outflow_edge_keeps_the_activation_of_its_node() -> None:
    mesh = grid.uniform_mesh2d(6)
    chi = np.zeros(mesh.shape)
    chi[:, -1] = 1.0
    field = adsc_kernel.activation_field(chi, mesh)
    chi_x = field.chi_x.reshape(5, 6)
    assert chi_x[:, -1] == pytest.approx(np.ones(5))
    assert chi_x[:, -2] == pytest.approx(0.5 * np.ones(5))
    halved = adsc_kernel.activation_field(chi, mesh, boundary="zero").chi_x.reshape(5, 6)
    assert halved[:, -1] == pytest.approx(0.5 * np.ones(5))


def test_edge_transfer_shapes_in_two_dimensions() -> None:
    mesh = grid.uniform_mesh2d(6)
    field = adsc_kernel.activation_field(np.ones(mesh.n_interior), mesh)
    assert field.chi_x.size == 5 * 6
    assert field.chi_y.size == 6 * 5
    assert field.mass == pytest.approx(25.0)


def test_adsc_correction_is_symmetric_psd(rng, main_spec) -> None:
    mesh = grid.uniform_mesh2d(12)
    field = adsc_kernel.activation_field(rng.uniform(0.0, 1.0, mesh.n_interior), mesh)
    S = adsc_kernel.adsc_correction(field, main_spec, mesh, AdscParams()).toarray()
    assert np.allclose(S, S.T, atol=1e-15)
    assert np.linalg.eigvalsh(S).min() >= -1e-12


def test_inactive_regime_reproduces_galerkin(adsc_service, services) -> None:
    mesh = grid.uniform_mesh2d(20)
    spec = ProblemSpec(1.0, MAIN_BETA, SourceSpec.manufactured_sine())
    f = operators.assemble_source(mesh, spec)
    result = adsc_service.solve(mesh, spec, f)
    galerkin = services["discretization_service"].solve("galerkin", mesh, spec, f)
    assert result.iterations_used == 0
    assert result.activation_mass == 0.0
    assert result.stabilization.nnz == 0
    assert np.array_equal(result.solution.values, galerkin.solution.values)


def test_coupled_iteration_converges_on_main_problem(adsc_service, main_spec, main_mesh) -> None:
    f = operators.assemble_source(main_mesh, main_spec)
    result = adsc_service.solve(main_mesh, main_spec, f)
    assert result.stationary
    assert result.final_variation <= 1e-8
    assert 30 <= result.iterations_used <= 70
    assert len(result.variation_history) == result.iterations_used
    assert np.all(np.diff(result.mass_history) >= 0.0)
    assert result.active_node_count > 0


def test_few_shot_cap_stops_early(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(20)
    params = dataclasses.replace(AdscParams(), few_shot_cap=3)
    result = adsc_service.solve(mesh, main_spec, operators.assemble_source(mesh, main_spec), params=params)
    assert result.iterations_used == 3
    assert not result.stationary


def test_activation_history_is_monotone(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(20)
    result = adsc_service.solve(mesh, main_spec, operators.assemble_source(mesh, main_spec),
                                keep_history=True)
    snapshots = result.activation_history
    assert len(snapshots) == result.iterations_used
    for before, after in zip(snapshots, snapshots[1:]):
        assert np.all(after >= before)


def test_fixed_activation_solves_frozen_operator(adsc_service, main_spec, rng) -> None:
    mesh = grid.uniform_mesh2d(16)
    f = operators.assemble_source(mesh, main_spec)
    params = AdscParams()
    field = adsc_kernel.activation_field(rng.uniform(0.0, 1.0, mesh.n_interior), mesh)
    result = adsc_service.solve(mesh, main_spec, f, params=params, mode="fixed_activation",
                                activation=field)
    A = sparse_ops.consolidate(operators.assemble_galerkin(mesh, main_spec)
                               + adsc_kernel.adsc_correction(field, main_spec, mesh, params))
    assert result.iterations_used == 0
    assert np.linalg.norm(A @ result.solution.values - f) <= 1e-10 * np.linalg.norm(f)


def test_fixed_reference_mode(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(16)
    f = operators.assemble_source(mesh, main_spec)
    reference = GridFunction(mesh, sparse_ops.solve(operators.assemble_upwind(mesh, main_spec), f)[0])
    result = adsc_service.solve(mesh, main_spec, f, mode="fixed_reference", reference=reference)
    expected = adsc_kernel.detect(reference, main_spec.beta, AdscParams())
    assert np.allclose(result.activation.chi, expected)


def test_solve_mode_errors(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(8)
    f = operators.assemble_source(mesh, main_spec)
    with pytest.raises(ValueError):
        adsc_service.solve(mesh, main_spec, f, mode="fixed_activation")
    with pytest.raises(ValueError):
        adsc_service.solve(mesh, main_spec, f, mode="fixed_reference")
    with pytest.raises(ValueError):
        adsc_service.solve(mesh, main_spec, f, mode="sideways")


@pytest.mark.parametrize("kind", ["zero", "galerkin", "upwind", "coarse"])
def test_warm_starts(kind, adsc_service) -> None:
    mesh = grid.uniform_mesh2d(40)
    spec = ProblemSpec(1.0, MAIN_BETA, SourceSpec.manufactured_sine())
    f = operators.assemble_source(mesh, spec)
    start = adsc_service.warm_start(kind, mesh, spec, f)
    assert start.shape == (mesh.n_interior,)
    exact = grid.grid_function_from_callable(mesh, operators.exact_solution(spec)).values
    if kind == "zero":
        assert not start.any()
    else:
        assert np.max(np.abs(start - exact)) < 0.1


def test_unknown_warm_start(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(8)
    with pytest.raises(ValueError):
        adsc_service.warm_start("lukewarm", mesh, main_spec, operators.assemble_source(mesh, main_spec))


def test_zero_start_still_converges(adsc_service, main_spec) -> None:
    mesh = grid.uniform_mesh2d(20)
    params = dataclasses.replace(AdscParams(), warm_start="zero")
    result = adsc_service.solve(mesh, main_spec, operators.assemble_source(mesh, main_spec), params=params)
    assert result.iterations_used >= 2
    assert result.activation_mass > 0.0


def test_relaxation_contracts_by_one_minus_omega(main_spec, rng) -> None:
    mesh = grid.uniform_mesh2d(12)
    f = operators.assemble_source(mesh, main_spec)
    A = operators.assemble_upwind(mesh, main_spec)
    target, _ = sparse_ops.solve(A, f)
    iterates = adsc_kernel.relax_fixed_activation(A, f, rng.standard_normal(mesh.n_interior), 0.35, 5)
    errors = [np.linalg.norm(U - target) for U in iterates]
    for before, after in zip(errors, errors[1:]):
        assert after / before == pytest.approx(0.65, abs=1e-8)


def test_layer_problem_below_unit_peclet_is_galerkin(adsc_service) -> None:
    mesh = grid.uniform_mesh2d(60)
    spec = ProblemSpec(1e-2, NIST_BETA, SourceSpec.nist_layer())
    f = operators.assemble_source(mesh, spec)
    galerkin, _ = sparse_ops.solve(operators.assemble_galerkin(mesh, spec), f)
    result = adsc_service.solve(mesh, spec, f)
    assert spec.peclet(mesh.h) == pytest.approx(0.833, rel=1e-3)
    assert result.iterations_used == 0
    assert np.array_equal(result.solution.values, galerkin)
