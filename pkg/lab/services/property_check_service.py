import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
import scipy.sparse as sp
from scipy.stats import linregress

from config.settings import Settings
from numerics.models import GridFunction, Mesh2D, ProblemSpec, SourceSpec
from numerics.kernels import adsc as adsc_kernel
from numerics.kernels import grid, lfa, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import main_problem
from lab.services.adsc_service import AdscService


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str


class PropertyCheckService:
    """Seeded algebraic and analytic checks of the discretizations."""

    def __init__(self, settings: Settings, adsc_service: AdscService):
        self.settings = settings
        self.adsc_service = adsc_service

    def _stabilized_operators(self, mesh: Mesh2D, spec: ProblemSpec, rng: np.random.Generator) -> Dict[str, sp.csr_matrix]:
        f = operators.assemble_source(mesh, spec)
        K = operators.assemble_galerkin(mesh, spec)
        params = self.settings.adsc_params
        chi = rng.uniform(0.0, 1.0, mesh.n_interior)
        field = adsc_kernel.activation_field(chi, mesh, params.transfer_kind, params.boundary_transfer)
        sharp = adsc_kernel.edge_transfer(np.round(chi), mesh, kind="max")
        return {
            "galerkin": K,
            "upwind": operators.assemble_upwind(mesh, spec),
            "supg": operators.assemble_supg(mesh, spec, f)[0],
            "cip": operators.assemble_cip(mesh, spec, gamma=self.settings.CIP_GAMMA),
            "lps": operators.assemble_lps(mesh, spec, f, gamma=self.settings.LPS_GAMMA)[0],
            "afc": sparse_ops.consolidate(K + operators.edge_diffusion(
                mesh, operators.afc_weights(mesh, spec, sharp, self.settings.AFC_THETA))),
            "adsc": sparse_ops.consolidate(K + adsc_kernel.adsc_correction(field, spec, mesh, params)),
        }

    def check_skew_symmetry(self, rng: np.random.Generator) -> CheckOutcome:
        worst = 0.0
        for mesh, spec in ((grid.uniform_mesh2d(45), main_problem()),
                           (grid.uniform_mesh2d(40, dim=1), ProblemSpec(1e-3, (1.0,), SourceSpec.gaussian((0.5,))))):
            C = operators.convection_part(mesh, spec)
            worst = max(worst, float(abs(C + C.T).max()))
        return CheckOutcome("convection_skew_symmetry", worst <= 1e-13, f"max |C + C^T| = {worst:.2e}")

    def check_stabilization_psd(self, rng: np.random.Generator, samples: int = 100) -> CheckOutcome:
        mesh, spec = grid.uniform_mesh2d(20), main_problem()
        ops = self._stabilized_operators(mesh, spec, rng)
        K = ops.pop("galerkin")
        X = rng.standard_normal((mesh.n_interior, samples))
        failures = []
        for method, A in ops.items():
            S = A - K
            scale = max(float(abs(A).max()), 1.0)
            asym = float(abs(S - S.T).max()) if S.nnz else 0.0
            quad = np.einsum("ij,ij->j", X, S @ X)
            floor = -1e-12 * scale * np.einsum("ij,ij->j", X, X)
            if asym > 1e-12 * scale or np.any(quad < floor):
                failures.append(f"{method} (asym {asym:.1e}, min x^T S x {quad.min():.2e})")
        detail = "all stabilizations symmetric PSD" if not failures else "; ".join(failures)
        return CheckOutcome("stabilization_symmetric_psd", not failures, detail)

    def check_energy_coercivity(self, rng: np.random.Generator, samples: int = 100) -> CheckOutcome:
        """h^d x^T A x >= eps |x|_{1,h}^2 for every method on a uniform mesh."""
        mesh, spec = grid.uniform_mesh2d(20), main_problem()
        weight = mesh.h**mesh.dim
        worst = np.inf
        for method, A in self._stabilized_operators(mesh, spec, rng).items():
            for _ in range(samples):
                x = rng.standard_normal(mesh.n_interior)
                energy = weight * float(x @ (A @ x))
                bound = spec.eps * grid.discrete_h1_seminorm(GridFunction(mesh, x))**2
                worst = min(worst, energy - bound)
        return CheckOutcome("energy_coercivity", worst >= -1e-10,
                            f"min h^d x^T A x - eps |x|^2_1,h = {worst:.3e}")

    def check_sine_orthonormality(self, rng: np.random.Generator) -> CheckOutcome:
        basis = lfa.sine_basis_1d(44)
        error = float(np.max(np.abs(basis.T @ basis - np.eye(44))))
        return CheckOutcome("sine_orthonormality", error <= 1e-12, f"max |Phi^T Phi - I| = {error:.2e}")

    def check_symbol_identity(self, rng: np.random.Generator, size: int = 32) -> CheckOutcome:
        spec = main_problem()
        h = 1.0 / 45
        j = np.arange(size)
        J, K = np.meshgrid(j, j, indexing="xy")
        worst = 0.0
        for _ in range(8):
            m = rng.integers(0, size, 2)
            theta = 2.0 * np.pi * m / size
            field = np.exp(1j * (theta[0] * J + theta[1] * K))
            sym = lfa.symbol(spec.eps, spec.beta, h, (theta[0], theta[1]))
            applied = lfa.apply_periodic_stencil(spec.eps, spec.beta, h, field)
            worst = max(worst, float(np.max(np.abs(applied - (sym.a + 1j * sym.b) * field))))
        return CheckOutcome("symbol_identity", worst <= 1e-10, f"max stencil/symbol mismatch {worst:.2e}")

    def check_activation_monotonicity(self, rng: np.random.Generator) -> CheckOutcome:
        mesh, spec = grid.uniform_mesh2d(20), main_problem()
        result = self.adsc_service.solve(mesh, spec, operators.assemble_source(mesh, spec),
                                         keep_history=True)
        snapshots = result.activation_history
        decreases = sum(int(np.any(b < a)) for a, b in zip(snapshots, snapshots[1:]))
        return CheckOutcome("activation_monotonicity", decreases == 0,
                            f"{len(snapshots)} updates, {decreases} with a decreasing node")

    def check_relaxation_ratio(self, rng: np.random.Generator, steps: int = 5) -> CheckOutcome:
        mesh, spec = grid.uniform_mesh2d(20), main_problem()
        params = self.settings.adsc_params
        f = operators.assemble_source(mesh, spec)
        field = adsc_kernel.activation_field(rng.uniform(0.0, 1.0, mesh.n_interior), mesh,
                                             params.transfer_kind, params.boundary_transfer)
        A = sparse_ops.consolidate(operators.assemble_galerkin(mesh, spec)
                                   + adsc_kernel.adsc_correction(field, spec, mesh, params))
        target, _ = sparse_ops.solve(A, f, tol=self.settings.SOLVER_TOL)
        iterates = adsc_kernel.relax_fixed_activation(A, f, rng.standard_normal(mesh.n_interior),
                                                      params.omega, steps, tol=self.settings.SOLVER_TOL)
        errors = [float(np.linalg.norm(U - target)) for U in iterates]
        ratios = [b / a for a, b in zip(errors, errors[1:])]
        worst = max(abs(r - (1.0 - params.omega)) for r in ratios)
        return CheckOutcome("relaxation_ratio", worst <= 1e-8,
                            f"ratios {', '.join(f'{r:.6f}' for r in ratios)} (target {1.0 - params.omega:.6f})")

    def check_detector_variation(self, rng: np.random.Generator) -> CheckOutcome:
        """Neighbour variation of the regularized activation on smooth samples shrinks like O(h)."""
        params = self.settings.adsc_params
        steps, variations = [], []
        for Ne in (20, 40, 80):
            mesh = grid.uniform_mesh2d(Ne)
            U = grid.grid_function_from_callable(
                mesh, lambda x, y: 0.25 * np.sin(np.pi * x) * np.sin(np.pi * y))
            chi = adsc_kernel.activation(adsc_kernel.theta_score(U, (1.0, 0.0), delta_h=1.0),
                                         params.eta_det).reshape(mesh.shape)
            jump = np.zeros(mesh.shape)
            jump[:, :-1] += np.abs(np.diff(chi, axis=1))
            jump[:-1, :] += np.abs(np.diff(chi, axis=0))
            steps.append(mesh.h)
            variations.append(float(jump.max()))
        fit = linregress(np.log(steps), np.log(variations))
        return CheckOutcome("detector_variation", fit.slope >= 0.9,
                            f"fitted slope {fit.slope:.3f} over Ne=20,40,80")

    def run_all(self, seed: int) -> List[CheckOutcome]:
        checks: List[Callable[[np.random.Generator], CheckOutcome]] = [
            self.check_skew_symmetry,
            self.check_stabilization_psd,
            self.check_energy_coercivity,
            self.check_sine_orthonormality,
            self.check_symbol_identity,
            self.check_activation_monotonicity,
            self.check_relaxation_ratio,
            self.check_detector_variation,
        ]
        rng = np.random.default_rng(seed)
        outcomes = []
        for check in checks:
            outcome = check(rng)
            log = logging.info if outcome.passed else logging.error
            log(f"Check {outcome.name}: {'ok' if outcome.passed else 'FAILED'} ({outcome.detail})")
            outcomes.append(outcome)
        return outcomes
