import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from config.settings import Settings
from numerics.models import GridFunction, Mesh2D, ProblemSpec
from numerics.kernels import grid, operators
from numerics.kernels import sparse as sparse_ops
from lab.scenarios import ReferenceSpec


@dataclass(frozen=True)
class ReferenceSolution:
    """Reference values on a benchmark mesh; E_ext is measured against their extrema."""
    values: GridFunction
    source: str
    fine: Optional[GridFunction] = None
    check_difference: Optional[float] = None

    @property
    def lower(self) -> float:
        return float(self.values.values.min())

    @property
    def upper(self) -> float:
        return float(self.values.values.max())

    @property
    def amplitude(self) -> float:
        return max(abs(self.lower), abs(self.upper))


class ReferenceService:

    def __init__(self, settings: Settings):
        self.settings = settings
        self._fine_cache: Dict[Tuple[ProblemSpec, int, int], GridFunction] = {}

    def fine_solution(self, spec: ProblemSpec, n_ref: int, dim: int = 2) -> GridFunction:
        key = (spec, n_ref, dim)
        cached = self._fine_cache.get(key)
        if cached is not None:
            return cached
        mesh = grid.uniform_mesh2d(n_ref, dim=dim)
        Pe_ref = spec.peclet(mesh.h)
        if Pe_ref >= 1.0:
            logging.warning(
                f"Fine-grid reference at N_ref={n_ref} has Pe_h={Pe_ref:.3f} >= 1; "
                f"centered Galerkin may oscillate")
        logging.info(f"Computing fine-grid reference N_ref={n_ref} ({mesh.n_interior} unknowns)")
        values, _ = sparse_ops.solve(operators.assemble_galerkin(mesh, spec),
                                     operators.assemble_source(mesh, spec),
                                     tol=self.settings.SOLVER_TOL,
                                     method=self.settings.SOLVER_METHOD)
        fine = GridFunction(mesh, values)
        self._fine_cache[key] = fine
        return fine

    def compute_reference(self, reference: ReferenceSpec, mesh: Mesh2D,
                          spec: ProblemSpec) -> ReferenceSolution:
        """Exact samples or an interpolated fine-grid Galerkin solution on mesh."""
        if reference.kind == "exact_formula":
            exact = operators.exact_solution(spec)
            if exact is None:
                raise ValueError(f"Problem with source '{spec.source.kind}' has no exact solution")
            return ReferenceSolution(grid.grid_function_from_callable(mesh, exact), source="exact")

        n_ref = reference.n_ref or self.settings.REFERENCE_N_REF
        fine = self.fine_solution(spec, n_ref, mesh.dim)
        values = grid.interpolate_to_coarse(fine, mesh)
        check_difference = None
        check_n_ref = reference.check_n_ref or self.settings.REFERENCE_CHECK_N_REF
        if check_n_ref and check_n_ref != n_ref:
            check = grid.interpolate_to_coarse(self.fine_solution(spec, check_n_ref, mesh.dim), mesh)
            check_difference = grid.discrete_l2_norm(values - check)
            message = (f"Reference self-check N_ref={n_ref} vs {check_n_ref}: "
                       f"L2 difference {check_difference:.3e} on Ne={mesh.Ne}")
            if check_difference > 1e-4:
                logging.warning(message)
            else:
                logging.info(message)
        return ReferenceSolution(values, source=f"fine_grid:{n_ref}", fine=fine,
                                 check_difference=check_difference)

    def detector_threshold(self, reference: ReferenceSolution) -> float:
        return self.settings.DETECTOR_THRESHOLD_FACTOR * reference.amplitude
