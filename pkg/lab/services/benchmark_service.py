import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import Settings, apply_overrides
from numerics.exceptions import SolverError
from numerics.models import ActivationField, AdscParams, DiagnosticsRow, GridFunction, Mesh2D, ModalSet, ProblemSpec
from numerics.kernels import grid, lfa, operators
from lab.scenarios import Scenario, ScenarioCase
from lab.services.adsc_service import AdscService
from lab.services.discretization_service import DiscretizationService, MethodSolution
from lab.services.reference_service import ReferenceService, ReferenceSolution
from lab.utils.rate_utils import inter_level_rates


@dataclass
class BenchmarkRow:
    scenario: str
    method: str
    label: str
    Ne: int
    h: float
    Pe: float
    diagnostics: Optional[DiagnosticsRow] = None
    rate: Optional[float] = None
    iterations: Optional[int] = None
    final_variation: Optional[float] = None
    cost_ratio: Optional[float] = None
    seconds: Optional[float] = None
    distance: Optional[float] = None
    status: str = "ok"
    message: str = ""
    activation: Optional[ActivationField] = field(default=None, repr=False)
    mesh: Optional[Mesh2D] = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return self.status != "ok"


@dataclass
class _CaseContext:
    case: ScenarioCase
    mesh: Mesh2D
    f: np.ndarray
    reference: ReferenceSolution
    threshold: float


class BenchmarkService:
    """Runs registered scenarios and turns solutions into benchmark rows."""

    def __init__(self, settings: Settings, discretization: DiscretizationService,
                 adsc_service: AdscService, reference_service: ReferenceService):
        self.settings = settings
        self.discretization = discretization
        self.adsc_service = adsc_service
        self.reference_service = reference_service
        self._modal_cache: Dict[Tuple[float, Tuple[float, ...], int], ModalSet] = {}

    def modal(self, spec: ProblemSpec, Ne: int) -> ModalSet:
        key = (spec.eps, spec.beta, Ne)
        if key not in self._modal_cache:
            self._modal_cache[key] = lfa.modal_set(spec.eps, spec.beta, Ne)
        return self._modal_cache[key]

    def run_scenario(self, scenario: Scenario) -> List[BenchmarkRow]:
        logging.info(f"Running scenario '{scenario.name}': {scenario.title}")
        started = time.perf_counter()
        if scenario.study == "few_shot":
            rows = self.few_shot_study(scenario, scenario.caps)
        elif scenario.study == "sensitivity":
            rows = self.sensitivity_sweep(scenario, scenario.parameter_grid)
        else:
            rows = self._standard(scenario)
        if scenario.compute_rates:
            self._attach_rates(rows)
        failed = sum(1 for row in rows if row.failed)
        logging.info(
            f"Scenario '{scenario.name}' finished: {len(rows)} rows, {failed} failed, "
            f"{time.perf_counter() - started:.2f}s")
        return rows

    def _prepare(self, scenario: Scenario, case: ScenarioCase) -> _CaseContext:
        mesh = case.mesh.build(case.problem.eps)
        reference = self.compute_reference(scenario, case, mesh)
        return _CaseContext(case, mesh, operators.assemble_source(mesh, case.problem), reference,
                            self.reference_service.detector_threshold(reference))

    def compute_reference(self, scenario: Scenario, case: ScenarioCase,
                          mesh: Optional[Mesh2D] = None) -> ReferenceSolution:
        mesh = mesh or case.mesh.build(case.problem.eps)
        return self.reference_service.compute_reference(scenario.reference, mesh, case.problem)

    def _base_row(self, scenario: Scenario, method: str, ctx: _CaseContext, label: Optional[str] = None) -> BenchmarkRow:
        return BenchmarkRow(scenario=scenario.name, method=method, label=label or ctx.case.label,
                            Ne=ctx.mesh.Ne, h=ctx.mesh.h, Pe=ctx.case.problem.peclet(ctx.mesh.h))

    def _failed_row(self, row: BenchmarkRow, error: Exception) -> BenchmarkRow:
        logging.error(f"{row.scenario}/{row.method} ({row.label}) failed: {error}")
        row.status = "failed"
        row.message = str(error)
        return row

    def diagnostics(self, U: GridFunction, S, ctx: _CaseContext) -> DiagnosticsRow:
        spec = ctx.case.problem
        error = U - ctx.reference.values
        undershoot, overshoot, e_ext = grid.extrema_violation(U, ctx.reference.values)
        rho_stab = float("nan")
        if ctx.mesh.is_uniform:
            rho_stab = lfa.rayleigh_rho_stab(S, self.modal(spec, ctx.mesh.Ne))
        return DiagnosticsRow(
            l2_error=grid.discrete_l2_norm(error),
            linf_error=float(np.max(np.abs(error.values))),
            tv=grid.total_variation(U),
            e_ext=e_ext,
            detector_count=grid.detector_count(U, spec.beta, ctx.threshold),
            rho_stab_mean=rho_stab,
            undershoot=undershoot,
            overshoot=overshoot,
        )

    def _standard(self, scenario: Scenario) -> List[BenchmarkRow]:
        rows: List[BenchmarkRow] = []
        for case in scenario.cases:
            ctx = self._prepare(scenario, case)
            solutions: Dict[str, MethodSolution] = {}
            case_rows: Dict[str, BenchmarkRow] = {}
            for method in scenario.methods:
                row = self._base_row(scenario, method, ctx)
                try:
                    solution = self.discretization.solve(method, ctx.mesh, case.problem, ctx.f,
                                                         reference=ctx.reference.values)
                except SolverError as e:
                    rows.append(self._failed_row(row, e))
                    continue
                solutions[method] = solution
                row.diagnostics = self.diagnostics(solution.solution, solution.stabilization, ctx)
                row.iterations = solution.iterations
                row.final_variation = solution.final_variation
                row.seconds = solution.seconds
                if solution.adsc is not None:
                    row.activation, row.mesh = solution.adsc.activation, ctx.mesh
                case_rows[method] = row
                rows.append(row)
            self._attach_cost_ratios(case_rows)
            if scenario.study == "fixed_reference" and "adsc" in solutions:
                coupled = solutions["adsc"].solution
                for method, row in case_rows.items():
                    if method != "adsc":
                        row.distance = grid.discrete_l2_norm(solutions[method].solution - coupled)
        return rows

    def _attach_cost_ratios(self, case_rows: Dict[str, BenchmarkRow]) -> None:
        baseline = case_rows.get("galerkin")
        if baseline is None or not baseline.seconds:
            return
        for row in case_rows.values():
            if row.seconds is not None:
                row.cost_ratio = row.seconds / baseline.seconds

    def _adsc_row(self, scenario: Scenario, ctx: _CaseContext, params: AdscParams,
                  method: str = "adsc", label: Optional[str] = None):
        row = self._base_row(scenario, method, ctx, label)
        started = time.perf_counter()
        try:
            result = self.adsc_service.solve(ctx.mesh, ctx.case.problem, ctx.f, params=params)
        except SolverError as e:
            return self._failed_row(row, e), None
        row.seconds = time.perf_counter() - started
        row.diagnostics = self.diagnostics(result.solution, result.stabilization, ctx)
        row.iterations = result.iterations_used
        row.final_variation = result.final_variation
        row.activation, row.mesh = result.activation, ctx.mesh
        return row, result

    def few_shot_study(self, scenario: Scenario, caps: Sequence[int]) -> List[BenchmarkRow]:
        """Capped ADSC runs with their L2 distance to the uncapped run."""
        base = dataclasses.replace(self.settings.adsc_params, few_shot_cap=None)
        rows: List[BenchmarkRow] = []
        for case in scenario.cases:
            ctx = self._prepare(scenario, case)
            converged_row, converged = self._adsc_row(scenario, ctx, base, "adsc",
                                                      f"{case.label} uncapped")
            if converged is not None:
                converged_row.distance = 0.0
            for cap in caps:
                if converged is not None and cap >= base.max_iterations:
                    row = dataclasses.replace(converged_row, method=f"adsc-cap{cap}",
                                              label=f"{case.label} cap={cap}")
                    rows.append(row)
                    continue
                params = dataclasses.replace(base, few_shot_cap=cap)
                row, result = self._adsc_row(scenario, ctx, params, f"adsc-cap{cap}",
                                             f"{case.label} cap={cap}")
                if result is not None and converged is not None:
                    row.distance = grid.discrete_l2_norm(result.solution - converged.solution)
                rows.append(row)
            rows.append(converged_row)
        return rows

    def sensitivity_sweep(self, scenario: Scenario,
                          parameter_grid: Sequence[Tuple[str, Dict[str, Any]]]) -> List[BenchmarkRow]:
        rows: List[BenchmarkRow] = []
        contexts = [self._prepare(scenario, case) for case in scenario.cases]
        for label, overrides in parameter_grid:
            params = apply_overrides(self.settings, overrides).adsc_params
            logging.info(f"Sensitivity run {label}: {overrides}")
            for ctx in contexts:
                row, _ = self._adsc_row(scenario, ctx, params, "adsc", f"{ctx.case.label} {label}")
                rows.append(row)
        return rows

    def _attach_rates(self, rows: List[BenchmarkRow]) -> None:
        by_method: Dict[str, List[BenchmarkRow]] = {}
        for row in rows:
            if not row.failed:
                by_method.setdefault(row.method, []).append(row)
        for method_rows in by_method.values():
            rates = inter_level_rates([r.h for r in method_rows],
                                      [r.diagnostics.l2_error for r in method_rows])
            for row, rate in zip(method_rows, rates):
                row.rate = rate

    def modal_table(self, scenario: Scenario) -> List[Dict[str, Any]]:
        """Modal-balance diagnostics per uniform mesh level of a scenario."""
        params = self.settings.adsc_params
        table = []
        for case in scenario.cases:
            if case.mesh.kind != "uniform":
                continue
            modal = self.modal(case.problem, case.mesh.Ne)
            raw, projected = lfa.gamma0_balance(modal, modal.peclet, self.settings.RHO_TARGET,
                                                params.gamma_min, params.gamma_max)
            lfa.describe(modal)
            table.append({
                "Ne": case.mesh.Ne,
                "Pe": modal.peclet,
                "rho_gal_mean": modal.mean_rho_gal,
                "dominant": modal.dominant_count,
                "modes": modal.mode_count,
                "B_mean": modal.B_mean,
                "gamma0_raw": raw,
                "gamma0_projected": projected,
            })
        return table
