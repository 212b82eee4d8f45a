import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from config.settings import Settings
from numerics.models import GridFunction, Mesh2D, ProblemSpec, SolveReport, AdscResult
from numerics.kernels import operators
from numerics.kernels import sparse as sparse_ops
from lab.services.adsc_service import AdscService


@dataclass
class MethodSolution:
    """Outcome of one discretization on one mesh."""
    method: str
    solution: GridFunction
    stabilization: Optional[sp.csr_matrix]
    report: SolveReport
    seconds: float
    iterations: Optional[int] = None
    final_variation: Optional[float] = None
    adsc: Optional[AdscResult] = None


class DiscretizationService:

    def __init__(self, settings: Settings, adsc_service: AdscService):
        self.settings = settings
        self.adsc_service = adsc_service

    def _solve(self, A, rhs):
        return sparse_ops.solve(A, rhs, tol=self.settings.SOLVER_TOL,
                                method=self.settings.SOLVER_METHOD)

    def _dump(self, method: str, mesh: Mesh2D, A) -> None:
        if not self.settings.DUMP_MATRICES:
            return
        path = Path(self.settings.OUTPUT_DIR) / "matrices" / f"{method}_Ne{mesh.Ne}_{mesh.kind}.mtx"
        sparse_ops.dump_matrix_market(A, path, comment=f"{method} operator, Ne={mesh.Ne}")

    def solve(self, method: str, mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray,
              reference: Optional[GridFunction] = None) -> MethodSolution:
        """Assemble and solve one method; raises SolverError on failure."""
        started = time.perf_counter()
        K = operators.assemble_galerkin(mesh, spec)

        if method == "galerkin":
            A, rhs, S = K, f, None
        elif method == "upwind":
            A, rhs = operators.assemble_upwind(mesh, spec), f
            S = A - K
        elif method == "supg":
            A, rhs = operators.assemble_supg(mesh, spec, f)
            S = A - K
        elif method == "cip":
            A, rhs = operators.assemble_cip(mesh, spec, gamma=self.settings.CIP_GAMMA), f
            S = A - K
        elif method == "lps":
            A, rhs = operators.assemble_lps(mesh, spec, f, gamma=self.settings.LPS_GAMMA)
            S = A - K
        elif method == "afc":
            U, S, report = operators.solve_afc(mesh, spec, f,
                                               iterations=self.settings.AFC_ITERATIONS,
                                               theta=self.settings.AFC_THETA,
                                               tol=self.settings.SOLVER_TOL,
                                               method=self.settings.SOLVER_METHOD)
            seconds = time.perf_counter() - started
            self._dump(method, mesh, sparse_ops.consolidate(K + S))
            return MethodSolution(method, U, S, report, seconds,
                                  iterations=self.settings.AFC_ITERATIONS)
        elif method in ("adsc", "adsc-fixed-ref"):
            if method == "adsc-fixed-ref":
                if reference is None:
                    raise ValueError("adsc-fixed-ref needs a reference solution")
                adsc_result = self.adsc_service.solve(mesh, spec, f, mode="fixed_reference",
                                                      reference=reference)
            else:
                adsc_result = self.adsc_service.solve(mesh, spec, f)
            seconds = time.perf_counter() - started
            S = adsc_result.stabilization
            self._dump(method, mesh, sparse_ops.consolidate(K + S))
            return MethodSolution(method, adsc_result.solution, S, adsc_result.solve_report, seconds,
                                  iterations=adsc_result.iterations_used,
                                  final_variation=adsc_result.final_variation,
                                  adsc=adsc_result)
        else:
            raise ValueError(f"Unknown method '{method}'")

        values, report = self._solve(A, rhs)
        seconds = time.perf_counter() - started
        self._dump(method, mesh, A)
        logging.info(f"{method} solved on Ne={mesh.Ne} in {seconds:.3f}s, residual {report.residual_norm:.2e}")
        return MethodSolution(method, GridFunction(mesh, values),
                              sparse_ops.consolidate(S) if S is not None else None,
                              report, seconds)
