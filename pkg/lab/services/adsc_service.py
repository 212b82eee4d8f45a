import logging
from typing import Optional

import numpy as np

from config.settings import Settings
from numerics.models import (ActivationField, AdscParams, AdscResult, GridFunction, Mesh2D,
                             ProblemSpec)
from numerics.kernels import adsc as adsc_kernel
from numerics.kernels import grid, operators
from numerics.kernels import sparse as sparse_ops


class AdscService:
    """Runs the ADSC activation iteration and its fixed-activation variants."""

    def __init__(self, settings: Settings):
        self.settings = settings

    def _solve(self, A, f: np.ndarray):
        return sparse_ops.solve(A, f, tol=self.settings.SOLVER_TOL,
                                method=self.settings.SOLVER_METHOD)

    def _coarse_mesh(self, mesh: Mesh2D, eps: float) -> Mesh2D:
        Ne = max(2, mesh.Ne // 2)
        if mesh.kind == "shishkin":
            Ne = max(2, Ne - Ne % 2)
            return grid.shishkin_mesh2d(Ne, eps, dim=mesh.dim)
        return grid.uniform_mesh2d(Ne, dim=mesh.dim)

    def warm_start(self, kind: str, mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray,
                   K=None) -> np.ndarray:
        if kind == "zero":
            return np.zeros(mesh.n_interior)
        if kind == "galerkin":
            K = K if K is not None else operators.assemble_galerkin(mesh, spec)
            return self._solve(K, f)[0]
        if kind == "upwind":
            return self._solve(operators.assemble_upwind(mesh, spec), f)[0]
        if kind == "coarse":
            coarse = self._coarse_mesh(mesh, spec.eps)
            values, _ = self._solve(operators.assemble_galerkin(coarse, spec),
                                    operators.assemble_source(coarse, spec))
            return grid.interpolate(GridFunction(coarse, values), mesh).values
        raise ValueError(f"Unknown warm start '{kind}'")

    def solve(self, mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray,
              params: Optional[AdscParams] = None, mode: str = "coupled",
              activation: Optional[ActivationField] = None,
              reference: Optional[GridFunction] = None,
              keep_history: bool = False) -> AdscResult:
        """Solve with ADSC.

        mode="coupled" runs the monotone activation loop, "fixed_activation"
        uses the given activation and "fixed_reference" builds the activation
        once from the reference field. All modes finish with one solve of
        the frozen operator. keep_history stores a copy of the activation
        after every update.
        """
        params = params or self.settings.adsc_params
        K = operators.assemble_galerkin(mesh, spec)
        history = []
        masses = []
        snapshots = []
        iterations_used = 0
        final_variation = 0.0
        stationary = True

        if mode == "fixed_activation":
            if activation is None:
                raise ValueError("fixed_activation mode needs an activation field")
            chi = activation.chi
        elif mode == "fixed_reference":
            if reference is None:
                raise ValueError("fixed_reference mode needs a reference field")
            chi = adsc_kernel.detect(reference, spec.beta, params)
        elif mode == "coupled":
            chi, iterations_used, final_variation, stationary, history, masses, snapshots = \
                self._activate(mesh, spec, f, params, K, keep_history)
        else:
            raise ValueError(f"Unknown ADSC mode '{mode}'")

        field = adsc_kernel.activation_field(chi, mesh, params.transfer_kind, params.boundary_transfer)
        S = adsc_kernel.adsc_correction(field, spec, mesh, params)
        values, report = self._solve(sparse_ops.consolidate(K + S), f)
        active = field.active_count(self.settings.ACTIVE_NODE_THRESHOLD)
        logging.info(
            f"ADSC ({mode}) Ne={mesh.Ne}: {iterations_used} updates, variation {final_variation:.3e}, "
            f"mass {field.mass:.4e}, {active} active nodes")
        return AdscResult(solution=GridFunction(mesh, values), activation=field,
                          iterations_used=iterations_used, final_variation=final_variation,
                          activation_mass=field.mass, active_node_count=active,
                          solve_report=report, stationary=stationary, stabilization=S,
                          variation_history=history, mass_history=masses,
                          activation_history=snapshots)

    def _activate(self, mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray, params: AdscParams, K,
                  keep_history: bool = False):
        n = mesh.n_interior
        chi = np.zeros(n)
        full = adsc_kernel.edge_coefficients(
            adsc_kernel.edge_transfer(np.ones(n), mesh, params.transfer_kind, params.boundary_transfer),
            spec, mesh, params)
        if not any(np.any(w > 0.0) for w in full):
            logging.info(f"ADSC inactive on Ne={mesh.Ne} (Pe_h <= 1 on every edge); Galerkin operator kept")
            return chi, 0, 0.0, True, [], [], []

        U = self.warm_start(params.warm_start, mesh, spec, f, K)
        limit = params.iteration_limit
        history, masses, snapshots = [], [], []
        variation = 0.0
        stationary = False
        for m in range(limit):
            fresh = adsc_kernel.detect(GridFunction(mesh, U), spec.beta, params)
            updated = np.maximum(chi, fresh)
            variation = adsc_kernel.relative_variation(updated, chi)
            chi = updated
            history.append(variation)
            masses.append(float(chi.sum()))
            if keep_history:
                snapshots.append(chi.copy())
            # the first update never terminates the loop, so a zero start still gets a solve
            if m > 0 and variation <= params.activation_tol:
                stationary = True
                break
            if m == limit - 1:
                break
            field = adsc_kernel.activation_field(chi, mesh, params.transfer_kind, params.boundary_transfer)
            A = sparse_ops.consolidate(K + adsc_kernel.adsc_correction(field, spec, mesh, params))
            U_tilde, _ = self._solve(A, f)
            U = (1.0 - params.omega) * U + params.omega * U_tilde

        used = len(history)
        if not stationary:
            if params.few_shot_cap is not None and used >= params.few_shot_cap:
                logging.info(f"ADSC stopped at the few-shot cap of {params.few_shot_cap} updates")
            else:
                logging.warning(
                    f"ADSC activation not stationary after {used} updates (variation {variation:.3e})")
        return chi, used, variation, stationary, history, masses, snapshots
