from typing import List, Tuple, Sequence

import numpy as np
import scipy.sparse as sp

from numerics.models import AdscParams, ActivationField, GridFunction, Mesh2D, ProblemSpec
from numerics.kernels.grid import array_axis, directional_differences
from numerics.kernels.operators import edge_diffusion, edge_steps
from numerics.kernels import sparse as sparse_ops

__all__ = (
    "directional_differences",
    "theta_score",
    "activation",
    "sharp_activation",
    "edge_transfer",
    "activation_field",
    "gamma_law",
    "edge_coefficients",
    "adsc_correction",
    "relax_fixed_activation",
)


def theta_score(U: GridFunction, beta: Sequence[float], delta_h: float) -> GridFunction:
    """2[-D-D+]_+ / ((D-)^2 + (D+)^2 + delta_h), in [0, 1)."""
    if delta_h <= 0.0:
        raise ValueError("delta_h must be positive")
    d_minus, d_plus = directional_differences(U, beta)
    dm, dp = d_minus.values, d_plus.values
    score = 2.0 * np.maximum(-dm * dp, 0.0) / (dm**2 + dp**2 + delta_h)
    return U.with_values(score)


def activation(theta: GridFunction, eta_det: float) -> np.ndarray:
    if eta_det <= 0.0:
        raise ValueError("eta_det must be positive")
    values = theta.values
    return values / (values + eta_det)


def sharp_activation(U: GridFunction, beta: Sequence[float]) -> np.ndarray:
    d_minus, d_plus = directional_differences(U, beta)
    return (d_minus.values * d_plus.values < 0.0).astype(float)


def edge_transfer(chi: np.ndarray, mesh: Mesh2D, kind: str = "averaged",
                  boundary: str = "adjacent") -> Tuple[np.ndarray, ...]:
    """Map nodal activation to every edge of each axis.

    Boundary nodes carry no activation of their own. With boundary="adjacent"
    an edge touching the boundary takes the value of its interior node, with
    boundary="zero" the boundary node counts as inactive, which halves the
    averaged value on those edges.
    """
    if boundary not in ("adjacent", "zero"):
        raise ValueError(f"Unknown boundary transfer '{boundary}'")
    pad_mode = "edge" if boundary == "adjacent" else "constant"
    if kind == "averaged":
        combine = lambda left, right: 0.5 * (left + right)
    elif kind == "max":
        combine = np.maximum
    else:
        raise ValueError(f"Unknown transfer kind '{kind}'")
    arr = np.asarray(chi, dtype=float).reshape(mesh.shape)
    edges = []
    for axis in range(mesh.dim):
        ax = array_axis(mesh, axis)
        widths = [(0, 0)] * mesh.dim
        widths[ax] = (1, 1)
        padded = np.pad(arr, widths, mode=pad_mode)
        n = padded.shape[ax]
        left = np.take(padded, np.arange(0, n - 1), axis=ax)
        right = np.take(padded, np.arange(1, n), axis=ax)
        edges.append(combine(left, right).reshape(-1))
    return tuple(edges)


def activation_field(chi: np.ndarray, mesh: Mesh2D, kind: str = "averaged",
                     boundary: str = "adjacent") -> ActivationField:
    chi = np.asarray(chi, dtype=float).reshape(-1)
    return ActivationField(chi=chi, edges=edge_transfer(chi, mesh, kind, boundary))


def detect(U: GridFunction, beta: Sequence[float], params: AdscParams) -> np.ndarray:
    if params.detector_kind == "sharp":
        return sharp_activation(U, beta)
    return activation(theta_score(U, beta, params.delta_h), params.eta_det)


def gamma_law(Pe, params: AdscParams):
    """(gamma0, gamma1, eta_Pe); all zero where Pe <= 1. Vectorised over Pe."""
    Pe = np.asarray(Pe, dtype=float)
    active = Pe > 1.0
    safe = np.where(active, Pe, 2.0)
    gamma0 = np.where(active,
                      params.gamma_min + (params.gamma_max - params.gamma_min) * (safe - 1.0) / (safe + 1.0),
                      0.0)
    gamma1 = params.kappa * gamma0
    eta_pe = np.where(active, 1.0 - 1.0 / safe, 0.0)
    if gamma0.ndim == 0:
        return float(gamma0), float(gamma1), float(eta_pe)
    return gamma0, gamma1, eta_pe


def edge_coefficients(edge_activation: Sequence[np.ndarray], spec: ProblemSpec, mesh: Mesh2D,
                      params: AdscParams) -> List[np.ndarray]:
    """alpha_r = |beta_r| h_e (gamma0 + gamma1 eta_Pe chi_r) with the local edge Peclet number."""
    weights = []
    for axis in range(mesh.dim):
        h_e = edge_steps(mesh, axis)
        if spec.beta[axis] == 0.0:
            weights.append(np.zeros_like(h_e))
            continue
        gamma0, gamma1, eta_pe = gamma_law(spec.beta_norm * h_e / (2.0 * spec.eps), params)
        chi = np.asarray(edge_activation[axis], dtype=float)
        weights.append(abs(spec.beta[axis]) * h_e * (gamma0 + gamma1 * eta_pe * chi))
    return weights


def adsc_correction(field: ActivationField, spec: ProblemSpec, mesh: Mesh2D,
                    params: AdscParams) -> sp.csr_matrix:
    return edge_diffusion(mesh, edge_coefficients(field.edges, spec, mesh, params))


def relative_variation(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old)) / max(float(np.max(np.abs(new))), 1e-30))


def relax_fixed_activation(A, f: np.ndarray, U0: np.ndarray, omega: float, steps: int,
                           tol: float = 1e-12) -> List[np.ndarray]:
    """Iterates U <- (1 - omega) U + omega A^{-1} f for a frozen operator, U0 first."""
    target, _ = sparse_ops.solve(A, f, tol=tol)
    iterates = [np.asarray(U0, dtype=float).copy()]
    for _ in range(steps):
        iterates.append((1.0 - omega) * iterates[-1] + omega * target)
    return iterates
