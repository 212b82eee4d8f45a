import logging
from typing import Optional, List, Tuple, Union, Callable, Sequence

import numpy as np
import scipy.sparse as sp

from numerics.models import Mesh1D, Mesh2D, GridFunction, ProblemSpec, SolveReport
from numerics.kernels import sparse as sparse_ops

AxisLike = Union[int, str]


def _axis_index(axis: AxisLike) -> int:
    if axis in (0, "x"):
        return 0
    if axis in (1, "y"):
        return 1
    raise ValueError(f"Unknown direction '{axis}'")


def _check_beta(mesh: Mesh2D, spec: ProblemSpec) -> None:
    if len(spec.beta) != mesh.dim:
        raise ValueError(f"beta has {len(spec.beta)} components for a {mesh.dim}D mesh")


def lift(mesh: Mesh2D, axis: int, op):
    """Embed a one-axis operator into the interior ordering (x fastest)."""
    if mesh.dim == 1:
        return sp.csr_matrix(op)
    if axis == 0:
        return sp.kron(sp.identity(mesh.y.n_interior), op, format="csr")
    return sp.kron(op, sp.identity(mesh.x.n_interior), format="csr")


def negative_second_difference_1d(axis: Mesh1D) -> sp.csr_matrix:
    """Three-point -u'' on a possibly nonuniform node set, Dirichlet folded in."""
    steps = axis.steps
    hm, hp = steps[:-1], steps[1:]
    lower = -2.0 / (hm * (hm + hp))
    upper = -2.0 / (hp * (hm + hp))
    main = 2.0 / (hm * hp)
    return sp.diags([lower[1:], main, upper[:-1]], [-1, 0, 1], format="csr")


def centered_first_difference_1d(axis: Mesh1D) -> sp.csr_matrix:
    """Three-point u' exact for quadratics; reduces to (U_{i+1} - U_{i-1})/2h on uniform nodes."""
    steps = axis.steps
    hm, hp = steps[:-1], steps[1:]
    lower = -hp / (hm * (hm + hp))
    upper = hm / (hp * (hm + hp))
    main = np.zeros_like(hm) if axis.is_uniform else (hp - hm) / (hm * hp)
    return sp.diags([lower[1:], main, upper[:-1]], [-1, 0, 1], format="csr")


def edge_difference_1d(axis: Mesh1D) -> sp.csr_matrix:
    """Ne x N map from interior values to (U_{e+1} - U_e)/h_e on every edge."""
    n, Ne = axis.n_interior, axis.Ne
    inv_h = 1.0 / axis.steps
    rows = np.concatenate([np.arange(1, Ne), np.arange(0, Ne - 1)])
    cols = np.concatenate([np.arange(0, n), np.arange(0, n)])
    vals = np.concatenate([-inv_h[1:], inv_h[:-1]])
    return sparse_ops.consolidate(sp.coo_matrix((vals, (rows, cols)), shape=(Ne, n)))


def averaging_1d(n: int) -> sp.csr_matrix:
    return sp.diags([np.full(n - 1, 0.25), np.full(n, 0.5), np.full(n - 1, 0.25)],
                    [-1, 0, 1], format="csr")


def assemble_edge_difference(mesh: Mesh2D, direction: AxisLike) -> sp.csr_matrix:
    axis = _axis_index(direction)
    if axis >= mesh.dim:
        raise ValueError(f"No direction {direction} on a {mesh.dim}D mesh")
    return sparse_ops.consolidate(lift(mesh, axis, edge_difference_1d(mesh.axes[axis])))


def edge_steps(mesh: Mesh2D, direction: AxisLike) -> np.ndarray:
    """h_e for every row of the matching edge-difference operator."""
    axis = _axis_index(direction)
    steps = mesh.axes[axis].steps
    if mesh.dim == 1:
        return steps.copy()
    if axis == 0:
        return np.tile(steps, mesh.y.n_interior)
    return np.repeat(steps, mesh.x.n_interior)


def edge_diffusion(mesh: Mesh2D, weights: Sequence[np.ndarray]) -> sp.csr_matrix:
    """Sum over axes of D_r^T diag(w_r) D_r."""
    n = mesh.n_interior
    S = sp.csr_matrix((n, n))
    for axis, w in enumerate(weights):
        D = assemble_edge_difference(mesh, axis)
        S = S + sparse_ops.triple_product(D.T, w, D)
    return sparse_ops.consolidate(S)


def diffusion_part(mesh: Mesh2D, eps: float) -> sp.csr_matrix:
    K = sum(lift(mesh, r, negative_second_difference_1d(ax)) for r, ax in enumerate(mesh.axes))
    return sparse_ops.consolidate(eps * K)


def convection_part(mesh: Mesh2D, spec: ProblemSpec) -> sp.csr_matrix:
    _check_beta(mesh, spec)
    n = mesh.n_interior
    C = sp.csr_matrix((n, n))
    for r, ax in enumerate(mesh.axes):
        if spec.beta[r] != 0.0:
            C = C + spec.beta[r] * lift(mesh, r, centered_first_difference_1d(ax))
    return sparse_ops.consolidate(C)


def streamline_gradient(mesh: Mesh2D, spec: ProblemSpec) -> sp.csr_matrix:
    """D_beta = sum_r beta_r G_r with centered gradients G_r."""
    return convection_part(mesh, spec)


def assemble_galerkin(mesh: Mesh2D, spec: ProblemSpec) -> sp.csr_matrix:
    _check_beta(mesh, spec)
    return sparse_ops.consolidate(diffusion_part(mesh, spec.eps) + convection_part(mesh, spec))


def assemble_upwind(mesh: Mesh2D, spec: ProblemSpec) -> sp.csr_matrix:
    K = assemble_galerkin(mesh, spec)
    weights = [abs(spec.beta[r]) * edge_steps(mesh, r) / 2.0 for r in range(mesh.dim)]
    return sparse_ops.consolidate(K + edge_diffusion(mesh, weights))


def supg_tau(mesh: Mesh2D, spec: ProblemSpec) -> float:
    return mesh.h / (2.0 * spec.beta_norm)


def assemble_supg(mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray,
                  stencil: Optional[str] = None) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Streamline-diffusion matrix and consistent right-hand side.

    stencil="centered" builds tau D_beta^T D_beta from centered gradients;
    "compact" uses tau beta^2 D^T D with edge differences and is the
    default on one-dimensional meshes, where it equals coordinate upwinding.
    """
    K = assemble_galerkin(mesh, spec)
    f = np.asarray(f, dtype=float)
    if spec.beta_norm == 0.0:
        return K, f.copy()
    if stencil is None:
        stencil = "compact" if mesh.dim == 1 else "centered"
    tau = supg_tau(mesh, spec)
    D_beta = streamline_gradient(mesh, spec)
    if stencil == "centered":
        S = sparse_ops.triple_product(D_beta.T, np.full(D_beta.shape[0], tau), D_beta)
    elif stencil == "compact":
        if mesh.dim != 1:
            raise ValueError("The compact streamline stencil is only defined in one dimension")
        S = edge_diffusion(mesh, [tau * spec.beta[0]**2 * np.ones(mesh.x.Ne)])
    else:
        raise ValueError(f"Unknown SUPG stencil '{stencil}'")
    rhs = f + tau * (D_beta.T @ f)
    return sparse_ops.consolidate(K + S), rhs


def assemble_cip(mesh: Mesh2D, spec: ProblemSpec, gamma: float = 0.030) -> sp.csr_matrix:
    K = assemble_galerkin(mesh, spec)
    n = mesh.n_interior
    S = sp.csr_matrix((n, n))
    for r, ax in enumerate(mesh.axes):
        L = -lift(mesh, r, negative_second_difference_1d(ax))
        S = S + sparse_ops.triple_product(L.T, np.ones(n), L)
    scale = gamma * spec.beta_norm * mesh.h**3
    return sparse_ops.consolidate(K + scale * S)


def lps_fluctuation(mesh: Mesh2D) -> sp.csr_matrix:
    """H = I - P with P the tensor product of tridiag(1/4, 1/2, 1/4)."""
    P = averaging_1d(mesh.x.n_interior)
    if mesh.dim == 2:
        P = sp.kron(averaging_1d(mesh.y.n_interior), P, format="csr")
    return sparse_ops.consolidate(sp.identity(mesh.n_interior, format="csr") - P)


def assemble_lps(mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray,
                 gamma: float = 1.0) -> Tuple[sp.csr_matrix, np.ndarray]:
    K = assemble_galerkin(mesh, spec)
    f = np.asarray(f, dtype=float)
    if spec.beta_norm == 0.0 or gamma == 0.0:
        return K, f.copy()
    tau = supg_tau(mesh, spec)
    H = lps_fluctuation(mesh)
    B = sparse_ops.consolidate(H @ streamline_gradient(mesh, spec))
    S = sparse_ops.triple_product(B.T, np.full(B.shape[0], gamma * tau), B)
    rhs = f + gamma * tau * (B.T @ (H @ f))
    return sparse_ops.consolidate(K + S), rhs


def afc_weights(mesh: Mesh2D, spec: ProblemSpec, edge_activation: Sequence[np.ndarray],
                theta: float = 1.0) -> List[np.ndarray]:
    return [theta * abs(spec.beta[r]) * edge_steps(mesh, r) / 2.0 * edge_activation[r]
            for r in range(mesh.dim)]


def solve_afc(mesh: Mesh2D, spec: ProblemSpec, f: np.ndarray, iterations: int = 80,
              theta: float = 1.0, tol: float = 1e-12,
              method: str = "direct") -> Tuple[GridFunction, sp.csr_matrix, SolveReport]:
    """Limited edge diffusion driven by the sharp detector, recomputed every pass.

    Returns the last iterate, the last added edge-diffusion matrix and the
    report of the last solve.
    """
    from numerics.kernels import adsc as adsc_kernel

    K = assemble_galerkin(mesh, spec)
    values, report = sparse_ops.solve(K, f, tol=tol, method=method)
    U = GridFunction(mesh, values)
    S = sp.csr_matrix(K.shape)
    flagged = 0
    for _ in range(iterations):
        chi = adsc_kernel.sharp_activation(U, spec.beta)
        flagged = int(np.count_nonzero(chi))
        edges = adsc_kernel.edge_transfer(chi, mesh, kind="max")
        S = edge_diffusion(mesh, afc_weights(mesh, spec, edges, theta))
        values, report = sparse_ops.solve(sparse_ops.consolidate(K + S), f, tol=tol, method=method)
        U = GridFunction(mesh, values)
    logging.info(f"AFC finished {iterations} limiting passes, {flagged} flagged nodes")
    return U, S, report


def layer_profile(t: np.ndarray, eps: float) -> np.ndarray:
    """l(t) = t - (exp((t-1)/eps) - exp(-1/eps)) / (1 - exp(-1/eps)); l(0) = l(1) = 0."""
    t = np.asarray(t, dtype=float)
    denom = -np.expm1(-1.0 / eps)
    return t - (np.exp((t - 1.0) / eps) - np.exp(-1.0 / eps)) / denom


def layer_profile_derivative(t: np.ndarray, eps: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return 1.0 - np.exp((t - 1.0) / eps) / (eps * -np.expm1(-1.0 / eps))


def layer_profile_second_derivative(t: np.ndarray, eps: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return -np.exp((t - 1.0) / eps) / (eps**2 * -np.expm1(-1.0 / eps))


def exact_solution(spec: ProblemSpec) -> Optional[Callable[..., np.ndarray]]:
    kind = spec.source.kind
    if kind == "manufactured_sine":
        return lambda *xs: np.prod([np.sin(np.pi * x) for x in xs], axis=0)
    if kind == "nist_layer":
        return lambda *xs: np.prod([layer_profile(x, spec.eps) for x in xs], axis=0)
    return None


def _gaussian(coords: Tuple[np.ndarray, ...], center: Tuple[float, ...], sigma: float) -> np.ndarray:
    if len(center) != len(coords):
        raise ValueError(f"Gaussian center {center} does not match a {len(coords)}D mesh")
    r2 = sum((x - c)**2 for x, c in zip(coords, center))
    return np.exp(-r2 / (2.0 * sigma**2))


def _manufactured_sine_source(coords: Tuple[np.ndarray, ...], spec: ProblemSpec) -> np.ndarray:
    sines = [np.sin(np.pi * x) for x in coords]
    cosines = [np.cos(np.pi * x) for x in coords]
    u = np.prod(sines, axis=0)
    f = spec.eps * len(coords) * np.pi**2 * u
    for r, b in enumerate(spec.beta):
        factors = [cosines[s] if s == r else sines[s] for s in range(len(coords))]
        f = f + b * np.pi * np.prod(factors, axis=0)
    return f


def _nist_layer_source(coords: Tuple[np.ndarray, ...], spec: ProblemSpec) -> np.ndarray:
    eps = spec.eps
    values = [layer_profile(x, eps) for x in coords]
    first = [layer_profile_derivative(x, eps) for x in coords]
    second = [layer_profile_second_derivative(x, eps) for x in coords]
    f = np.zeros_like(coords[0])
    for r in range(len(coords)):
        others = np.prod([values[s] for s in range(len(coords)) if s != r], axis=0) \
            if len(coords) > 1 else 1.0
        f = f - eps * second[r] * others + spec.beta[r] * first[r] * others
    return f


def evaluate_source(coords: Tuple[np.ndarray, ...], spec: ProblemSpec) -> np.ndarray:
    source = spec.source
    if source.kind in ("gaussian", "double_gaussian"):
        return source.amplitude * sum(_gaussian(coords, c, source.sigma) for c in source.centers)
    if source.kind == "manufactured_sine":
        return _manufactured_sine_source(coords, spec)
    return _nist_layer_source(coords, spec)


def assemble_source(mesh: Mesh2D, spec: ProblemSpec) -> np.ndarray:
    _check_beta(mesh, spec)
    return np.asarray(evaluate_source(mesh.coordinates(), spec), dtype=float).reshape(-1)
