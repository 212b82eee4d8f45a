import logging
from typing import Optional, Tuple, Callable, Sequence, Dict

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from numerics.models import Mesh1D, Mesh2D, GridFunction


def build_uniform_mesh(Ne: int) -> Mesh1D:
    if Ne < 2:
        raise ValueError(f"A uniform mesh needs Ne >= 2, got {Ne}")
    return Mesh1D(np.arange(Ne + 1, dtype=float) / Ne, kind="uniform")


def shishkin_transition(Ne: int, eps: float) -> float:
    return min(0.5, 2.0 * eps * np.log(Ne))


def build_shishkin_mesh(Ne: int, eps: float) -> Mesh1D:
    """Piecewise-uniform mesh refined towards x = 1, Ne/2 intervals per side."""
    if Ne < 2 or Ne % 2 != 0:
        raise ValueError(f"A Shishkin mesh needs an even Ne >= 2, got {Ne}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    tau = shishkin_transition(Ne, eps)
    half = Ne // 2
    coarse = np.linspace(0.0, 1.0 - tau, half + 1)
    fine = np.linspace(1.0 - tau, 1.0, half + 1)
    return Mesh1D(np.concatenate([coarse, fine[1:]]), kind="shishkin")


def shishkin_parameters(Ne: int, eps: float, beta_norm: float = 1.0) -> Dict[str, float]:
    tau = shishkin_transition(Ne, eps)
    h_c = (1.0 - tau) / (Ne // 2)
    h_f = tau / (Ne // 2)
    return {
        "tau": tau,
        "h_c": h_c,
        "h_f": h_f,
        "Pe_c": beta_norm * h_c / (2.0 * eps),
        "Pe_f": beta_norm * h_f / (2.0 * eps),
    }


def build_mesh2d(x: Mesh1D, y: Optional[Mesh1D] = None) -> Mesh2D:
    return Mesh2D(x, y)


def uniform_mesh2d(Ne: int, dim: int = 2) -> Mesh2D:
    axis = build_uniform_mesh(Ne)
    return Mesh2D(axis, axis if dim == 2 else None)


def shishkin_mesh2d(Ne: int, eps: float, dim: int = 2) -> Mesh2D:
    axis = build_shishkin_mesh(Ne, eps)
    return Mesh2D(axis, axis if dim == 2 else None)


def grid_function_from_callable(mesh: Mesh2D, fn: Callable[..., np.ndarray]) -> GridFunction:
    """Sample fn(x) or fn(x, y) at the interior nodes."""
    values = np.asarray(fn(*mesh.coordinates()), dtype=float)
    return GridFunction(mesh, np.broadcast_to(values, mesh.shape).reshape(-1))


def array_axis(mesh: Mesh2D, axis: int) -> int:
    # x varies fastest, so it is the last array axis
    return mesh.dim - 1 - axis


def _along(values: np.ndarray, mesh: Mesh2D, axis: int) -> np.ndarray:
    shape = [1] * mesh.dim
    shape[array_axis(mesh, axis)] = values.size
    return values.reshape(shape)


def _pad_dirichlet(arr: np.ndarray, mesh: Mesh2D, axis: int) -> np.ndarray:
    widths = [(0, 0)] * mesh.dim
    widths[array_axis(mesh, axis)] = (1, 1)
    return np.pad(arr, widths)


def edge_differences(U: GridFunction, axis: int) -> np.ndarray:
    """(U_{i+1} - U_i)/h_i on every edge of one axis, boundary values zero.

    The result has Ne entries along ``axis`` and the interior count on the
    other axis.
    """
    mesh = U.mesh
    padded = _pad_dirichlet(U.as_array(), mesh, axis)
    steps = _along(mesh.axes[axis].steps, mesh, axis)
    return np.diff(padded, axis=array_axis(mesh, axis)) / steps


def one_sided_differences(U: GridFunction, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences at interior nodes along one axis."""
    edges = edge_differences(U, axis)
    ax = array_axis(U.mesh, axis)
    n = edges.shape[ax]
    backward = np.take(edges, np.arange(0, n - 1), axis=ax)
    forward = np.take(edges, np.arange(1, n), axis=ax)
    return backward, forward


def directional_differences(U: GridFunction, beta: Sequence[float]) -> Tuple[GridFunction, GridFunction]:
    """Upwind (D-) and downwind (D+) differences along beta."""
    mesh = U.mesh
    if len(beta) != mesh.dim:
        raise ValueError(f"beta has {len(beta)} components for a {mesh.dim}D mesh")
    d_minus = np.zeros(mesh.shape)
    d_plus = np.zeros(mesh.shape)
    for axis, b in enumerate(beta):
        if b == 0.0:
            continue
        backward, forward = one_sided_differences(U, axis)
        b_pos, b_neg = max(b, 0.0), min(b, 0.0)
        d_minus += b_pos * backward + b_neg * forward
        d_plus += b_pos * forward + b_neg * backward
    return U.with_values(d_minus.reshape(-1)), U.with_values(d_plus.reshape(-1))


def discrete_l2_norm(V: GridFunction) -> float:
    """sqrt(sum of cell area * V^2); cell area is h^2 on a uniform mesh."""
    weights = V.mesh.cell_areas().reshape(-1)
    return float(np.sqrt(np.sum(weights * V.values**2)))


def discrete_h1_seminorm(V: GridFunction) -> float:
    mesh = V.mesh
    total = 0.0
    for axis, axis_mesh in enumerate(mesh.axes):
        diffs = edge_differences(V, axis)
        weights = _along(axis_mesh.steps, mesh, axis)
        for other, other_mesh in enumerate(mesh.axes):
            if other != axis:
                weights = weights * _along(other_mesh.cell_widths, mesh, other)
        total += float(np.sum(weights * diffs**2))
    return float(np.sqrt(total))


def total_variation(U: GridFunction) -> float:
    arr = U.as_array()
    return float(sum(np.abs(np.diff(arr, axis=ax)).sum() for ax in range(arr.ndim)))


def extrema_violation_bounds(U: GridFunction, lower: float, upper: float) -> Tuple[float, float, float]:
    undershoot = max(0.0, lower - float(U.values.min()))
    overshoot = max(0.0, float(U.values.max()) - upper)
    return undershoot, overshoot, undershoot + overshoot


def extrema_violation(U: GridFunction, Uref: GridFunction) -> Tuple[float, float, float]:
    return extrema_violation_bounds(U, float(Uref.values.min()), float(Uref.values.max()))


def detector_count(U: GridFunction, beta: Sequence[float], threshold: float = 0.0) -> int:
    if threshold < 0.0:
        raise ValueError("Detector threshold must be non-negative")
    d_minus, d_plus = directional_differences(U, beta)
    dm, dp = d_minus.values, d_plus.values
    fired = (dm * dp < 0.0) & (np.abs(dm) > threshold) & (np.abs(dp) > threshold)
    return int(np.count_nonzero(fired))


def interpolate(U: GridFunction, target: Mesh2D) -> GridFunction:
    """Piecewise (bi)linear interpolant of U, zero Dirichlet values included."""
    source = U.mesh
    if source.dim != target.dim:
        raise ValueError("Cannot interpolate between meshes of different dimension")
    full = np.pad(U.as_array(), 1)
    # array axes run (y, x)
    grid_axes = tuple(axis.nodes for axis in reversed(source.axes))
    interpolator = RegularGridInterpolator(grid_axes, full, method="linear")
    points = np.stack([c.reshape(-1) for c in reversed(target.coordinates())], axis=-1)
    return GridFunction(target, interpolator(points))


def interpolate_to_coarse(U_fine: GridFunction, coarse: Mesh2D) -> GridFunction:
    if not U_fine.mesh.is_uniform:
        logging.warning("Reference interpolation requested from a non-uniform fine mesh")
    return interpolate(U_fine, coarse)
