import logging
from typing import Optional, Tuple, Sequence, Dict, Any

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn, idstn

from numerics.models import GridFunction, ModalSet, Symbol
from numerics.kernels.grid import uniform_mesh2d


def symbol(eps: float, beta: Sequence[float], h: float, theta: Sequence) -> Symbol:
    """a = (2 eps/h^2) sum(1 - cos theta_r), b = (1/h) sum(beta_r sin theta_r)."""
    if len(theta) != len(beta):
        raise ValueError(f"Need {len(beta)} angles, got {len(theta)}")
    theta = [np.asarray(t, dtype=float) for t in theta]
    a = (2.0 * eps / h**2) * sum(1.0 - np.cos(t) for t in theta)
    b = (1.0 / h) * sum(br * np.sin(t) for br, t in zip(beta, theta))
    return Symbol(np.asarray(a), np.asarray(b))


def mode_angles(Ne: int) -> np.ndarray:
    N = Ne - 1
    return np.arange(1, N + 1) * np.pi / (N + 1)


def _angle_grids(Ne: int, dim: int) -> Tuple[np.ndarray, ...]:
    angles = mode_angles(Ne)
    if dim == 1:
        return (angles,)
    # rows index the y mode q, columns the x mode p, as on the mesh
    TX, TY = np.meshgrid(angles, angles, indexing="xy")
    return (TX, TY)


def modal_set(eps: float, beta: Sequence[float], Ne: int) -> ModalSet:
    if Ne < 2:
        raise ValueError(f"Need Ne >= 2, got {Ne}")
    beta = tuple(float(b) for b in beta)
    h = 1.0 / Ne
    thetas = _angle_grids(Ne, len(beta))
    sym = symbol(eps, beta, h, thetas)
    rho = np.abs(sym.b) / sym.a
    mask = rho > 1.0
    beta_norm = float(np.linalg.norm(beta))
    r = [1.0 - np.cos(t) for t in thetas]
    if beta_norm == 0.0:
        B = np.zeros_like(rho)
        mask = np.zeros_like(mask)
    else:
        B = sum(abs(b) * rr for b, rr in zip(beta, r)) / (beta_norm * sum(r))
    mean_rho = float(rho[mask].mean()) if mask.any() else 0.0
    B_mean = float(B[mask].mean()) if mask.any() else 0.0
    return ModalSet(Ne=Ne, eps=eps, beta=beta, h=h, thetas=thetas, a=sym.a, b=sym.b,
                    rho=rho, dominant_mask=mask, mean_rho_gal=mean_rho, B=B, B_mean=B_mean)


def gamma0_balance(modal: ModalSet, Pe_h: float, rho_target: float,
                   gamma_min: float, gamma_max: float) -> Tuple[float, float]:
    excess = max(modal.mean_rho_gal - rho_target, 0.0)
    if excess == 0.0:
        raw = 0.0
    elif Pe_h <= 0.0 or modal.B_mean <= 0.0:
        raw = float("inf")
    else:
        raw = excess / (2.0 * Pe_h * modal.B_mean)
    projected = min(max(raw, gamma_min), gamma_max)
    return raw, projected


def sine_basis_1d(N: int) -> np.ndarray:
    """Orthonormal columns sqrt(2/(N+1)) sin(i p pi/(N+1)), i, p = 1..N."""
    idx = np.arange(1, N + 1)
    return np.sqrt(2.0 / (N + 1)) * np.sin(np.outer(idx, idx) * np.pi / (N + 1))


def sine_mode(Ne: int, p: int, q: Optional[int] = None) -> GridFunction:
    N = Ne - 1
    mesh = uniform_mesh2d(Ne, dim=1 if q is None else 2)
    modes = [p] if q is None else [p, q]
    if any(m < 1 or m > N for m in modes):
        raise ValueError(f"Mode indices must lie in 1..{N}, got {modes}")
    basis = sine_basis_1d(N)
    if q is None:
        return GridFunction(mesh, basis[:, p - 1])
    return GridFunction(mesh, np.kron(basis[:, q - 1], basis[:, p - 1]))


def modal_increments(S, modal: ModalSet) -> np.ndarray:
    """delta = <S phi, phi> for every sine mode, shaped like modal.rho."""
    N = modal.Ne - 1
    basis = sine_basis_1d(N)
    S = sp.csr_matrix(S)
    if len(modal.beta) == 1:
        return np.sum(basis * (S @ basis), axis=0)
    delta = np.empty((N, N))
    for q in range(N):
        block = np.kron(basis[:, [q]], basis)
        delta[q, :] = np.sum(block * (S @ block), axis=0)
    return delta


def rayleigh_rho_stab(S, modal: ModalSet) -> float:
    if not modal.dominant_mask.any():
        return 0.0
    if S is None or sp.csr_matrix(S).nnz == 0:
        return modal.mean_rho_gal
    delta = modal_increments(S, modal)
    mask = modal.dominant_mask
    return float(np.mean(np.abs(modal.b[mask]) / (modal.a[mask] + delta[mask])))


def reference_modal_solve(modal: ModalSet, f: GridFunction) -> GridFunction:
    """Divide every sine coefficient of f by |lambda| and transform back."""
    arr = f.as_array()
    if arr.shape != modal.rho.shape:
        raise ValueError(f"Right-hand side shape {arr.shape} does not match modes {modal.rho.shape}")
    coeffs = dstn(arr, type=1, norm="ortho")
    modulus = np.hypot(modal.a, modal.b)
    return f.with_values(idstn(coeffs / modulus, type=1, norm="ortho").reshape(-1))


def alpha_star(eps: float, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return eps * (np.sqrt(1.0 + rho**2) - 1.0)


def footprint_sample(eps: float, beta: Sequence[float], h: float,
                     grid_density: int = 256) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Symbol image a + ib over a cell-centred grid of (0, pi)^d and its Jacobian."""
    angles = (np.arange(grid_density) + 0.5) * np.pi / grid_density
    if len(beta) == 1:
        sym = symbol(eps, beta, h, (angles,))
        return sym.a + 1j * sym.b, None
    T1, T2 = np.meshgrid(angles, angles, indexing="xy")
    sym = symbol(eps, beta, h, (T1, T2))
    jacobian = (2.0 * eps / h**3) * (beta[1] * np.sin(T1) * np.cos(T2)
                                     - beta[0] * np.sin(T2) * np.cos(T1))
    return (sym.a + 1j * sym.b).reshape(-1), jacobian.reshape(-1)


def corner_profile(eps: float, beta: Sequence[float], h: float, direction: Sequence[float],
                   samples: int = 201, t_max: float = 0.05) -> Dict[str, Any]:
    """Rectified modulus along theta = t e, t in [-t_max, t_max].

    The one-sided slopes at t = 0 approach +|beta.e|/h and -|beta.e|/h, a
    corner no trigonometric polynomial can have.
    """
    e = np.asarray(direction, dtype=float)
    t = np.linspace(-t_max, t_max, samples)
    sym = symbol(eps, beta, h, [t * ei for ei in e])
    modulus = sym.modulus
    step = t[1] - t[0]
    centre = samples // 2
    right_slope = (modulus[centre + 1] - modulus[centre]) / step
    left_slope = (modulus[centre] - modulus[centre - 1]) / step
    expected = abs(float(np.dot(beta, e))) / h
    return {
        "t": t,
        "modulus": modulus,
        "right_slope": float(right_slope),
        "left_slope": float(left_slope),
        "expected_slope": expected,
    }


def apply_periodic_stencil(eps: float, beta: Sequence[float], h: float, field: np.ndarray) -> np.ndarray:
    """Interior centered stencil on a periodic array (axis order y, x)."""
    out = np.zeros_like(field)
    ndim = field.ndim
    for r, b in enumerate(beta):
        ax = ndim - 1 - r
        forward = np.roll(field, -1, axis=ax)
        backward = np.roll(field, 1, axis=ax)
        out = out + eps * (2.0 * field - forward - backward) / h**2 + b * (forward - backward) / (2.0 * h)
    return out


def describe(modal: ModalSet) -> str:
    Pe = modal.peclet
    text = (f"rho_gal_mean={modal.mean_rho_gal:.4f} dominant={modal.dominant_count}/{modal.mode_count} "
            f"B_mean={modal.B_mean:.4f} Pe_h={Pe:.4f}")
    logging.info(f"Modal set Ne={modal.Ne}: {text}")
    return text
