import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spilu, gmres, LinearOperator

from numerics.exceptions import SingularMatrixError, SolverConvergenceError
from numerics.models import SolveReport

SparseOperator = sp.csr_matrix

_REFINEMENT_STEPS = 3


def consolidate(A) -> sp.csr_matrix:
    """CSR copy with duplicates summed, explicit zeros dropped and indices sorted."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def transpose(A) -> sp.csr_matrix:
    return consolidate(sp.csr_matrix(A).transpose())


def triple_product(Dt, W: np.ndarray, D, symmetrize: Optional[bool] = None) -> sp.csr_matrix:
    """Dt @ diag(W) @ D, consolidated.

    When Dt is the transpose of D the product is symmetric in exact
    arithmetic and is averaged with its transpose to remove round-off.
    """
    W = np.asarray(W, dtype=float).reshape(-1)
    if Dt.shape[1] != W.size or D.shape[0] != W.size:
        raise ValueError(
            f"Weights of length {W.size} do not conform with {Dt.shape} and {D.shape}")
    S = sp.csr_matrix(Dt) @ sp.diags(W) @ sp.csr_matrix(D)
    if symmetrize is None:
        symmetrize = (Dt.shape == D.shape[::-1]
                      and (sp.csr_matrix(Dt) != sp.csr_matrix(D).T).nnz == 0)
    if symmetrize:
        S = 0.5 * (S + S.T)
    return consolidate(S)


def _residual(A, x: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(A @ x - b))


def _solve_direct(A: sp.csc_matrix, b: np.ndarray, target: float) -> Tuple[np.ndarray, float, object]:
    try:
        lu = splu(A)
    except RuntimeError as e:
        raise SingularMatrixError(f"Sparse LU factorization failed: {e}")
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("Sparse LU produced non-finite values")
    residual = _residual(A, x, b)
    for step in range(_REFINEMENT_STEPS):
        if residual <= target:
            break
        correction = lu.solve(b - A @ x)
        candidate = x + correction
        candidate_residual = _residual(A, candidate, b)
        if candidate_residual >= residual:
            break
        logging.info(
            f"Iterative refinement step {step + 1}: residual {residual:.3e} -> {candidate_residual:.3e}")
        x, residual = candidate, candidate_residual
    return x, residual, lu


def _solve_iterative(A: sp.csc_matrix, b: np.ndarray, tol: float,
                     x0: Optional[np.ndarray] = None, preconditioner=None) -> Tuple[np.ndarray, float, int]:
    if preconditioner is None:
        try:
            ilu = spilu(A, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as e:
            raise SingularMatrixError(f"Incomplete LU factorization failed: {e}")
        preconditioner = ilu
    M = LinearOperator(A.shape, matvec=preconditioner.solve)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x, info = gmres(A, b, x0=x0, rtol=tol, atol=0.0, restart=200, maxiter=50, M=M,
                    callback=count, callback_type="pr_norm")
    return x, _residual(A, x, b), iterations


def solve(A, b: np.ndarray, tol: float = 1e-12, method: str = "direct") -> Tuple[np.ndarray, SolveReport]:
    """Solve A x = b with ||A x - b||_2 <= tol ||b||_2."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.size:
        raise ValueError(f"Cannot solve a {A.shape} system with a right-hand side of length {b.size}")
    A = sp.csc_matrix(A)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), SolveReport(0.0, method, 0)
    target = tol * b_norm

    if method == "iterative":
        x, residual, iterations = _solve_iterative(A, b, tol)
        if residual > target:
            raise SolverConvergenceError(
                f"GMRES stopped at relative residual {residual / b_norm:.3e} (target {tol:.1e})",
                best_residual=residual)
        return x, SolveReport(residual, "iterative", iterations)
    if method != "direct":
        raise ValueError(f"Unknown solver method '{method}'")

    x, residual, lu = _solve_direct(A, b, target)
    if residual <= target:
        return x, SolveReport(residual, "direct", 0)

    logging.warning(
        f"Direct solve residual {residual / b_norm:.3e} above {tol:.1e}; switching to preconditioned GMRES")
    x_it, residual_it, iterations = _solve_iterative(A, b, tol, x0=x, preconditioner=lu)
    if residual_it < residual:
        x, residual = x_it, residual_it
    if residual > target:
        raise SolverConvergenceError(
            f"Could not reach relative residual {tol:.1e}; best {residual / b_norm:.3e}",
            best_residual=residual)
    return x, SolveReport(residual, "iterative", iterations)


def dump_matrix_market(A, path: Union[str, Path], comment: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
    logging.info(f"Wrote {A.shape[0]}x{A.shape[1]} operator with {A.nnz} entries to {path}")
    return path
