class SolverError(RuntimeError):
    """Base class for linear-solve failures."""


class SingularMatrixError(SolverError):
    pass


class SolverConvergenceError(SolverError):

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual
