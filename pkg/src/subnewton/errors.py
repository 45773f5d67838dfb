"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A computation produced a non-finite intermediate or result."""


class DegenerateMatrixError(ValueError):
    """The input matrix is degenerate for the requested quantity."""


class LinearSolveError(RuntimeError):
    """A direct linear solve failed (e.g. the matrix is not SPD)."""


class ConvergenceError(RuntimeError):
    """An iterative solve hit its budget before meeting its condition.

    Carries the best iterate found so far and the certified error bound
    at that iterate, so callers can inspect or reuse partial work.
    """

    def __init__(self, message, best=None, bound=None):
        super().__init__(message)
        self.best = best
        self.bound = bound


class SolverError(RuntimeError):
    """A solver step failed mid-run; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
