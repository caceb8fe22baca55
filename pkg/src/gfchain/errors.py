"""Exception types shared across the package."""


class GFError(Exception):
    """Base class for all errors raised by gfchain."""


class EvaluationError(GFError, ValueError):
    """The rate ratio S could not be evaluated (non-finite, negative, singular)."""


class DomainError(GFError, ValueError):
    """An argument lies outside the domain of an operation."""


class GridMismatchError(GFError, ValueError):
    """Two objects live on incompatible grids or have incompatible dimensions."""


class ConvergenceError(GFError, RuntimeError):
    """An iteration hit its budget before meeting its tolerance.

    Attributes
    ----------
    residual : float
        Last l1 change between successive iterates.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class GridWarning(UserWarning):
    """Grid parameters fall outside the regime covered by the error bound."""
