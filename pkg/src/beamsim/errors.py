"""Exception types shared across the package."""


class BeamsimError(Exception):
    """Base class for all beamsim-specific failures."""


class DegenerateInputError(BeamsimError):
    """Input is structurally unusable (all-zero batch, vanishing spectrum, ...)."""


class SingularMatrixError(BeamsimError):
    """A dense factorization or solve hit a non-positive-definite matrix."""


class IndefiniteOperatorError(BeamsimError):
    """An implicit operator produced non-positive curvature during CG."""


class ConvergenceError(BeamsimError):
    """An iterative solver failed to meet its tolerance.

    Carries the last residual norm, the iteration count, and (when available)
    the best iterate so callers can degrade gracefully instead of aborting.
    """

    def __init__(self, message, residual_norm, iterations, solution=None):
        super().__init__(message)
        self.residual_norm = float(residual_norm)
        self.iterations = int(iterations)
        self.solution = solution
