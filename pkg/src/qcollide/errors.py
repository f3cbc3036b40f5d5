"""Exception types shared across the package."""


class QCollideError(Exception):
    """Base class for all package errors."""


class ResourceLimitError(QCollideError):
    """Requested system size exceeds a configured hard cap."""


class ConvergenceError(QCollideError):
    """An iterative solver ran out of iterations.

    Carries the last residual and iteration count so callers can decide
    whether to flag the point or abort.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalConsistencyError(QCollideError):
    """A quantity that must hold to tolerance (norm, probability, positivity) drifted."""


class SchemaError(QCollideError):
    """A CSV/binary payload does not carry the expected schema marker."""
