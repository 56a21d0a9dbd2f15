"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Dimensions of the inputs do not agree."""


class DegenerateInputError(ValueError):
    """A factor vector (or scaling) is zero, so the operation is undefined."""


class CapabilityError(ValueError):
    """The request lies outside what the routine supports (order, size)."""


class DecompositionError(RuntimeError):
    """A direct decomposition could not be computed reliably."""


class ConvergenceError(RuntimeError):
    """An iteration failed to converge; ``trace`` holds its history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class FormatError(ValueError):
    """A decomposition or tensor file is malformed."""
