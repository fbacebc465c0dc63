"""Exception types shared across the package."""


class KgrankError(Exception):
    """Base class for library errors."""


class InputError(KgrankError):
    """Malformed or inconsistent input data, files, or configuration."""


class UnknownEntityError(KgrankError):
    """An entity or role id that does not exist in the graph."""


class ConvergenceError(KgrankError):
    """An iterative solver failed to reach the requested residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SolverError(KgrankError):
    """A linear solver broke down or could not certify its residual."""
