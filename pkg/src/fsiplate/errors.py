"""Exception hierarchy shared by every module of the package."""


class FSIError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FSIError, ValueError):
    pass


class InvalidMeshError(FSIError, ValueError):
    pass


class UnsupportedDegreeError(FSIError, ValueError):
    pass


class OutOfDomainError(FSIError, ValueError):
    pass


class SingularSystemError(FSIError, ArithmeticError):
    """Raised when a factorization meets a zero pivot.

    ``pivot`` holds the offending row/column index when the backend reports it.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NoConvergenceError(FSIError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CompatibilityError(FSIError, ValueError):
    """Dirichlet interface data violates the enclosed-flow compatibility condition."""


class UndefinedRateError(FSIError, ValueError):
    pass


class ConfigurationError(FSIError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
