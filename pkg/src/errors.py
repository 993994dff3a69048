"""Exception hierarchy shared by all lab modules."""


class LabError(Exception):
    """Root of every error the lab raises on purpose."""
    tag = "lab_error"


class ConfigurationError(LabError, ValueError):
    """Unsupported option, exceeded cap or malformed experiment file."""
    tag = "configuration"


class DomainError(LabError, ValueError):
    """An operation was called outside its precondition."""
    tag = "domain"


class NumericalFailureError(LabError, ArithmeticError):
    """A numeric contract (residual, round-off, exact self-check) failed."""
    tag = "numerical_failure"

    def __init__(self, message: str, worst_residual: float | None = None):
        super().__init__(message)
        self.worst_residual = worst_residual


class UncontrollableError(LabError):
    """The Kalman system is singular, so no control sequence exists."""
    tag = "uncontrollable"

    def __init__(self, message: str, numeric_rank: int):
        super().__init__(message)
        self.numeric_rank = numeric_rank


class OutputError(LabError, OSError):
    """Campaign output could not be written or read back."""
    tag = "io"

    def __init__(self, message: str, path):
        super().__init__(f"{path}: {message}")
        self.path = path
