"""Exception types shared across the package."""


class VirialError(Exception):
    """Base class for all package errors."""


class InvalidDegree(VirialError, ValueError):
    pass


class RejectionBudgetExceeded(VirialError, RuntimeError):
    pass


class SizeLimitExceeded(VirialError, ValueError):
    pass


class IndexOutOfRange(VirialError, IndexError):
    pass


class UndefinedLog(VirialError, ValueError):
    pass


class InsufficientSamples(VirialError, ValueError):
    pass


class GraphParseError(VirialError, ValueError):
    """Malformed graph text; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
