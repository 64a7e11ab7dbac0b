"""Exception hierarchy shared across the package."""


class SatsynthError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SatsynthError):
    """An input violates a documented precondition or invariant."""


class FormatError(SatsynthError):
    """A file does not conform to the documented format.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleError(SatsynthError):
    """A tuning target cannot be met; the message reports the obstruction."""


class ConvergenceError(SatsynthError):
    """An iterative solver did not converge within its iteration budget."""


class UndefinedResultError(SatsynthError):
    """The requested quantity is undefined for the given inputs (e.g. 0/0)."""
