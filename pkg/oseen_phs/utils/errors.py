from typing import Optional


def get_exception_msg(e: Exception) -> str:
    """
    Retrieves the message from an exception.
    Args:
        e (Exception): The exception from which to extract the message.
    Returns:
        str: The message of the exception. If the exception has a 'message' attribute,
             it returns that. Otherwise, it returns the string representation of the exception.
    """

    if hasattr(e, "message"):
        return str(e.message)
    else:
        return str(e)


class OseenError(Exception):
    """Base class of every error raised by the package. `exit_code` is the CLI status it maps to."""

    exit_code: int = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class ConfigError(OseenError):
    exit_code = 2


class DimensionError(OseenError):
    exit_code = 2


class CompatibilityError(OseenError):
    exit_code = 2


class MeshError(OseenError):
    exit_code = 3


class MeshFormatError(MeshError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SolverError(OseenError):
    exit_code = 4


class SingularSystemError(SolverError):
    def __init__(self, message: str, pivot: Optional[int] = None) -> None:
        super().__init__(message if pivot is None else f"{message} (zero pivot at unknown {pivot})")
        self.pivot = pivot


class ConvergenceError(SolverError):
    def __init__(self, message: str, iterations: int = 0) -> None:
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


class AcceptanceError(OseenError):
    exit_code = 5
