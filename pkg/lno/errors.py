"""
Exception types raised by the lno package.

Each type subclasses the built-in exception a caller would expect
(ValueError for bad input, RuntimeError for numerical trouble) so plain
``except ValueError`` handlers keep working. The CLI maps them to exit codes.
"""


class LnoError(Exception):
    """Base class for every error raised on purpose by lno"""

    exit_code = 1


class ConfigError(LnoError, ValueError):
    """Invalid configuration field(s)"""

    exit_code = 1


class ShapeError(LnoError, ValueError):
    """Field or kernel dimensions that an operation cannot accept"""

    exit_code = 2

    def __init__(self, message: str, axis: int = None, suggested: int = None):
        if suggested is not None:
            message = f"{message} (nearest valid size: {suggested})"
        super().__init__(message)
        self.axis = axis
        self.suggested = suggested


class FormatError(LnoError, ValueError):
    """Malformed dataset, checkpoint, manifest or geometry file"""

    exit_code = 2


class NumericalError(LnoError, RuntimeError):
    """Non-convergence, blow-up or divergence"""

    exit_code = 3
