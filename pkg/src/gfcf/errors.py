"""Exception types shared across the package.

The CLI maps each class onto an exit status, so the hierarchy matters more
than the messages.
"""


class GfcfError(Exception):
    """Base class for all package errors."""


class InputError(GfcfError, ValueError):
    """Malformed or out-of-range input data (exit status 2)."""


class ParseError(InputError):
    """A split file or config fragment could not be parsed."""

    def __init__(self, message, *, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class ValidationError(GfcfError, ValueError):
    """Parameters or shapes that violate a contract (exit status 3)."""


class DimensionError(ValidationError):
    pass


class DenseCapError(ValidationError):
    def __init__(self, n, cap):
        super().__init__(
            f"dense path unavailable: {n} items exceeds the dense cap of {cap}"
        )
        self.n = n
        self.cap = cap


class NotLowPassMeasurable(ValidationError):
    """The low-pass ratio has a zero denominator."""


class NumericError(GfcfError, ArithmeticError):
    """Non-finite values detected (exit status 4)."""
