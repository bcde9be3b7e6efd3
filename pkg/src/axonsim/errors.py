"""Exception hierarchy shared across the package."""


class AxonSimError(Exception):
    """Base class for every error raised by axonsim."""


class ValidationError(AxonSimError, ValueError):
    pass


class DimensionError(ValidationError):
    """A dimension or count is non-positive."""


class ShapeError(ValidationError):
    """An operand matrix does not match its declared dimensions."""


class RangeError(ValidationError):
    """A fraction or rate falls outside its legal interval."""


class GeometryError(ValidationError):
    """A convolution does not tile its IFMAP into an integral output grid."""


class PartitionError(ValidationError):
    pass


class CapacityError(ValidationError):
    pass


class UsageError(AxonSimError):
    """An operation was called in a mode it does not support."""


class ReuseIllegalError(AxonSimError):
    """A neighbour-sourced feeder element differs from the upstream feeder's."""


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VerificationError(AxonSimError):
    """Simulated output or timing disagrees with its oracle."""
