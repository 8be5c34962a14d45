"""Exception types shared across the pipeline."""


class RoomscanError(Exception):
    """Base class for every error raised by this package."""


class MalformedInput(RoomscanError):
    """Bytes could not be decoded as PNG."""


class UnsupportedFormat(RoomscanError):
    """PNG decoded but uses a layout this package does not handle."""


class OutOfRange(RoomscanError, ValueError):
    """A numeric parameter fell outside its documented domain."""


class DimensionMismatch(RoomscanError, ValueError):
    pass


class NotFound(RoomscanError):
    """No laser dot survived the detection pipeline."""


class DotLost(RoomscanError):
    """The dot was missing for too many consecutive frames during a search."""


class NoConvergence(RoomscanError):
    """Centering search exceeded one full revolution of the stepper."""


class NetworkError(DotLost):
    """HTTP frame fetch failed after all retries.

    Subclasses DotLost so a dead camera looks like an occluded dot upstream.
    """


class Trapped(RoomscanError):
    """Backtracking was requested with no traversed segment left to retrace."""


class ParseError(RoomscanError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(RoomscanError, ValueError):
    pass


class OriginInsideObstacle(RoomscanError, ValueError):
    pass
