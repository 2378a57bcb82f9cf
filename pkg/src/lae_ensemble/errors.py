"""Exception hierarchy for the toolkit."""


class LAEError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LAEError, ValueError):
    """A value breaks a domain invariant (zero-area box, score out of range, ...)."""


class SchemaError(ValidationError):
    """Input JSON does not match the documented schema.

    ``context`` holds the offending field path (``frames[2].items[0].bbox``)
    or the line/column reported by the JSON decoder.
    """

    def __init__(self, message: str, context: str | None = None):
        self.context = context
        super().__init__(f"{context}: {message}" if context else message)


class UnknownModel(LAEError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class AllZeroAP(ValidationError):
    pass


class NoGroundTruth(LAEError):
    pass


class FrameMismatch(LAEError):
    pass


class NoIntersection(LAEError):
    """The viewing ray never reaches the target altitude surface."""


class BehindCamera(NoIntersection):
    """The intersection lies at or behind the camera centre."""


class OutOfRange(ValidationError):
    """Tangent-plane offset exceeds the supported radius."""
