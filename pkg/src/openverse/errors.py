"""Error codes and exception types shared by the world model, protocol, and server."""

# Wire-level error codes, spelled exactly as they appear in Error frame bodies.
VERSION_MISMATCH = "VersionMismatch"
ROOM_FULL = "RoomFull"
ROOM_UNKNOWN = "RoomUnknown"
NO_SUCH_ENTITY = "NoSuchEntity"
FORBIDDEN = "Forbidden"
SYNTAX_ERROR = "SyntaxError"
MISSING_FIELD = "MissingField"
UNKNOWN_KIND = "UnknownKind"

ERROR_CODES = frozenset(
    {
        VERSION_MISMATCH,
        ROOM_FULL,
        ROOM_UNKNOWN,
        NO_SUCH_ENTITY,
        FORBIDDEN,
        SYNTAX_ERROR,
        MISSING_FIELD,
        UNKNOWN_KIND,
    }
)


class OpenverseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidPosition(OpenverseError):
    """A coordinate was non-finite or otherwise unusable."""


class InvalidComponent(OpenverseError):
    """A component payload violated its schema (bad transform, nested data, ...)."""

    def __init__(self, detail: str, *, missing_field: str | None = None):
        super().__init__(detail)
        self.detail = detail
        # Set when the failure is specifically an absent required field; lets
        # the server report MissingField instead of a generic syntax error.
        self.missing_field = missing_field


class InvalidAnimation(OpenverseError):
    """Animation parameters were out of range (non-positive duration, negative time)."""


class InvalidWorld(OpenverseError):
    """A world description failed validation; carries the failing field paths."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid world")


class DecodeError(OpenverseError):
    """A wire frame could not be decoded.

    ``code`` is one of SYNTAX_ERROR, MISSING_FIELD, or UNKNOWN_KIND so the
    server can answer with a well-formed Error frame.
    """

    def __init__(self, code: str, detail: str):
        assert code in (SYNTAX_ERROR, MISSING_FIELD, UNKNOWN_KIND)
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail
