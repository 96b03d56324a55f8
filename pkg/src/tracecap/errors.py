"""Exception types shared across tracecap modules."""


class TracecapError(Exception):
    """Base class for all tracecap errors."""


# --- trace parsing / validation ---

class TraceSyntaxError(TracecapError):
    """Trace document is not well-formed JSON/UTF-8."""


class TraceSchemaError(TracecapError):
    """Trace document is missing a field or a field has the wrong shape.

    ``field`` names the offending field (dotted path for nested fields).
    """

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"invalid trace field: {field}")


class TraceVersionError(TracecapError):
    """trace_version is not supported by this implementation."""


class InvalidUrl(TracecapError):
    """URL is relative or unparseable where an absolute URL is required."""


# --- compilation ---

class CompileError(TracecapError):
    """Trace invariant violation surfaced during plan compilation."""


# --- browser driver ---

class DriverError(TracecapError):
    """Base class for browser driver failures."""


class DriverUnreachable(DriverError):
    """WebDriver protocol endpoint could not be reached."""


class CapabilityRejected(DriverError):
    """Endpoint refused the requested session capabilities (proxy/cert)."""


class ElementNotFound(DriverError):
    """Selector resolved to no elements and the action demands one."""


class StaleElement(DriverError):
    """Element handle used after the document it belonged to was replaced."""


class NavigationTimeout(DriverError):
    """Page load did not complete within the navigation deadline."""


class BackendError(DriverError):
    """Wire-protocol failure; carries the protocol status when known."""

    def __init__(self, message: str, status: str | None = None):
        self.status = status
        super().__init__(message)


# --- WARC store ---

class InvalidRecord(TracecapError):
    """Record violates a WARC invariant; nothing was written."""


class CorruptRecord(TracecapError):
    """Record could not be read back intact."""

    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"corrupt record at offset {offset}: {reason}")


# --- capture proxy ---

class ProxyError(TracecapError):
    """Base class for capture proxy failures."""


class BindError(ProxyError):
    """Listen endpoint could not be bound."""


class CaError(ProxyError):
    """Session certificate authority could not be generated or loaded."""


# --- orchestration ---

class TraceMismatch(TracecapError):
    """Trace URL pattern does not match the requested capture URL."""


class CaptureEnvironmentError(TracecapError):
    """Driver or proxy could not be started for a capture."""


# --- trace repository ---

class RemoteUnreachable(TracecapError):
    """Trace repository remote could not be fetched."""


class LayoutError(TracecapError):
    """Remote does not follow the repository layout or fails integrity checks."""


# --- evaluation ---

class EmptyInput(TracecapError):
    """Aggregate called with an empty input list."""


class LengthMismatch(TracecapError):
    """Paired result lists are not aligned by resource."""
