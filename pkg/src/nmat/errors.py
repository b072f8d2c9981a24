class NmatError(Exception):
    """Base class for simulator errors."""


class ConfigError(NmatError, ValueError):
    """Invalid or inconsistent configuration."""


class TraceFormatError(NmatError, ValueError):
    """Malformed trace file; carries the offending line number when known."""

    def __init__(self, msg: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class ComparisonError(NmatError):
    """Two run reports cannot be compared (different traces or topologies)."""
