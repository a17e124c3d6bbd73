"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PretaskError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PretaskError):
    pass


class ContractError(PretaskError):
    """A caller broke an operation's precondition (a programming bug)."""


class SchemaError(PretaskError):
    """A serialized document does not match its schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


class ParseError(PretaskError):
    """Model output could not be turned into the expected structure."""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class BatchParseError(ParseError):
    pass


class VerdictParseError(ParseError):
    pass


class SummaryParseError(ParseError):
    pass


class ReflectionParseError(ParseError):
    pass


class CurationParseError(ParseError):
    pass


class BackendError(PretaskError):
    """The model backend failed and retries are exhausted."""


class TransportError(BackendError):
    """Transient transport failure; the gateway retries these."""


class FixtureMissError(BackendError):
    def __init__(self, role: str, index: int):
        self.role = role
        self.index = index
        super().__init__(f"no scripted fixture for role={role!r} index={index}")


class UndefinedMetricError(PretaskError):
    pass
