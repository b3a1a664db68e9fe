"""Shared exception types with stable machine-readable codes."""

from __future__ import annotations


class HearthError(Exception):
    """Base class; `code` is the stable identifier surfaced over the API."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class CatalogError(HearthError):
    code = "bad-catalog"


class UnknownKindError(HearthError):
    code = "unknown-kind"


class DuplicateDeviceError(HearthError):
    code = "duplicate-device"


class UnknownDeviceError(HearthError):
    code = "unknown-device"


class MissingDeviceError(HearthError):
    """Device is known but currently unavailable (distinct from unknown)."""

    code = "missing-device"


class UnsupportedActionError(HearthError):
    code = "unsupported-action"


class UnknownVariableError(HearthError):
    code = "unknown-variable"


class DomainViolationError(HearthError):
    code = "domain-violation"


class CriticalDeviceDeniedError(HearthError):
    """Power-removing action refused on a device flagged critical."""

    code = "critical-device-denied"


class EventSchemaError(HearthError):
    code = "bad-event"


class TimeRegressionError(HearthError):
    code = "time-regression"


class GrammarConflictError(HearthError):
    """The derived grammar is not deterministically parseable."""

    code = "grammar-conflict"


class ParseError(HearthError):
    """Syntax error with the token alternatives that were legal at `position`."""

    code = "syntax-error"

    def __init__(self, message: str, position: int, expected: tuple):
        super().__init__(message, position=position)
        self.position = position
        self.expected = expected


class InvalidInsertionPointError(HearthError):
    code = "invalid-insertion-point"


class StaleOptionError(HearthError):
    """Option was computed against an older registry generation."""

    code = "stale-option"


class ProgramNotFoundError(HearthError):
    code = "program-not-found"


class ProgramStateError(HearthError):
    """Start of a running instance, stop of a stopped one, and similar."""

    code = "program-state"


class StorageError(HearthError):
    code = "storage"


class ScenarioError(HearthError):
    code = "bad-scenario"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line=line)
        self.line = line
