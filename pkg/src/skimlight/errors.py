"""Exception types shared across the pipeline, service, and CLI."""

from __future__ import annotations

from typing import Any


class SkimlightError(Exception):
    """Base class; carries a machine-readable code and optional details."""

    code = "ERROR"

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def envelope(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class MalformedInput(SkimlightError):
    code = "MALFORMED_INPUT"


class InvalidDocument(SkimlightError):
    code = "INVALID_DOCUMENT"

    def __init__(self, violations):
        super().__init__(
            "document failed validation",
            details=[v.as_dict() for v in violations],
        )
        self.violations = violations


class EmptyDocument(SkimlightError):
    code = "EMPTY_DOCUMENT"


class DuplicateLfId(SkimlightError):
    code = "DUPLICATE_LF_ID"


class NoSignal(SkimlightError):
    code = "NO_SIGNAL"


class InvalidSettings(SkimlightError):
    """Raised with a more specific code for each settings violation."""

    def __init__(self, code: str, message: str, details: Any = None):
        super().__init__(message, details)
        self.code = code


UNKNOWN_PARAGRAPH = "UNKNOWN_PARAGRAPH"
DELTA_OUT_OF_RANGE = "DELTA_OUT_OF_RANGE"
INVALID_DENSITY = "INVALID_DENSITY"
