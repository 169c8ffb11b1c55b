"""Error types shared across the toolkit.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures 1:1 onto wire-level error payloads.
"""

from __future__ import annotations

from typing import Any


class ToolError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.message = message
        self.details = details


class OpenError(ToolError):
    """A video or image-sequence locator could not be opened."""

    code = "open-error"


class EmptyVideoError(OpenError):
    """The container opened but holds zero frames."""

    code = "empty-video-error"


class WriteError(ToolError):
    """A destination could not be written."""

    code = "write-error"


class FrameRangeError(ToolError):
    """An index, range, or coordinate is out of bounds."""

    code = "range-error"


class ShapeError(ToolError):
    """Image or mask dimensions do not match."""

    code = "shape-error"


class EmptyObjectError(ToolError):
    """An object id is absent or has no pixels."""

    code = "empty-object-error"


class ConfigError(ToolError):
    """Invalid configuration: unknown backend, bad classes, bad options."""

    code = "config-error"


class LoadError(ToolError):
    """A backend failed to load (missing weights, missing plugin)."""

    code = "load-error"


class StateError(ToolError):
    """An operation was called in the wrong order."""

    code = "state-error"


class CapabilityError(ToolError):
    """A backend does not support the requested prompt kind or operation."""

    code = "capability-error"


class SeedError(ToolError):
    """Propagation was requested without a usable seed mask."""

    code = "seed-error"


class ExportError(ToolError):
    """Dataset export or archive packaging failed validation."""

    code = "export-error"


class NotFoundError(ToolError):
    """A session, job, or resource does not exist."""

    code = "not-found"
