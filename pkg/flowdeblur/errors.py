"""
Error hierarchy shared by every flowdeblur module.

All errors derive from ``FlowDeblurError`` so callers (and the CLI) can catch
one type. Variants carry the structured fields a caller needs to react without
parsing messages.
"""

from __future__ import annotations

from collections.abc import Sequence


class FlowDeblurError(Exception):
    """Base class for all flowdeblur errors."""


class ShapeError(FlowDeblurError):
    """Two operands disagree in width, height or channel count."""

    def __init__(
        self,
        message: str,
        expected: tuple[int, ...] | None = None,
        actual: tuple[int, ...] | None = None,
    ) -> None:
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class ParameterError(FlowDeblurError, ValueError):
    """A parameter lies outside its documented domain."""


class ConfigError(FlowDeblurError):
    """Run configuration (flags or config file) is invalid."""


class ImageIOError(FlowDeblurError, OSError):
    """Raster file could not be read or written."""


class FlowFormatError(FlowDeblurError):
    """Flow file or buffer violates the MFLO layout."""


class DatasetError(FlowDeblurError, OSError):
    """Dataset input directory is empty or the output is unwritable."""


class NumericalError(FlowDeblurError):
    """Non-finite value met inside an iterative solver."""

    def __init__(self, message: str, residuals: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.residuals = list(residuals)


class ExternalProcessError(FlowDeblurError):
    """Failure at a child-process boundary."""

    def __init__(self, message: str, command: Sequence[str] | None = None) -> None:
        super().__init__(message)
        self.command = list(command) if command is not None else None


class SpawnError(ExternalProcessError):
    """Child process could not be started."""


class ProcessTimeoutError(ExternalProcessError):
    """Child did not answer within its timeout."""


class MalformedReplyError(ExternalProcessError):
    """Child answered with bytes that do not form a valid frame."""


class ReplyShapeError(ExternalProcessError):
    """Child answered with a frame of the wrong dimensions."""

    def __init__(
        self,
        message: str,
        expected: tuple[int, ...],
        actual: tuple[int, ...],
        command: Sequence[str] | None = None,
    ) -> None:
        super().__init__(message, command)
        self.expected = expected
        self.actual = actual


class FlowProviderError(ExternalProcessError):
    """Flow-estimation command failed or produced an unusable flow."""
