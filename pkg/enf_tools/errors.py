"""Exception hierarchy shared by the services and mapped onto CLI exit codes."""

from __future__ import annotations


class EnfError(Exception):
    """Base class for every error raised by enf_tools."""


class InputError(EnfError, ValueError):
    """Invalid parameters, flags or preconditions."""


class ParseError(EnfError, ValueError):
    """Malformed WAV, Y4M or trace file."""

    def __init__(self, message: str, *, offset: int | None = None, frame_index: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if frame_index is not None:
            message = f"{message} (frame {frame_index})"
        super().__init__(message)
        self.offset = offset
        self.frame_index = frame_index


class UnsupportedFormatError(ParseError):
    pass


class EstimationError(EnfError):
    """A frequency could not be estimated from the given data."""


class DegenerateInputError(EstimationError):
    pass


class NoUsableRegionError(EstimationError):
    pass


class AmbiguousAliasError(EstimationError):
    pass


class MatchError(EnfError):
    """Two traces could not be compared."""


class UndefinedCorrelationError(MatchError):
    pass


class HopMismatchError(MatchError, InputError):
    pass
