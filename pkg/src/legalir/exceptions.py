"""Custom exceptions for legalir."""

from __future__ import annotations

from pathlib import Path


class LegalIRError(Exception):
    """Base exception for all legalir errors."""


class ConfigurationError(LegalIRError):
    """Raised when there's a configuration problem."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ParseError(LegalIRError):
    """Raised when an input record cannot be parsed."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        location = ""
        if path is not None:
            location = str(path)
            if line is not None:
                location = f"{location}:{line}"
        elif line is not None:
            location = f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)
        self.path = str(path) if path is not None else None
        self.line = line


class CorpusError(LegalIRError):
    """Raised when a corpus violates a cross-record invariant (e.g. duplicate ids)."""


class IndexingError(LegalIRError):
    """Raised when an index cannot be built from the given units."""


class UnknownUnitError(LegalIRError, KeyError):
    """Raised when an id is not present in an index or corpus."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class ResolutionError(UnknownUnitError):
    """Raised when a referenced article id does not resolve against the Civil Code."""


class ArgumentError(LegalIRError, ValueError):
    """Raised when an operation receives an invalid argument."""


class ScoreRangeError(ArgumentError):
    """Raised when a score lies outside [0, 1]."""

    def __init__(self, message: str, value: float | None = None):
        super().__init__(message)
        self.value = value


class UndefinedMetricError(ArgumentError):
    """Raised when a metric is undefined (e.g. recall against an empty gold set)."""


class TrainingError(LegalIRError):
    """Raised when a model cannot be trained from the given data."""


class ModelStateError(LegalIRError):
    """Raised when a model is used before it is fitted or trained."""


class FormatError(LegalIRError):
    """Raised when a persisted artifact has the wrong magic bytes or is truncated."""
