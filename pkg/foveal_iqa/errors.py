"""Exception hierarchy for foveal-iqa.

Validation problems (bad inputs, bad configuration) derive from
``ValidationError`` and map to CLI exit status 2; everything else derived
from ``FovealIQAError`` maps to exit status 3.
"""

from typing import Optional


class FovealIQAError(Exception):
    """Base class for all errors raised by foveal-iqa."""


class ValidationError(FovealIQAError, ValueError):
    """Inputs or configuration violate a documented precondition."""


class InvalidOpticsError(ValidationError):
    """The display lies at or beyond the focal length, so no virtual image exists."""


class DomainError(ValidationError):
    """A scalar or raster argument lies outside the domain of an operation."""


class DimensionMismatchError(ValidationError):
    """Two rasters that must share dimensions do not."""

    def __init__(self, expected, actual, what: str = "raster"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what} dimensions differ: {self.expected} vs {self.actual}")


class ConfigurationError(ValidationError):
    """Weights, zone schemes or metric settings are inconsistent."""


class ManifestError(ValidationError):
    """A dataset manifest failed validation.

    ``field_path`` locates the offending entry, e.g. ``images[3].path``.
    """

    def __init__(self, message: str, field_path: Optional[str] = None):
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)


class InsufficientDataError(ValidationError):
    """Too few samples for a statistic or a fit."""


class UndefinedCorrelationError(FovealIQAError):
    """Pearson correlation requested for a series with zero variance."""


class NonIdentifiableError(FovealIQAError):
    """The zone weights cannot be identified from the data."""


class UndefinedReferenceError(FovealIQAError):
    """The reference image carries no energy, so a normalized error is undefined."""


class PipelineError(FovealIQAError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
