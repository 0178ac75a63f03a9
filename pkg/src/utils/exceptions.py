"""
Custom Exceptions

Centralized exception definitions for the readers, estimators, trainers and the
pipeline. Every error names the component that raised it and carries a details
dict with diagnostic context.

Example:
    >>> from src.utils.exceptions import MediaFormatError
    >>> raise MediaFormatError(component="media.pgm", message="bad magic", details={"magic": "P6"})
"""

from typing import Any, Dict, Optional


class FillMassError(Exception):
    """
    Base class for every error raised by this package.

    Attributes:
        component: Name of the component that failed (e.g. 'media.wav')
        message: Error description
        details: Additional context about the failure

    Example:
        >>> raise FillMassError(
        ...     component="geometry.capacity",
        ...     message="Cylinder model is empty",
        ...     details={"rings": 61}
        ... )
    """

    def __init__(
        self,
        component: str,
        message: str,
        details: Optional[Dict[str, Any]] = None
    ):
        self.component = component
        self.message = message
        self.details = details or {}
        super().__init__(f"[{component}] {message}")


# ── Input validation family (CLI exit code 2) ─────────────────────────────────

class MediaError(FillMassError):
    """Raised when an external file cannot be ingested."""
    pass


class MediaFormatError(MediaError):
    """Raised when a file is malformed, truncated or missing required keys."""
    pass


class UnsupportedEncodingError(MediaError):
    """Raised when a well-formed file uses an encoding we do not read."""
    pass


class MediaValidationError(MediaError):
    """Raised when parsed content violates a domain invariant."""
    pass


class DimensionError(MediaError):
    """Raised when an embedding width is not one of the supported sizes."""
    pass


class DomainError(FillMassError):
    """Raised when an operation is called outside its precondition."""
    pass


class TooShortError(DomainError):
    """Raised when an audio clip is shorter than one analysis window."""
    pass


class SplitError(FillMassError):
    """Raised when cross-validation folds cannot be built from the object list."""
    pass


class ConfigError(FillMassError):
    """Raised when the pipeline configuration or run inputs are invalid."""
    pass


# ── Estimation family ─────────────────────────────────────────────────────────

class TrainingError(FillMassError):
    """Raised when optimisation cannot proceed (e.g. non-finite gradients)."""
    pass


class DegenerateGeometryError(FillMassError):
    """Raised when two rays are too close to parallel to triangulate."""
    pass


class NoDetectionError(FillMassError):
    """Raised when a fitted cylinder has no non-zero ring."""
    pass


class SynthesisError(FillMassError):
    """Raised when a synthetic scene or dataset cannot be generated."""
    pass


class EvaluationError(FillMassError):
    """Raised when a submission cannot be scored against the manifest (exit code 3)."""
    pass


class StageExecutionError(FillMassError):
    """Raised when a pipeline stage fails with an unexpected error."""
    pass
