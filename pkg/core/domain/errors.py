"""Exception hierarchy for rein-seg.

Validation errors map to CLI exit code 1, runtime aborts to exit code 2.
"""

from typing import Any


class ReinSegError(Exception):
    """Base class for all rein-seg errors."""


class ValidationFailure(ReinSegError):
    """Base class for errors caused by invalid input or configuration."""


class ConfigurationError(ValidationFailure, ValueError):
    """Invalid configuration; the message names the violated invariant."""


class RankError(ConfigurationError):
    """Token rank exceeds min(m, c)."""


class ShapeMismatchError(ValidationFailure, ValueError):
    """Array or tensor shape does not match what an operation expects."""

    def __init__(self, what: str, expected: Any, got: Any) -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class InputValidationError(ValidationFailure, ValueError):
    """Input values outside their allowed domain (non-binary mask, score range)."""


class IngestionError(ValidationFailure):
    """Dataset directory cannot be ingested."""


class CoverageError(ValidationFailure):
    """Tiles do not cover every pixel of the target image."""


class PartitionError(ValidationFailure):
    """Parameter groups overlap or fail to partition the model."""


class DatasetExistsError(ValidationFailure):
    """Output directory is not empty and --force was not given."""


class CheckpointError(ValidationFailure):
    """Checkpoint or weight manifest cannot be read or applied."""


class GenerationError(ValidationFailure):
    """Synthetic rendering cannot satisfy the foreground bounds of a domain."""


class TrainingAbortedError(ReinSegError):
    """Training stopped on a non-finite loss."""

    def __init__(self, message: str, diagnostics: dict[str, Any]) -> None:
        self.diagnostics = diagnostics
        super().__init__(message)
