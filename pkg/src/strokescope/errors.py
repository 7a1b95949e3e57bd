"""Exception hierarchy shared across the engine."""


class StrokescopeError(Exception):
    """Base class for all engine errors."""


class SketchParseError(StrokescopeError):
    """Malformed input bytes. Carries the byte offset of the first bad token."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class SketchValidationError(StrokescopeError):
    """Structurally well-formed input that violates a sketch invariant."""


class DimensionError(StrokescopeError):
    """Mismatched canvas / grid / parameter dimensions."""


class ScorerError(StrokescopeError):
    """Invalid scorer state or target (non-finite parameters, bad class index, ...)."""


class ModelFormatError(StrokescopeError):
    """Corrupt or unsupported model file."""


class TrainingError(StrokescopeError):
    """Corpus too small or otherwise unusable for training."""


class NoCandidateError(StrokescopeError):
    """Attack budget admits no removable stroke."""


class BudgetError(StrokescopeError):
    """Attack budget is inconsistent with the sketch (too large, would empty it)."""
