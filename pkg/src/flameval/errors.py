"""Exception hierarchy shared by every flameval module."""


class FlamError(Exception):
    """Base class for all flameval errors."""


class LabelRangeError(FlamError, ValueError):
    """A class label lies outside ``[0, C)``."""

    def __init__(self, index: int, label, class_count: int):
        self.index = index
        self.label = label
        self.class_count = class_count
        super().__init__(
            f"label {label!r} at sample index {index} is outside [0, {class_count})"
        )


class UndefinedMetricError(FlamError, ValueError):
    """The metric has no value for the given evidence (e.g. zero samples)."""


class DegenerateVarianceError(FlamError, ValueError):
    """R2 requested on targets whose total variance is zero."""


class ShapeError(FlamError, ValueError):
    """Aggregatable measures of different kinds or class counts were combined."""


class InfeasiblePartitionError(FlamError, ValueError):
    """The requested partitioning cannot be realised on the given pool."""


class ParseError(FlamError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProtocolError(FlamError):
    """Malformed frame, wrong schema version or an out-of-order message."""


class RoundTimeoutError(ProtocolError):
    def __init__(self, phase: str, missing):
        self.phase = phase
        self.missing = sorted(missing)
        super().__init__(f"timeout in phase {phase!r}; missing participants {self.missing}")


class EquivalenceViolation(FlamError):
    """FLAM result differs from the centralized result beyond tolerance."""
