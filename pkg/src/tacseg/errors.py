"""Exception taxonomy shared across the pipeline."""


class TacsegError(Exception):
    """Base class for all tacseg errors."""


class EmptyStream(TacsegError):
    """Operation requires a non-empty sensor stream."""


class CorruptStream(TacsegError):
    """Stream violates its invariants (non-finite or unordered timestamps)."""


class NoOverlap(TacsegError):
    """Streams share no common time window."""


class FormatError(TacsegError):
    """On-disk artifact has a bad magic, version, or inconsistent shape."""


class MissingFile(TacsegError):
    """A referenced file does not exist."""


class InvalidTransform(TacsegError):
    """Rotation matrix is not a proper rotation (orthonormal, det +1)."""


class DimMismatch(TacsegError):
    """Array widths or lengths do not agree."""


class TooShort(TacsegError):
    """Sequence has fewer frames than the operation needs."""


class InvalidIntervals(TacsegError):
    """Interval set is unsorted, overlapping, or out of bounds."""


class VocabularyMismatch(TacsegError):
    """Model class count does not match the expected label vocabulary."""


class EmptyDataset(TacsegError):
    """A non-empty dataset/split is required."""


class LabelsRequired(TacsegError):
    """Operation needs a labeled sequence."""


class ConfigError(TacsegError):
    """Invalid model or run configuration."""


class LabelError(TacsegError):
    """Label index outside the class range."""


class CacheError(TacsegError):
    """Backward called with a cache from a different model state."""


class NoTrainingWindows(TacsegError):
    """Every candidate window was discarded by the idle filter."""


class CoverageGap(TacsegError):
    """A frame is covered by no window during soft voting."""


class InvalidPose(TacsegError):
    """Pose quaternion is not unit length within tolerance."""


class UsageError(TacsegError):
    """Bad command-line usage (exit code 2)."""
