"""Exception types shared across the package."""


class PsspError(Exception):
    """Base class for every error raised by this package."""


class MalformedRecordError(PsspError):
    """A dataset record is missing a field or contains invalid characters."""


class LengthMismatchError(PsspError):
    """Paired sequences (residues vs labels, preds vs truth) differ in length."""


class UnknownLabelCharError(PsspError):
    """A raw structure label character is outside the accepted alphabet."""


class EmptyDatasetError(PsspError):
    """An operation that needs at least one record received none."""


class DegenerateSplitError(PsspError):
    """A train/validation split left one side empty."""


class MalformedInputError(PsspError):
    """Free-form input (sequence text, window set) violates a precondition."""


class CoverageGapError(PsspError):
    """A residue position is covered by no window during reconstruction."""


class ShapeMismatchError(PsspError):
    """Array arguments have incompatible shapes."""


class IndexOutOfRangeError(PsspError):
    """An integer id lies outside the table it indexes."""


class OddDimensionError(PsspError):
    """The positional encoding requires an even model dimension."""


class AllIgnoredError(PsspError):
    """Every label row carries the ignore sentinel; the loss is undefined."""


class InvalidConfigError(PsspError):
    """A configuration object violates its invariants."""


class StaleCacheError(PsspError):
    """A backward pass received a cache that does not match its inputs."""


class NonFiniteLossError(PsspError):
    """Training produced a NaN or infinite loss."""


class CheckpointError(PsspError):
    """Base class for checkpoint file problems."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint bytes are truncated or fail to parse."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version or tensor manifest does not match."""


class EmptyMatrixError(PsspError):
    """A confusion matrix with zero total count cannot be summarized."""
