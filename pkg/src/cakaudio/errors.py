"""Error taxonomy shared across the package.

Every failure surfaced to the CLI or HTTP layer carries a stable
machine-readable ``code`` so callers can branch without parsing messages.
"""


class CakError(Exception):
    """Base class for all package errors."""

    code = "GENERIC"


class UnsupportedFormat(CakError):
    """Audio file uses a codec or layout we do not decode."""

    code = "UNSUPPORTED_FORMAT"


class CorruptHeader(CakError):
    """RIFF/WAVE structure is truncated or malformed."""

    code = "CORRUPT_HEADER"


class EmptyAudio(CakError):
    """Audio payload contains zero frames."""

    code = "EMPTY_AUDIO"


class IoFailure(CakError):
    """Filesystem read or write failed."""

    code = "IO_FAILURE"


class RateMismatch(CakError):
    """Clip sample rate differs from the analysis configuration."""

    code = "RATE_MISMATCH"


class TooShort(CakError):
    """Clip shorter than a single analysis frame."""

    code = "TOO_SHORT"


class ShapeMismatch(CakError):
    """Operands have incompatible grid shapes."""

    code = "SHAPE_MISMATCH"


class NonFinite(CakError):
    """A NaN or Inf appeared in a numeric grid."""

    code = "NON_FINITE"


class UnsupportedSecondOrder(CakError):
    """Operation lacks a differentiable backward rule."""

    code = "UNSUPPORTED_SECOND_ORDER"


class EpochOutOfRange(CakError):
    """Epoch index outside the configured schedule."""

    code = "EPOCH_OUT_OF_RANGE"


class EmptyCorpus(CakError):
    """Corpus directory yielded too few usable files."""

    code = "EMPTY_CORPUS"


class CorruptIndex(CakError):
    """Corpus index sidecar failed validation."""

    code = "CORRUPT_INDEX"


class VersionMismatch(CakError):
    """Checkpoint format version differs from this build."""

    code = "VERSION_MISMATCH"


class CorruptCheckpoint(CakError):
    """Checkpoint failed structural or digest validation."""

    code = "CORRUPT_CHECKPOINT"


class TrainingAborted(CakError):
    """Training stopped on a numeric fault; last good checkpoint kept."""

    code = "TRAINING_ABORTED"

    def __init__(self, message: str, last_good_path: str | None = None):
        super().__init__(message)
        self.last_good_path = last_good_path
