"""Exception hierarchy shared by all hiertrack modules."""


class HiertrackError(Exception):
    """Base class for all package errors."""


class InputError(HiertrackError):
    """Bad user input (files, scenes, parameters). CLI exit code 2."""


class SchemaError(HiertrackError):
    """Malformed or incompatible interchange data. CLI exit code 3."""


class EmptyMask(InputError):
    """Operation requires at least one foreground pixel."""


class DimensionMismatch(InputError):
    """Masks with different width/height cannot be combined."""


class EmptyContour(InputError):
    """Hausdorff distance needs non-empty contours on both sides."""


class NotInitialized(HiertrackError):
    """Kalman filter used before initialization on the prompt frame."""


class NoProposals(InputError):
    """A frame arrived without any proposal to score."""


class WeightViolation(InputError):
    """Score weights must satisfy alpha, beta >= 0 and alpha + beta <= 1."""


class TrackSourceFailure(HiertrackError):
    """Point propagation failed; caller falls back to coarse-only scoring."""


class InvalidScene(InputError):
    """Scene description violates the synthetic-world constraints."""


class MissingPrompt(InputError):
    """Tracking input lacks a first-frame ground-truth mask."""


class SchemaVersionMismatch(SchemaError):
    """Interchange stream written with an unsupported schema version."""


class EmptySequence(InputError):
    """Metrics need at least one frame."""


class EmptyGrid(InputError):
    """Parameter sweep called with no grid points."""


class LengthMismatch(InputError):
    """Prediction and ground-truth streams cover different frame sets."""


class FrameIndexGap(InputError):
    """Frame indices in an evaluation stream are not contiguous."""


class IOFailure(InputError):
    """Reading or writing an interchange file failed."""
