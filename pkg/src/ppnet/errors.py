"""Exception hierarchy shared by every stage of the pipeline."""


class PpnetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PpnetError, ValueError):
    """Invalid configuration or parameter values (CLI exit code 2)."""


# audio-io
class AudioFormatError(PpnetError):
    pass


class UnsupportedFormat(AudioFormatError):
    pass


class CorruptHeader(AudioFormatError):
    pass


# segmentation
class SegmentationError(PpnetError):
    pass


class ClipTooShort(SegmentationError):
    pass


class NoVowelFound(SegmentationError):
    pass


class VowelTooEarly(SegmentationError):
    pass


class VowelTooShort(SegmentationError):
    pass


class NoSilenceTail(SegmentationError):
    pass


# noise-cancel
class LengthMismatch(PpnetError, ValueError):
    pass


# spectrogram
class SegmentTooShort(PpnetError, ValueError):
    pass


class TooManyRanges(PpnetError, ValueError):
    pass


# nn-core / model
class GeometryError(PpnetError, ValueError):
    pass


class ShapeMismatch(PpnetError, ValueError):
    pass


class StaleForward(PpnetError, RuntimeError):
    pass


class NondeterministicNetwork(PpnetError, RuntimeError):
    pass


class NameMismatch(PpnetError, KeyError):
    pass


class InsufficientClass(PpnetError, ValueError):
    pass


class EmptyDataset(PpnetError, ValueError):
    pass


# datagen / files
class PatternMismatch(PpnetError):
    pass


class TensorFormatError(PpnetError):
    pass
