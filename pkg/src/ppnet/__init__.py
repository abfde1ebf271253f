"""Persian phoneme recognition pipeline: CV clip segmentation, STFT features, PPNet."""

from ppnet.audio_io import AudioClip, read_wav, write_wav
from ppnet.segmentation import extract_segments, intensity_envelope, detect_vowel_region
from ppnet.spectrogram import StftConfig, FeatureMatrix, featurize, stft_magnitudes, aggregate_ranges
from ppnet.noise_cancel import AncConfig, nlms_cancel
from ppnet.model import PpnetConfig, build_ppnet, stratified_split, train, evaluate, predict

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "read_wav",
    "write_wav",
    "extract_segments",
    "intensity_envelope",
    "detect_vowel_region",
    "StftConfig",
    "FeatureMatrix",
    "featurize",
    "stft_magnitudes",
    "aggregate_ranges",
    "AncConfig",
    "nlms_cancel",
    "PpnetConfig",
    "build_ppnet",
    "stratified_split",
    "train",
    "evaluate",
    "predict",
]
