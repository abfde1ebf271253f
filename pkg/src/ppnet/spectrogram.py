"""STFT magnitudes aggregated into equal-width frequency ranges.

A 50 ms segment at 48 kHz becomes a ``n_frames x n_ranges`` (100 x 150)
matrix: 5 ms Hann frames every 0.5 ms, a 512-point FFT, the 257 one-sided
bins averaged into 150 ranges, then ``log1p`` and per-matrix standardisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ppnet.errors import ConfigError, SegmentTooShort, TooManyRanges


@dataclass(frozen=True)
class StftConfig:
    window_ms: float = 5.0
    hop_ms: float = 0.5
    fft_size: int = 512
    n_ranges: int = 150
    n_frames: int = 100
    window_kind: str = "hann"
    sample_rate: int = 48000

    def __post_init__(self):
        if self.window_kind != "hann":
            raise ConfigError(f"unsupported window {self.window_kind!r}")
        if self.window_len < 1 or self.hop_len < 1:
            raise ConfigError("window and hop must span at least one sample")
        if self.fft_size < self.window_len:
            raise ConfigError(f"fft_size {self.fft_size} shorter than window {self.window_len}")
        if not 1 <= self.n_ranges <= self.n_bins:
            raise ConfigError(f"n_ranges must lie in [1, {self.n_bins}]")
        if self.n_frames < 1:
            raise ConfigError("n_frames must be >= 1")

    @property
    def window_len(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_len(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    mean: float = 0.0
    std: float = 1.0
    label: int | None = field(default=None, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(segment, cfg: StftConfig) -> np.ndarray:
    """Hann-windowed frames, shape ``(n_frames, window_len)``; the tail is zero-padded."""
    x = np.asarray(segment, dtype=np.float64).reshape(-1)
    win = cfg.window_len
    if x.size < win:
        raise SegmentTooShort(f"segment has {x.size} samples, window needs {win}")
    needed = (cfg.n_frames - 1) * cfg.hop_len + win
    if x.size < needed:
        x = np.concatenate((x, np.zeros(needed - x.size)))
    idx = np.arange(cfg.n_frames)[:, None] * cfg.hop_len + np.arange(win)[None, :]
    return x[idx] * hann_window(win)


def stft_magnitudes(segment, cfg: StftConfig | None = None) -> np.ndarray:
    """``|rfft|`` of every windowed frame zero-padded to ``fft_size``."""
    cfg = cfg or StftConfig()
    frames = frame_signal(segment, cfg)
    return np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1))


def range_index(n_bins: int, n_ranges: int) -> np.ndarray:
    """Range id of every bin: equal-width split of ``[0, n_bins)`` into ``n_ranges``."""
    if n_ranges > n_bins:
        raise TooManyRanges(f"{n_ranges} ranges requested from {n_bins} bins")
    if n_ranges < 1:
        raise ValueError("n_ranges must be >= 1")
    return (np.arange(n_bins) * n_ranges) // n_bins


def aggregate_ranges(mags, n_ranges: int) -> np.ndarray:
    """Mean magnitude per frequency range, shape ``(frames, n_ranges)``."""
    mags = np.asarray(mags, dtype=np.float64)
    idx = range_index(mags.shape[1], n_ranges)
    sums = np.zeros((mags.shape[0], n_ranges))
    np.add.at(sums.T, idx, mags.T)
    counts = np.bincount(idx, minlength=n_ranges)
    return sums / counts


def featurize(segment, cfg: StftConfig | None = None) -> FeatureMatrix:
    """Standardised ``log1p`` range magnitudes of a segment.

    Accepts a ``PhonemeSegment`` or a bare sample array. Near-constant
    matrices (std < 1e-12) come back as all zeros.
    """
    cfg = cfg or StftConfig()
    samples = getattr(segment, "samples", segment)
    rate = getattr(segment, "sample_rate", cfg.sample_rate)
    if rate != cfg.sample_rate:
        raise ConfigError(f"segment sampled at {rate} Hz, config expects {cfg.sample_rate} Hz")
    logmag = np.log1p(aggregate_ranges(stft_magnitudes(samples, cfg), cfg.n_ranges))
    mean = float(logmag.mean())
    std = float(logmag.std())
    if std < 1e-12:
        values = np.zeros_like(logmag)
    else:
        values = (logmag - mean) / std
    return FeatureMatrix(values, mean, std, getattr(segment, "label", None))
