"""Vowel localisation by relative intensity and 50 ms phoneme windowing.

A CV clip is silence, a low-energy consonant, a loud vowel, then silence.
Frames whose RMS exceeds ``ratio * max`` mark the vowel; the consonant is
taken as the 50 ms just before the vowel onset and the silence sample is
the clip's final 50 ms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ppnet.audio_io import AudioClip
from ppnet.errors import ClipTooShort, NoSilenceTail, NoVowelFound, VowelTooEarly, VowelTooShort

DEFAULT_RATIO = 0.25
SEGMENT_MS = 50.0

Kind = Literal["consonant", "vowel", "silence"]


def _ms_to_samples(ms: float, sample_rate: int) -> int:
    return int(round(ms * sample_rate / 1000.0))


@dataclass(frozen=True)
class Envelope:
    values: np.ndarray
    frame_ms: float
    hop_ms: float
    sample_rate: int

    @property
    def frame_len(self) -> int:
        return _ms_to_samples(self.frame_ms, self.sample_rate)

    @property
    def hop_len(self) -> int:
        return _ms_to_samples(self.hop_ms, self.sample_rate)

    def frame_start(self, i: int) -> int:
        return i * self.hop_len

    def frame_stop(self, i: int) -> int:
        return i * self.hop_len + self.frame_len


@dataclass(frozen=True)
class PhonemeSegment:
    samples: np.ndarray
    kind: Kind
    source_offset: float
    sample_rate: int
    label: int | None = None

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SegmentSet:
    consonant: PhonemeSegment
    vowel: PhonemeSegment
    silence: PhonemeSegment
    onset_s: float
    offset_s: float

    def __iter__(self):
        return iter((self.consonant, self.vowel, self.silence))


def intensity_envelope(clip: AudioClip, frame_ms: float = 5.0, hop_ms: float = 1.0) -> Envelope:
    """Per-frame RMS; frame ``i`` covers samples ``[i*hop, i*hop + frame)``."""
    frame = _ms_to_samples(frame_ms, clip.sample_rate)
    hop = _ms_to_samples(hop_ms, clip.sample_rate)
    if frame < 1 or hop < 1:
        raise ValueError("frame and hop must each span at least one sample")
    if len(clip) < frame:
        raise ClipTooShort(f"clip has {len(clip)} samples, frame needs {frame}")
    windows = sliding_window_view(clip.samples, frame)[::hop]
    values = np.sqrt(np.einsum("ij,ij->i", windows, windows) / frame)
    values.setflags(write=False)
    return Envelope(values, frame_ms, hop_ms, clip.sample_rate)


def vowel_run(values, ratio: float = DEFAULT_RATIO) -> tuple[int, int]:
    """Frame span ``[start, stop)`` of the longest run strictly above ``ratio * max``.

    Ties go to the earliest run.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise NoVowelFound("empty envelope")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    peak = values.max()
    above = values > ratio * peak
    if peak <= 0.0 or not above.any():
        raise NoVowelFound("no frame exceeds the intensity threshold")
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    best = int(np.argmax(stops - starts))  # argmax returns the first maximum
    return int(starts[best]), int(stops[best])


def detect_vowel_region(env: Envelope, ratio: float = DEFAULT_RATIO) -> tuple[float, float]:
    """Vowel ``(onset_s, offset_s)``: start of the run's first frame to end of its last."""
    start, stop = vowel_run(env.values, ratio)
    sr = env.sample_rate
    return env.frame_start(start) / sr, env.frame_stop(stop - 1) / sr


def extract_segments(
    clip: AudioClip,
    ratio: float = DEFAULT_RATIO,
    frame_ms: float = 5.0,
    hop_ms: float = 1.0,
    segment_ms: float = SEGMENT_MS,
) -> SegmentSet:
    """Cut the consonant, vowel and silence windows out of a CV clip."""
    env = intensity_envelope(clip, frame_ms, hop_ms)
    start, stop = vowel_run(env.values, ratio)
    sr = clip.sample_rate
    seg = _ms_to_samples(segment_ms, sr)
    onset = env.frame_start(start)
    offset = env.frame_stop(stop - 1)
    if onset < seg:
        raise VowelTooEarly(f"vowel onset at {onset / sr:.3f} s leaves no room for a consonant window")
    if offset - onset < seg:
        raise VowelTooShort(f"supra-threshold run lasts {(offset - onset) / sr * 1000:.1f} ms")
    n = len(clip)
    tail_frames = env.values[np.arange(env.values.size) * env.hop_len >= n - seg]
    threshold = ratio * env.values.max()
    if tail_frames.size == 0 or np.any(tail_frames > threshold):
        raise NoSilenceTail("final window is not below the intensity threshold")

    x = clip.samples

    def cut(begin: int, kind: Kind) -> PhonemeSegment:
        return PhonemeSegment(x[begin : begin + seg], kind, begin / sr, sr)

    return SegmentSet(
        consonant=cut(onset - seg, "consonant"),
        vowel=cut(onset, "vowel"),
        silence=cut(n - seg, "silence"),
        onset_s=onset / sr,
        offset_s=offset / sr,
    )
