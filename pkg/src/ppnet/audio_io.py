"""Mono PCM16 WAV reading/writing and the in-memory ``AudioClip``."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ppnet.errors import CorruptHeader, UnsupportedFormat

PCM_SCALE = 32768.0
_WAVE_FORMAT_PCM = 1


@dataclass(frozen=True)
class AudioClip:
    """Immutable mono signal with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if isinstance(self.sample_rate, bool) or int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise ValueError("samples must lie within [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate)


def _parse_chunks(data: bytes):
    if len(data) < 12:
        raise CorruptHeader("file shorter than a RIFF header")
    riff, riff_size, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise CorruptHeader("missing RIFF/WAVE signature")
    # Never trust riff_size beyond what the file actually holds.
    end = min(len(data), 8 + riff_size)
    pos = 12
    while pos + 8 <= end:
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if body + size > end:
            raise CorruptHeader(f"chunk {chunk_id!r} declares {size} bytes past end of file")
        yield chunk_id, data[body : body + size]
        pos = body + size + (size & 1)


def read_wav(path) -> AudioClip:
    """Read a RIFF/WAVE PCM 16-bit mono file.

    Integer sample ``v`` maps to ``v / 32768``. Raises ``FileNotFoundError``,
    ``UnsupportedFormat`` or ``CorruptHeader``.
    """
    data = Path(path).read_bytes()
    fmt = None
    pcm = None
    for chunk_id, body in _parse_chunks(data):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data" and pcm is None:
            pcm = body
    if fmt is None:
        raise CorruptHeader("no fmt chunk")
    if pcm is None:
        raise CorruptHeader("no data chunk")
    audio_format, channels, sample_rate, _, block_align, bits = fmt
    if audio_format != _WAVE_FORMAT_PCM:
        raise UnsupportedFormat(f"format tag {audio_format:#x} is not integer PCM")
    if channels != 1:
        raise UnsupportedFormat(f"{channels} channels; only mono is supported")
    if bits != 16:
        raise UnsupportedFormat(f"{bits}-bit samples; only 16-bit is supported")
    if block_align != 2 or sample_rate == 0:
        raise CorruptHeader("inconsistent fmt chunk")
    if len(pcm) % 2:
        raise CorruptHeader("data chunk holds a partial sample")
    ints = np.frombuffer(pcm, dtype="<i2")
    return AudioClip(ints.astype(np.float64) / PCM_SCALE, sample_rate)


def write_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as PCM16 mono; amplitudes are rounded to the nearest step."""
    ints = np.clip(np.rint(clip.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_PCM,
        1,
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
