"""Synthetic consonant-vowel corpus and a PCVC-style directory loader.

Clips follow the PCVC layout: 2 s at 48 kHz, leading silence, a noise-burst
consonant, a formant-synthesised vowel (impulse train through three cascaded
second-order resonators), then at least 0.25 s of trailing silence.
"""

from __future__ import annotations

import json
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import signal

from ppnet.audio_io import AudioClip, write_wav
from ppnet.errors import ConfigError, PatternMismatch

log = logging.getLogger(__name__)

DEFAULT_PCVC_PATTERN = r"(?:s(?P<speaker>\w+?)_)?c(?P<consonant>\d+)_v(?P<vowel>\d+)\.wav$"


class DirNotFound(FileNotFoundError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    sample_rate: int
    duration_s: float
    seed: int
    formant_bandwidths_hz: tuple
    vowels: tuple  # ({"name", "formants_hz"}, ...)
    consonants: tuple  # ({"name", "center_hz", "bandwidth_hz", "duration_ms", "voiced"}, ...)
    pitch_hz: tuple
    formant_scale: tuple
    formant_jitter: float
    vowel_duration_s: tuple
    vowel_onset_s: tuple
    vowel_rms: tuple
    consonant_level: float
    noise_floor_rms: float
    attack_ms: float
    release_ms: float

    def __post_init__(self):
        nyq = self.sample_rate / 2
        top = max(self.formant_scale) * (1 + self.formant_jitter)
        for v in self.vowels:
            if max(v["formants_hz"]) * top >= nyq:
                raise ConfigError(f"vowel {v['name']} formants reach Nyquist")
        for c in self.consonants:
            if c["center_hz"] + c["bandwidth_hz"] / 2 >= nyq or c["duration_ms"] <= 0:
                raise ConfigError(f"consonant {c['name']} profile invalid")
        longest = max(c["duration_ms"] for c in self.consonants) / 1000
        release = self.release_ms / 1000
        if self.vowel_onset_s[0] - longest < 0.25:
            raise ConfigError("leading silence would be shorter than 0.25 s")
        if self.duration_s - (self.vowel_onset_s[1] + self.vowel_duration_s[1] + release) < 0.25:
            raise ConfigError("trailing silence would be shorter than 0.25 s")
        if self.consonant_level >= 0.25:
            raise ConfigError("consonant level must stay below the vowel detection ratio")

    @classmethod
    def default(cls) -> "SynthSpec":
        text = resources.files("ppnet").joinpath("data/synth_spec.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        for key in ("formant_bandwidths_hz", "pitch_hz", "formant_scale", "vowel_duration_s", "vowel_onset_s", "vowel_rms"):
            d[key] = tuple(d[key])
        d["vowels"] = tuple(d["vowels"])
        d["consonants"] = tuple(d["consonants"])
        return cls(**d)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate))


@dataclass(frozen=True)
class SynthLayout:
    """Ground truth for one generated clip (seconds)."""

    consonant_start: float
    vowel_onset: float
    vowel_end: float
    pitch_hz: float


def _resonator(x, freq, bw, fs):
    r = np.exp(-np.pi * bw / fs)
    theta = 2 * np.pi * freq / fs
    a = [1.0, -2 * r * np.cos(theta), r * r]
    # unity gain at the centre frequency
    z = np.exp(-1j * theta)
    gain = abs(a[0] + a[1] * z + a[2] * z * z)
    return signal.lfilter([gain], a, x)


def _envelope(n, attack, release):
    env = np.ones(n)
    a = min(attack, n // 2)
    r = min(release, n - a)
    if a:
        env[:a] = 0.5 - 0.5 * np.cos(np.pi * np.arange(a) / a)
    if r:
        env[n - r :] = 0.5 + 0.5 * np.cos(np.pi * (np.arange(r) + 1) / r)
    return env


def _rms(x):
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def _speaker_traits(spec: SynthSpec, seed: int, speaker: int):
    rng = np.random.default_rng([seed, 7919, speaker])
    return rng.uniform(*spec.pitch_hz), rng.uniform(*spec.formant_scale)


def render_cv(consonant: int, vowel: int, spec: SynthSpec | None = None, seed: int | None = None, speaker: int = 0, take: int = 0):
    """Generate one CV clip and its ground-truth layout."""
    spec = spec or SynthSpec.default()
    if not 0 <= consonant < len(spec.consonants) or not 0 <= vowel < len(spec.vowels):
        raise ConfigError(f"class pair ({consonant}, {vowel}) outside the inventory")
    seed = spec.seed if seed is None else seed
    fs = spec.sample_rate
    n = spec.n_samples
    pitch, scale = _speaker_traits(spec, seed, speaker)
    rng = np.random.default_rng([seed, speaker, consonant, vowel, take])

    prof = spec.consonants[consonant]
    formants = np.asarray(spec.vowels[vowel]["formants_hz"], dtype=np.float64)
    formants = formants * scale * (1 + rng.uniform(-spec.formant_jitter, spec.formant_jitter, 3))
    pitch *= 1 + rng.uniform(-0.04, 0.04)
    onset = int(round(rng.uniform(*spec.vowel_onset_s) * fs))
    v_len = int(round(rng.uniform(*spec.vowel_duration_s) * fs))
    c_len = int(round(prof["duration_ms"] * (1 + rng.uniform(-0.1, 0.1)) * fs / 1000))
    vowel_rms = rng.uniform(*spec.vowel_rms)
    release = int(round(spec.release_ms * fs / 1000))

    # vowel: jittered impulse train -> cascaded formant resonators
    total = v_len + release
    src = np.zeros(total)
    period = fs / pitch
    t = rng.uniform(0, period)
    while t < total:
        src[int(t)] = 1.0
        t += period * (1 + rng.normal(0, 0.005))
    v = src
    for f, bw in zip(formants, spec.formant_bandwidths_hz):
        v = _resonator(v, f, bw, fs)
    v = v - v.mean()
    v *= _envelope(total, int(round(spec.attack_ms * fs / 1000)), release)
    v *= vowel_rms / _rms(v[:v_len])

    # consonant: band-limited noise burst (plus a low buzz when voiced)
    lo = max(prof["center_hz"] - prof["bandwidth_hz"] / 2, 60.0)
    hi = min(prof["center_hz"] + prof["bandwidth_hz"] / 2, fs / 2 - 100)
    sos = signal.butter(2, [lo, hi], btype="bandpass", fs=fs, output="sos")
    pad = 2048
    burst = signal.sosfilt(sos, rng.standard_normal(c_len + pad))[pad:]
    if prof["voiced"]:
        buzz = np.zeros(c_len)
        buzz[(np.arange(0, c_len, period)).astype(int)] = 1.0
        buzz = _resonator(buzz, 250.0, 100.0, fs)
        burst = burst / _rms(burst) + 0.5 * buzz / max(_rms(buzz), 1e-12)
    burst *= _envelope(c_len, int(0.003 * fs), int(0.005 * fs))
    burst *= spec.consonant_level * vowel_rms / _rms(burst)

    x = rng.normal(0, spec.noise_floor_rms, n)
    c_start = onset - c_len
    x[c_start:onset] += burst
    x[onset : onset + total] += v
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x *= 0.95 / peak
    layout = SynthLayout(c_start / fs, onset / fs, (onset + v_len) / fs, pitch)
    return AudioClip(x, fs), layout


def synth_cv_clip(consonant: int, vowel: int, spec: SynthSpec | None = None, seed: int | None = None, speaker: int = 0) -> AudioClip:
    """Deterministic 2 s CV clip for the given classes and seed."""
    return render_cv(consonant, vowel, spec, seed, speaker)[0]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    consonant: int
    vowel: int
    speaker: str


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def write(self, path) -> None:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for e in self.entries:
                row = {"path": e.path, "consonant": e.consonant, "vowel": e.vowel, "speaker": e.speaker}
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "Manifest":
        path = Path(path)
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    entries.append(ManifestEntry(str(row["path"]), int(row["consonant"]), int(row["vowel"]), str(row["speaker"])))
                except (ValueError, KeyError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad manifest row ({exc})") from exc
        return cls(entries, path.parent)

    def speaker_counts(self) -> dict[str, int]:
        return dict(Counter(e.speaker for e in self.entries))


def build_synth_dataset(out_dir, n_consonants: int = 22, n_vowels: int = 6, samples_per_pair: int = 1, seed: int = 0, spec: SynthSpec | None = None) -> Manifest:
    """Write ``n_consonants * n_vowels * samples_per_pair`` clips and ``manifest.jsonl``.

    Take ``k`` of every pair is voiced by synthetic speaker ``k``, mirroring
    PCVC where each speaker records every combination once.
    """
    spec = spec or SynthSpec.default()
    for name, value in (("n_consonants", n_consonants), ("n_vowels", n_vowels), ("samples_per_pair", samples_per_pair)):
        if int(value) != value or value < 1:
            raise ConfigError(f"{name} must be a positive integer, got {value}")
    if n_consonants > len(spec.consonants) or n_vowels > len(spec.vowels):
        raise ConfigError(f"inventory has {len(spec.consonants)} consonants and {len(spec.vowels)} vowels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(root=out)
    for k in range(samples_per_pair):
        for c in range(n_consonants):
            for v in range(n_vowels):
                name = f"s{k:02d}_c{c:02d}_v{v:02d}.wav"
                clip, _ = render_cv(c, v, spec, seed, speaker=k)
                write_wav(clip, out / name)
                manifest.entries.append(ManifestEntry(name, c, v, f"{k:02d}"))
    manifest.write(out / "manifest.jsonl")
    return manifest


def load_pcvc(root, pattern: str = DEFAULT_PCVC_PATTERN) -> Manifest:
    """Index WAV files under ``root`` whose names match ``pattern``.

    The pattern needs ``consonant`` and ``vowel`` groups; without a
    ``speaker`` group the parent directory name is used. Non-matching files
    are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise DirNotFound(f"{root} is not a directory")
    regex = re.compile(pattern)
    manifest = Manifest(root=root)
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix.lower() != ".wav":
            continue
        m = regex.search(path.name)
        if m is None:
            warnings.warn(str(PatternMismatch(f"skipping {path.relative_to(root)}: name does not match {pattern!r}")))
            continue
        groups = m.groupdict()
        speaker = groups.get("speaker") or path.parent.name
        manifest.entries.append(
            ManifestEntry(path.relative_to(root).as_posix(), int(groups["consonant"]), int(groups["vowel"]), str(speaker))
        )
    for speaker, count in sorted(manifest.speaker_counts().items()):
        log.info("speaker %s: %d clips", speaker, count)
    return manifest
