"""Strict JSON run configuration; defaults are the pipeline's standard values."""

from __future__ import annotations

import json
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

from ppnet.errors import ConfigError
from ppnet.model import PpnetConfig
from ppnet.noise_cancel import AncConfig
from ppnet.spectrogram import StftConfig


@dataclass
class AudioSection:
    sample_rate: int = 48000


@dataclass
class SegmentationSection:
    ratio: float = 0.25
    frame_ms: float = 5.0
    hop_ms: float = 1.0
    segment_ms: float = 50.0

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ConfigError("segmentation.ratio must lie in (0, 1)")


@dataclass
class AncSection:
    enabled: bool = False
    taps: int = 32
    step: float = 0.1
    regularizer: float = 1e-6

    def to_config(self) -> AncConfig:
        return AncConfig(self.taps, self.step, self.regularizer)


@dataclass
class StftSection:
    window_ms: float = 5.0
    hop_ms: float = 0.5
    fft_size: int = 512
    n_ranges: int = 150
    n_frames: int = 100


@dataclass
class PathsSection:
    features: str | None = None
    checkpoint: str | None = None
    split: str | None = None
    history: str | None = None


@dataclass
class RunConfig:
    audio: AudioSection = field(default_factory=AudioSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    anc: AncSection = field(default_factory=AncSection)
    stft: StftSection = field(default_factory=StftSection)
    model: PpnetConfig = field(default_factory=PpnetConfig)
    paths: PathsSection = field(default_factory=PathsSection)

    def stft_config(self) -> StftConfig:
        return StftConfig(sample_rate=self.audio.sample_rate, **asdict(self.stft))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        default = f.default if f.default is not MISSING else f.default_factory()
        if default is not None and not isinstance(value, type(default)):
            ok_number = isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool)
            ok_seq = isinstance(default, tuple) and isinstance(value, list)
            if not (ok_number or ok_seq):
                raise ConfigError(f"{where}.{name}: expected {type(default).__name__}, got {type(value).__name__}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_SECTIONS = {
    "audio": AudioSection,
    "segmentation": SegmentationSection,
    "anc": AncSection,
    "stft": StftSection,
    "model": PpnetConfig,
    "paths": PathsSection,
}


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    return RunConfig(**{k: _build(_SECTIONS[k], v, k) for k, v in data.items()})


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
