"""Clip -> (optional ANC) -> segments -> feature files, and feature-set loading."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ppnet.audio_io import AudioClip, read_wav
from ppnet.config import RunConfig
from ppnet.datagen import Manifest
from ppnet.errors import ConfigError, LengthMismatch, PpnetError
from ppnet.model import LabeledDataset
from ppnet.noise_cancel import nlms_cancel
from ppnet.phonemes import class_names, consonant_label, silence_label, vowel_label
from ppnet.segmentation import SegmentSet, extract_segments
from ppnet.spectrogram import FeatureMatrix, featurize
from ppnet.tensorio import read_tensor, write_tensor

log = logging.getLogger(__name__)

FEATURE_MANIFEST = "features.jsonl"
CLASSES_FILE = "classes.json"


def denoise(clip: AudioClip, reference: AudioClip, cfg: RunConfig) -> AudioClip:
    if len(reference) != len(clip):
        raise LengthMismatch(f"reference has {len(reference)} samples, clip has {len(clip)}")
    cleaned = nlms_cancel(clip.samples, reference.samples, cfg.anc.to_config())
    return AudioClip(np.clip(cleaned, -1.0, 1.0), clip.sample_rate)


def segment_clip(clip: AudioClip, cfg: RunConfig, reference: AudioClip | None = None) -> SegmentSet:
    if clip.sample_rate != cfg.audio.sample_rate:
        raise ConfigError(f"clip sampled at {clip.sample_rate} Hz, config expects {cfg.audio.sample_rate} Hz")
    if reference is not None:
        clip = denoise(clip, reference, cfg)
    s = cfg.segmentation
    return extract_segments(clip, s.ratio, s.frame_ms, s.hop_ms, s.segment_ms)


def featurize_clip(clip: AudioClip, cfg: RunConfig, reference: AudioClip | None = None) -> dict[str, FeatureMatrix]:
    stft = cfg.stft_config()
    return {seg.kind: featurize(seg, stft) for seg in segment_clip(clip, cfg, reference)}


@dataclass
class FeaturizeReport:
    written: int
    failures: list[tuple[str, str]]


def featurize_manifest(
    manifest: Manifest,
    out_dir,
    cfg: RunConfig | None = None,
    n_consonants: int = 23,
    n_vowels: int = 6,
    reference: AudioClip | None = None,
) -> FeaturizeReport:
    """Write three PPNT feature files per clip plus ``features.jsonl``/``classes.json``."""
    cfg = cfg or RunConfig()
    names = class_names(n_consonants, n_vowels)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, failures = [], []
    for entry in manifest:
        src = manifest.resolve(entry)
        if entry.consonant >= n_consonants or entry.vowel >= n_vowels:
            failures.append((entry.path, "class index outside the configured inventory"))
            continue
        try:
            feats = featurize_clip(read_wav(src), cfg, reference)
        except (PpnetError, OSError) as exc:
            log.warning("%s: %s", entry.path, exc)
            failures.append((entry.path, f"{type(exc).__name__}: {exc}"))
            continue
        labels = {
            "consonant": consonant_label(entry.consonant),
            "vowel": vowel_label(entry.vowel, n_consonants),
            "silence": silence_label(n_consonants, n_vowels),
        }
        stem = Path(entry.path).with_suffix("").as_posix().replace("/", "__")
        for kind in ("consonant", "vowel", "silence"):
            name = f"{stem}_{kind}.ppnt"
            write_tensor(out / name, feats[kind].values)
            rows.append({"path": name, "label": labels[kind], "kind": kind, "source": entry.path, "speaker": entry.speaker})
    with open(out / FEATURE_MANIFEST, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    (out / CLASSES_FILE).write_text(json.dumps(names, ensure_ascii=False) + "\n", encoding="utf-8")
    return FeaturizeReport(len(rows), failures)


def load_feature_set(features_dir) -> LabeledDataset:
    root = Path(features_dir)
    names = json.loads((root / CLASSES_FILE).read_text(encoding="utf-8"))
    feats, labels, speakers, ids = [], [], [], []
    with open(root / FEATURE_MANIFEST, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            feats.append(read_tensor(root / row["path"]))
            labels.append(int(row["label"]))
            speakers.append(str(row.get("speaker", "")))
            ids.append(row["path"])
    shape = feats[0].shape if feats else (0, 0)
    stacked = np.stack(feats) if feats else np.zeros((0, *shape), dtype=np.float32)
    return LabeledDataset(stacked, np.array(labels, dtype=np.int64), names, np.array(speakers), ids)
