"""Command line for the PPNet phoneme recognition pipeline.

Exit codes: 0 success, 1 quality/check failure, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ppnet.audio_io import read_wav
from ppnet.config import RunConfig, load_config
from ppnet.datagen import Manifest, build_synth_dataset
from ppnet.errors import AudioFormatError, ConfigError, PpnetError, ShapeMismatch, TensorFormatError
from ppnet.model import PpnetConfig, build_ppnet, config_from_state, evaluate, predict, stratified_split_indices, train
from ppnet.pipeline import featurize_clip, featurize_manifest, load_feature_set
from ppnet.tensorio import read_checkpoint, write_checkpoint

log = logging.getLogger("ppnet")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    manifest = build_synth_dataset(args.out, args.consonants, args.vowels, args.per_pair, args.seed)
    print(f"wrote {len(manifest)} clips and {Path(args.out) / 'manifest.jsonl'}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _config(args.config)
    manifest = Manifest.read(args.manifest)
    reference = read_wav(args.anc_reference) if args.anc_reference else None
    if reference is None and cfg.anc.enabled:
        raise ConfigError("anc.enabled requires --anc-reference")
    report = featurize_manifest(manifest, args.out, cfg, args.consonants, args.vowels, reference)
    print(f"wrote {report.written} feature files to {args.out}")
    if report.failures:
        print(f"{len(report.failures)} clip(s) failed:", file=sys.stderr)
        for path, reason in report.failures:
            print(f"  {path}: {reason}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _sidecar(checkpoint: Path, configured: str | None, suffix: str) -> Path:
    return Path(configured) if configured else checkpoint.with_name(checkpoint.stem + suffix)


def cmd_train(args) -> int:
    cfg = _config(args.config)
    model_cfg = cfg.model
    if args.seed is not None:
        model_cfg.seed = args.seed
    features = args.features or cfg.paths.features
    checkpoint = args.checkpoint or cfg.paths.checkpoint
    if not features or not checkpoint:
        raise ConfigError("--features and --checkpoint are required (or set paths.* in the config)")
    data = load_feature_set(features)
    if data.num_classes != model_cfg.num_classes:
        raise ConfigError(f"features define {data.num_classes} classes, model.num_classes is {model_cfg.num_classes}")
    train_idx, test_idx = stratified_split_indices(data.labels, model_cfg.seed)
    net = build_ppnet(model_cfg)
    started = time.time()
    history = train(net, data.subset(train_idx), model_cfg)
    checkpoint = Path(checkpoint)
    write_checkpoint(checkpoint, net.state_dict())
    split = {"seed": model_cfg.seed, "features": str(features), "train": [data.ids[i] for i in train_idx], "test": [data.ids[i] for i in test_idx]}
    _write_json(_sidecar(checkpoint, cfg.paths.split, ".split.json"), split)
    _write_json(_sidecar(checkpoint, cfg.paths.history, ".history.json"), {**history.to_dict(), "config": model_cfg.to_dict()})
    final = history.accuracy[-1] if history.accuracy else float("nan")
    print(f"trained {model_cfg.epochs} epochs in {time.time() - started:.1f}s; final train accuracy {final:.4f}")
    return EXIT_OK


def _load_net(path):
    state = read_checkpoint(path)
    try:
        net = build_ppnet(config_from_state(state))
        net.load_state_dict(state)
    except (KeyError, ShapeMismatch) as exc:
        raise TensorFormatError(f"{path}: not a PPNet checkpoint ({exc})") from exc
    return net


def cmd_eval(args) -> int:
    net = _load_net(args.checkpoint)
    data = load_feature_set(args.features)
    split = json.loads(Path(args.split).read_text(encoding="utf-8"))
    position = {name: i for i, name in enumerate(data.ids)}
    missing = [name for name in split["test"] if name not in position]
    if missing:
        raise ConfigError(f"{len(missing)} test item(s) not found in {args.features}")
    test = data.subset([position[name] for name in split["test"]])
    report = evaluate(net, test)
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _gradcheck_cases(rng):
    from ppnet.nn import BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool, ReLU, SoftmaxCrossEntropy

    return [
        (Conv2D("conv2d", 4), (2, 6, 7, 3)),
        (Conv2D("conv2d_relu", 4, relu=True), (2, 6, 7, 3)),
        (BatchNorm("batch_normalization"), (3, 5, 4, 2)),
        (ReLU("activation"), (2, 5, 4, 3)),
        (Dropout("dropout", 0.0), (2, 5, 4, 3)),
        (MaxPool("max_pooling2d"), (2, 5, 7, 3)),
        (Flatten("flatten"), (2, 3, 4, 2)),
        (Dense("dense", 5), (3, 7)),
        (Dense("dense_relu", 5, relu=True), (3, 7)),
        (SoftmaxCrossEntropy("softmax"), (4, 6)),
    ]


def cmd_gradcheck(args) -> int:
    from ppnet.nn import gradient_check, layer_gradient_check

    rng = np.random.default_rng(args.seed)
    tol = args.tolerance
    failed = []
    for layer, shape in _gradcheck_cases(rng):
        layer.build(shape[1:], rng, np.float64)
        result = layer_gradient_check(layer, rng.standard_normal(shape), eps=args.eps, seed=args.seed)
        status = "ok" if result.max_rel_error < tol else "FAIL"
        print(f"{layer.name:<22} {type(layer).__name__:<20} max rel err {result.max_rel_error:.3e}  {status}")
        if status != "ok":
            failed.append(layer.name)
    if args.full:
        started = time.time()
        net = build_ppnet(PpnetConfig(conv_dropout=0.0, dense_dropout=0.0, seed=args.seed), dtype=np.float64)
        x = rng.standard_normal((2, *net.input_shape))
        y = rng.integers(0, net.output_shape[0], size=2)
        result = gradient_check(net, x, y, eps=args.full_eps, seed=args.seed)
        for name, err in result.per_tensor.items():
            status = "ok" if err < tol else "FAIL"
            redrawn = result.skipped.get(name, 0)
            print(f"ppnet {name:<32} max rel err {err:.3e}  ({result.checked[name]} checked, {redrawn} redrawn)  {status}")
            if status != "ok":
                failed.append(f"ppnet {name}")
        print(f"full PPNet check: {time.time() - started:.1f}s")
    if failed:
        print("gradient check failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args.config)
    net = _load_net(args.checkpoint)
    names_path = Path(args.classes) if args.classes else None
    names = json.loads(names_path.read_text(encoding="utf-8")) if names_path else None
    reference = read_wav(args.anc_reference) if args.anc_reference else None
    feats = featurize_clip(read_wav(args.wav), cfg, reference)
    for kind in ("consonant", "vowel", "silence"):
        probs, label = predict(net, feats[kind])
        top = np.argsort(-probs, kind="stable")[:3]
        shown = ", ".join(f"{i}{'' if names is None else ' ' + names[i]}: {probs[i]:.3f}" for i in top)
        print(f"{kind:<10} -> {label}  [{shown}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic CV corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--consonants", type=int, default=22)
    s.add_argument("--vowels", type=int, default=6)
    s.add_argument("--per-pair", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("featurize", help="segment clips and write 100x150 feature tensors")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--anc-reference")
    s.add_argument("--consonants", type=int, default=23, help="consonant classes in the label layout")
    s.add_argument("--vowels", type=int, default=6)
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; featurization is deterministic")
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", help="split, train PPNet and write a checkpoint")
    s.add_argument("--features")
    s.add_argument("--config")
    s.add_argument("--checkpoint")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint on a split's test items")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--json", help="also write the report as JSON")
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; evaluation is deterministic")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    s.add_argument("--full", action="store_true", help="also check the whole PPNet stack (about 2 minutes on one core)")
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--full-eps", type=float, default=1e-6)
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("predict", help="classify the three segments of one clip")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--wav", required=True)
    s.add_argument("--config")
    s.add_argument("--classes", help="classes.json from a feature directory, for readable labels")
    s.add_argument("--anc-reference")
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; inference is deterministic")
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, AudioFormatError, TensorFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PpnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
