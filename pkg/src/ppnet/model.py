"""PPNet assembly, stratified split, training loop, evaluation and inference."""

from __future__ import annotations

import logging
import warnings
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ppnet.errors import ConfigError, EmptyDataset, InsufficientClass, ShapeMismatch
from ppnet.metrics import MetricsReport
from ppnet.nn import Adam, BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool, Network, ReLU, SoftmaxCrossEntropy

log = logging.getLogger(__name__)

INPUT_SHAPE = (100, 150)


@dataclass
class PpnetConfig:
    num_classes: int = 30
    batch_size: int = 16
    epochs: int = 50
    conv_dropout: float = 0.25
    dense_dropout: float = 0.5
    dense_units: tuple[int, int] = (1024, 128)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_epsilon: float = 1e-3
    bn_momentum: float = 0.99
    seed: int = 0
    deterministic: bool = True
    input_shape: tuple[int, int] = INPUT_SHAPE

    def __post_init__(self):
        self.dense_units = tuple(int(u) for u in self.dense_units)
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if len(self.dense_units) != 2 or min(self.dense_units) < 1:
            raise ConfigError("dense_units must hold two positive widths")
        for rate in (self.conv_dropout, self.dense_dropout):
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"dropout rate {rate} outside [0, 1)")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dense_units"] = list(self.dense_units)
        d["input_shape"] = list(self.input_shape)
        return d


def build_ppnet(cfg: PpnetConfig | None = None, dtype=np.float32) -> Network:
    """The six-conv PPNet stack with Keras-style layer names."""
    cfg = cfg or PpnetConfig()
    cd, dd = cfg.conv_dropout, cfg.dense_dropout
    u1, u2 = cfg.dense_units
    layers = [
        Conv2D("conv2d_1", 32),
        BatchNorm("batch_normalization_1", cfg.bn_epsilon, cfg.bn_momentum),
        ReLU("activation_1"),
        Dropout("dropout_1", cd),
        Conv2D("conv2d_2", 32, relu=True),
        MaxPool("max_pooling2d_1"),
        Conv2D("conv2d_3", 64, relu=True),
        Dropout("dropout_2", cd),
        Conv2D("conv2d_4", 64, relu=True),
        MaxPool("max_pooling2d_2"),
        Conv2D("conv2d_5", 128, relu=True),
        Dropout("dropout_3", cd),
        Conv2D("conv2d_6", 128, relu=True),
        MaxPool("max_pooling2d_3"),
        Flatten("flatten_1"),
        Dropout("dropout_4", cd),
        Dense("dense_1", u1, relu=True),
        Dropout("dropout_5", dd),
        Dense("dense_2", u2, relu=True),
        Dropout("dropout_6", dd),
        Dense("dense_3", cfg.num_classes),
        SoftmaxCrossEntropy("softmax"),
    ]
    return Network(layers, (*cfg.input_shape, 1), seed=cfg.seed, dtype=dtype)


def config_from_state(state: dict[str, np.ndarray], **overrides) -> PpnetConfig:
    """Recover the architecture hyperparameters from checkpoint tensor shapes."""
    u1 = state["dense_1.weight"].shape[1]
    u2 = state["dense_2.weight"].shape[1]
    num_classes = state["dense_3.weight"].shape[1]
    return PpnetConfig(num_classes=num_classes, dense_units=(u1, u2), **overrides)


@dataclass
class LabeledDataset:
    features: np.ndarray  # (N, 100, 150)
    labels: np.ndarray
    class_names: list[str]
    speakers: np.ndarray | None = None
    ids: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 3 or self.features.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch(f"features {self.features.shape} do not match {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ConfigError("labels outside the class range")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            self.features[idx],
            self.labels[idx],
            self.class_names,
            None if self.speakers is None else np.asarray(self.speakers)[idx],
            None if self.ids is None else [self.ids[i] for i in idx],
        )


def split_counts(class_size: int, test_fraction=0.15, per_class_min=8, per_class_max=16) -> int:
    """Test items for a class: ``clamp(round(fraction * size), min, max)``, half rounding up."""
    return int(min(max(np.floor(test_fraction * class_size + 0.5), per_class_min), per_class_max))


def stratified_split_indices(
    labels, seed: int = 0, test_fraction: float = 0.15, per_class_min: int = 8, per_class_max: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size <= per_class_min:
            raise InsufficientClass(f"class {cls} has {members.size} items; needs more than {per_class_min}")
        k = split_counts(members.size, test_fraction, per_class_min, per_class_max)
        if members.size - k < k:
            warnings.warn(f"class {cls}: only {members.size - k} training items remain after taking {k} for test")
        test.append(rng.permutation(members)[:k])
    test_idx = np.sort(np.concatenate(test)) if test else np.array([], dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(labels.size), test_idx)
    return train_idx, test_idx


def stratified_split(data: LabeledDataset, seed: int = 0, test_fraction: float = 0.15, per_class_min: int = 8, per_class_max: int = 16):
    """Disjoint ``(train, test)`` with a clamped per-class test quota."""
    train_idx, test_idx = stratified_split_indices(data.labels, seed, test_fraction, per_class_min, per_class_max)
    return data.subset(train_idx), data.subset(test_idx)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"loss": self.loss, "accuracy": self.accuracy}


def _as_batch(features) -> np.ndarray:
    return np.asarray(features)[..., None]


def _limits(deterministic: bool):
    return threadpool_limits(limits=1) if deterministic else nullcontext()


def train(net: Network, train_set: LabeledDataset, cfg: PpnetConfig, on_epoch=None) -> TrainHistory:
    """Shuffled mini-batch Adam training; the last partial batch is kept."""
    if len(train_set) == 0:
        raise EmptyDataset("training set is empty")
    if train_set.features.shape[1:] != tuple(net.input_shape[:2]):
        raise ShapeMismatch(f"features {train_set.features.shape[1:]} vs network input {net.input_shape}")
    rng = np.random.default_rng([cfg.seed, 2])
    net.reseed(cfg.seed)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    history = TrainHistory()
    n = len(train_set)
    with _limits(cfg.deterministic):
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            total_loss, correct = 0.0, 0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                x = _as_batch(train_set.features[idx])
                y = train_set.labels[idx]
                probs = net.forward(x, train=True)
                total_loss += SoftmaxCrossEntropy.loss(probs, y) * len(idx)
                correct += int((probs.argmax(axis=1) == y).sum())
                opt.step(net.params, net.backward(y))
            history.loss.append(total_loss / n)
            history.accuracy.append(correct / n)
            log.info("epoch %d/%d loss %.4f acc %.4f", epoch + 1, cfg.epochs, history.loss[-1], history.accuracy[-1])
            if on_epoch is not None:
                on_epoch(epoch, history)
    return history


def predict_proba(net: Network, features, batch_size: int = 32) -> np.ndarray:
    features = np.asarray(features)
    out = [net.forward(_as_batch(features[i : i + batch_size])) for i in range(0, features.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros((0, net.output_shape[0]))


def evaluate(net: Network, test_set: LabeledDataset, batch_size: int = 32) -> MetricsReport:
    if len(test_set) == 0:
        raise EmptyDataset("test set is empty")
    preds = predict_proba(net, test_set.features, batch_size).argmax(axis=1)
    return MetricsReport.from_predictions(test_set.labels, preds, net.output_shape[0], test_set.class_names)


def predict(net: Network, features) -> tuple[np.ndarray, int]:
    """Class distribution and argmax label (lowest index wins ties) for one matrix."""
    values = np.asarray(getattr(features, "values", features))
    if values.shape != tuple(net.input_shape[:2]):
        raise ShapeMismatch(f"expected {net.input_shape[:2]}, got {values.shape}")
    probs = net.forward(values[None, :, :, None])[0]
    return probs, int(np.argmax(probs))


def balanced_indices(labels, per_class: int, seed: int = 0) -> np.ndarray:
    """Sorted indices keeping at most ``per_class`` items of every class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, 3])
    keep = [rng.permutation(np.flatnonzero(labels == c))[:per_class] for c in np.unique(labels)]
    return np.sort(np.concatenate(keep))
