"""Sequential network: shape chaining, parameter registry, forward/backward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppnet.errors import ConfigError, ShapeMismatch, StaleForward
from ppnet.nn.layers import BatchNorm, Conv2D, Dropout, Layer, SoftmaxCrossEntropy


@dataclass(frozen=True)
class LayerRow:
    name: str
    kind: str
    output_shape: tuple
    params: int


class Network:
    def __init__(self, layers: list[Layer], input_shape: tuple, seed: int = 0, dtype=np.float32):
        if not layers or not isinstance(layers[-1], SoftmaxCrossEntropy):
            raise ConfigError("the last layer must be SoftmaxCrossEntropy")
        names = [layer.name for layer in layers]
        if len(set(names)) != len(names):
            raise ConfigError("layer names must be unique")
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self.mode = "eval"
        self._targets_ready = False
        rng = np.random.default_rng(seed)
        self.summary: list[LayerRow] = []
        shape = self.input_shape
        for layer in layers:
            count = layer.param_count(shape)
            layer.build(shape, rng, self.dtype)
            shape = layer.output_shape(shape)
            self.summary.append(LayerRow(layer.name, type(layer).__name__, shape, count))
        self.output_shape = shape
        for prev, layer in zip(layers, layers[1:]):
            if isinstance(prev, Conv2D) and not prev.relu and isinstance(layer, BatchNorm):
                prev.bias_absorbed = True
                layer.upstream_bias = prev
        self.reseed(seed)

    def reseed(self, seed: int) -> None:
        """Reset the dropout mask stream."""
        rng = np.random.default_rng([seed, 1])
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    # parameter registry -------------------------------------------------
    @property
    def params(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.params.items()}

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.grads.items()}

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.buffers.items()}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {**self.params, **self.buffers}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for layer in self.layers:
            for store in (layer.params, layer.buffers):
                for key, current in store.items():
                    name = f"{layer.name}.{key}"
                    if name not in state:
                        raise KeyError(f"missing tensor {name!r}")
                    value = np.asarray(state[name])
                    if value.shape != current.shape:
                        raise ShapeMismatch(f"{name}: expected {current.shape}, got {value.shape}")
                    store[key] = value.astype(self.dtype)

    def astype(self, dtype) -> "Network":
        self.dtype = np.dtype(dtype)
        for layer in self.layers:
            for store in (layer.params, layer.buffers):
                for key in store:
                    store[key] = store[key].astype(self.dtype)
        return self

    def param_counts(self) -> list[int]:
        return [row.params for row in self.summary]

    # passes -------------------------------------------------------------
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Class probabilities for a batch ``(N, *input_shape)``."""
        x = np.asarray(x)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"expected batch of {self.input_shape}, got {x.shape[1:]}")
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            out = layer.forward(out, train)
        self.mode = "train" if train else "eval"
        self._targets_ready = train
        return out

    def loss(self, x, targets) -> float:
        """Mean cross-entropy after a training-mode forward; caches for ``backward``."""
        probs = self.forward(x, train=True)
        return SoftmaxCrossEntropy.loss(probs, np.asarray(targets))

    def backward(self, targets) -> dict[str, np.ndarray]:
        if not self._targets_ready:
            raise StaleForward("backward needs a training-mode forward on the same batch")
        self._targets_ready = False
        d = self.layers[-1].backward(np.asarray(targets))
        for layer in reversed(self.layers[:-1]):
            d = layer.backward(d)
        return self.grads
