"""Layers with explicit forward/backward passes on NHWC numpy arrays.

Each layer owns its parameters in ``self.params`` and, after ``backward``,
the matching gradients in ``self.grads``. Forward caches whatever backward
needs; calling backward without a cached forward raises ``StaleForward``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ppnet.errors import ConfigError, GeometryError, ShapeMismatch, StaleForward


def conv_output_shape(W1, H1, D1, F, P, S, K):
    """``(W2, H2, D2)`` for a conv layer: ``W2 = (W1 - F + 2P) / S + 1``."""
    dims = []
    for extent in (W1, H1):
        span = extent - F + 2 * P
        if S < 1 or span < 0 or span % S:
            raise GeometryError(f"({extent} - {F} + 2*{P}) is not a non-negative multiple of stride {S}")
        dims.append(span // S + 1)
    return dims[0], dims[1], K


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    trainable = False

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def output_shape(self, input_shape: tuple) -> tuple:
        return input_shape

    def param_count(self, input_shape: tuple) -> int:
        return 0

    def build(self, input_shape: tuple, rng: np.random.Generator, dtype) -> None:
        pass

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StaleForward(f"{self.name}: backward called without a training forward pass")
        cache, self._cache = self._cache, None
        return cache

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Conv2D(Layer):
    """2-D convolution (cross-correlation), NHWC, optional fused ReLU."""

    trainable = True

    def __init__(self, name, filters, kernel=3, stride=1, padding=1, relu=False):
        super().__init__(name)
        self.filters, self.kernel, self.stride, self.padding = filters, kernel, stride, padding
        self.relu = relu
        # set by Network when a train-mode BatchNorm follows directly; the
        # bias then cancels exactly and is only folded into the running mean
        self.bias_absorbed = False

    def output_shape(self, input_shape):
        h, w, d = input_shape
        h2, w2, k = conv_output_shape(h, w, d, self.kernel, self.padding, self.stride, self.filters)
        return (h2, w2, k)

    def param_count(self, input_shape):
        F, d = self.kernel, input_shape[-1]
        return F * F * d * self.filters + self.filters

    def build(self, input_shape, rng, dtype):
        F, d, K = self.kernel, input_shape[-1], self.filters
        self.params["weight"] = glorot_uniform(rng, (F, F, d, K), F * F * d, F * F * K, dtype)
        self.params["bias"] = np.zeros(K, dtype=dtype)

    def _columns(self, x):
        F, P, S = self.kernel, self.padding, self.stride
        xp = np.pad(x, ((0, 0), (P, P), (P, P), (0, 0))) if P else x
        # (N, H2, W2, C, F, F) -> rows of (F, F, C) patches matching the weight layout
        win = sliding_window_view(xp, (F, F), axis=(1, 2))[:, ::S, ::S]
        n, h2, w2 = win.shape[:3]
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * h2 * w2, -1)
        return cols, (n, h2, w2)

    def forward(self, x, train):
        w, b = self.params["weight"], self.params["bias"]
        cols, (n, h2, w2) = self._columns(x)
        out = (cols @ w.reshape(-1, self.filters)).reshape(n, h2, w2, self.filters)
        if not (train and self.bias_absorbed):
            out += b
        if self.relu:
            np.maximum(out, 0, out=out)
        if train:
            self._cache = (x.shape, cols, out if self.relu else None)
        return out

    def backward(self, dout):
        x_shape, cols, out = self._take_cache()
        F, P, S, K = self.kernel, self.padding, self.stride, self.filters
        if self.relu:
            dout = dout * (out > 0)
        w = self.params["weight"]
        n, h2, w2, _ = dout.shape
        c = x_shape[-1]
        d2 = dout.reshape(-1, K)
        self.grads["weight"] = (cols.T @ d2).reshape(w.shape)
        self.grads["bias"] = np.zeros_like(self.params["bias"]) if self.bias_absorbed else d2.sum(axis=0)
        del cols
        H, W = x_shape[1] + 2 * P, x_shape[2] + 2 * P
        dxp = np.zeros((n, H, W, c), dtype=dout.dtype)
        for i in range(F):
            for j in range(F):
                dxp[:, i : i + S * (h2 - 1) + 1 : S, j : j + S * (w2 - 1) + 1 : S] += (d2 @ w[i, j].T).reshape(n, h2, w2, c)
        return dxp[:, P : H - P, P : W - P] if P else dxp


class Dense(Layer):
    trainable = True

    def __init__(self, name, units, relu=False):
        super().__init__(name)
        self.units, self.relu = units, relu

    def output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeMismatch(f"{self.name} expects flat input, got {input_shape}")
        return (self.units,)

    def param_count(self, input_shape):
        return input_shape[-1] * self.units + self.units

    def build(self, input_shape, rng, dtype):
        d = input_shape[-1]
        self.params["weight"] = glorot_uniform(rng, (d, self.units), d, self.units, dtype)
        self.params["bias"] = np.zeros(self.units, dtype=dtype)

    def forward(self, x, train):
        out = x @ self.params["weight"] + self.params["bias"]
        if self.relu:
            np.maximum(out, 0, out=out)
        if train:
            self._cache = (x, out if self.relu else None)
        return out

    def backward(self, dout):
        x, out = self._take_cache()
        if self.relu:
            dout = dout * (out > 0)
        self.grads["weight"] = x.T @ dout
        self.grads["bias"] = dout.sum(axis=0)
        return dout @ self.params["weight"].T


class BatchNorm(Layer):
    """Per-channel normalisation over every axis but the last."""

    trainable = True

    def __init__(self, name, epsilon=1e-3, momentum=0.99):
        super().__init__(name)
        self.epsilon, self.momentum = epsilon, momentum
        self.upstream_bias: Conv2D | None = None

    def param_count(self, input_shape):
        return 4 * input_shape[-1]

    def build(self, input_shape, rng, dtype):
        c = input_shape[-1]
        self.params["gamma"] = np.ones(c, dtype=dtype)
        self.params["beta"] = np.zeros(c, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(c, dtype=dtype)
        self.buffers["running_var"] = np.ones(c, dtype=dtype)

    def forward(self, x, train):
        gamma, beta = self.params["gamma"], self.params["beta"]
        if not train:
            inv = 1.0 / np.sqrt(self.buffers["running_var"] + self.epsilon)
            return (x - self.buffers["running_mean"]) * (inv * gamma) + beta
        axes = tuple(range(x.ndim - 1))
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean) * inv
        m = self.momentum
        rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
        if self.upstream_bias is not None:
            mean = mean + self.upstream_bias.params["bias"]
        rm *= m
        rm += (1 - m) * mean.astype(rm.dtype)
        rv *= m
        rv += (1 - m) * var.astype(rv.dtype)
        self._cache = (xhat, inv)
        return xhat * gamma + beta

    def backward(self, dout):
        xhat, inv = self._take_cache()
        axes = tuple(range(dout.ndim - 1))
        count = dout.size // dout.shape[-1]
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"]
        return (inv / count) * (
            count * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
        )


class ReLU(Layer):
    def forward(self, x, train):
        out = np.maximum(x, 0)
        if train:
            self._cache = out > 0
        return out

    def backward(self, dout):
        return dout * self._take_cache()


class Dropout(Layer):
    """Inverted dropout: identity in eval mode."""

    def __init__(self, name, rate, rng: np.random.Generator | None = None):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng or np.random.default_rng(0)

    def forward(self, x, train):
        if not train or self.rate == 0.0:
            if train:
                self._cache = 1.0
            return x
        keep = 1.0 - self.rate
        mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        self._cache = mask
        return x * mask

    def backward(self, dout):
        return dout * self._take_cache()


class MaxPool(Layer):
    """Non-overlapping ``size x size`` max pooling; odd trailing rows/cols are dropped."""

    def __init__(self, name, size=2):
        super().__init__(name)
        self.size = size

    def output_shape(self, input_shape):
        h, w, c = input_shape
        return (h // self.size, w // self.size, c)

    def _windows(self, x):
        s = self.size
        n, h, w, c = x.shape
        h2, w2 = h // s, w // s
        cropped = x[:, : h2 * s, : w2 * s]
        win = cropped.reshape(n, h2, s, w2, s, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, s * s)
        return win

    def forward(self, x, train):
        win = self._windows(x)
        if train:
            idx = win.argmax(axis=-1)
            self._cache = (x.shape, idx)
            return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        return win.max(axis=-1)

    def backward(self, dout):
        shape, idx = self._take_cache()
        s = self.size
        n, h2, w2, c = dout.shape
        win = np.zeros((n, h2, w2, c, s * s), dtype=dout.dtype)
        np.put_along_axis(win, idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros(shape, dtype=dout.dtype)
        dx[:, : h2 * s, : w2 * s] = win.reshape(n, h2, w2, c, s, s).transpose(0, 1, 4, 2, 5, 3).reshape(
            n, h2 * s, w2 * s, c
        )
        return dx


class Flatten(Layer):
    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, train):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._take_cache())


class SoftmaxCrossEntropy(Layer):
    """Softmax output; ``loss``/``backward`` need integer targets."""

    def forward(self, x, train):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        if train:
            self._cache = probs
        return probs

    @staticmethod
    def loss(probs, targets) -> float:
        n = probs.shape[0]
        picked = probs[np.arange(n), targets]
        return float(-np.mean(np.log(np.maximum(picked, np.finfo(probs.dtype).tiny))))

    def backward(self, targets):
        probs = self._take_cache()
        n = probs.shape[0]
        d = probs.copy()
        d[np.arange(n), targets] -= 1
        return d / n
