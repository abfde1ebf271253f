"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ppnet.errors import NondeterministicNetwork
from ppnet.nn.layers import Conv2D, Dense, Dropout, Layer, MaxPool, ReLU, SoftmaxCrossEntropy
from ppnet.nn.network import Network


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)

    def worst(self) -> tuple[str, float]:
        return max(self.per_tensor.items(), key=lambda kv: kv[1])


def _sample(rng, size: int, count: int) -> np.ndarray:
    if size <= count:
        return np.arange(size)
    return rng.choice(size, count, replace=False)


def activation_pattern(layers) -> list[np.ndarray]:
    """ReLU masks and max-pool winners cached by the last training forward."""
    out = []
    for layer in layers:
        cache = layer._cache
        if isinstance(layer, ReLU):
            out.append(cache)
        elif isinstance(layer, MaxPool):
            out.append(cache[1])
        elif isinstance(layer, (Conv2D, Dense)) and layer.relu:
            out.append(cache[-1] > 0)
    return out


def _same_pattern(a, b) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _check_kink_free(arr, loss_fn, analytic, order, eps, want, pattern_fn, base, max_tries) -> tuple[float, int, int]:
    """Walk ``order`` until ``want`` coordinates have kink-free probes.

    A probe that flips a ReLU mask or a max-pool winner spans a point where
    the loss is not differentiable, so its difference quotient says nothing
    about the gradient there. Returns (worst error, checked, skipped); the
    error is ``inf`` when fewer than ``want`` clean coordinates turn up
    within ``max_tries`` draws, since the tensor then went unverified.
    """
    flat = arr.reshape(-1)
    worst, checked, skipped = 0.0, 0, 0
    for i in order[:max_tries]:
        if checked == want:
            break
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        clean = _same_pattern(pattern_fn(), base)
        flat[i] = orig - eps
        down = loss_fn()
        clean = clean and _same_pattern(pattern_fn(), base)
        flat[i] = orig
        if not clean:
            skipped += 1
            continue
        numeric = (up - down) / (2 * eps)
        worst = max(worst, relative_error(float(analytic.reshape(-1)[i]), numeric))
        checked += 1
    return (worst if checked == want else float("inf")), checked, skipped


def _check_array(arr, loss_fn, analytic, idx, eps) -> float:
    flat = arr.reshape(-1)
    worst = 0.0
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        numeric = (up - down) / (2 * eps)
        worst = max(worst, relative_error(float(analytic.reshape(-1)[i]), numeric))
    return worst


def gradient_check(
    net: Network,
    batch,
    targets,
    eps: float = 1e-5,
    samples: int = 20,
    seed: int = 0,
    skip_kinks: bool = True,
    max_tries: int = 400,
) -> GradCheckResult:
    """Compare backprop gradients with ``(L(p+eps) - L(p-eps)) / 2eps``.

    ``samples`` entries per parameter tensor are checked (all of them for
    small tensors). With ``skip_kinks`` a coordinate whose probes change the
    activation pattern is replaced by the next random draw (at most
    ``max_tries`` draws per tensor). Dropout must be
    off; BatchNorm runs in training mode and its running statistics are
    restored afterwards.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if any(isinstance(l, Dropout) and l.rate > 0 for l in net.layers):
        raise NondeterministicNetwork("dropout is active; set every rate to 0 for gradient checks")
    rng = np.random.default_rng(seed)
    saved = {k: v.copy() for k, v in net.buffers.items()}
    targets = np.asarray(targets)

    net.loss(batch, targets)
    base = [a.copy() for a in activation_pattern(net.layers)]
    analytic = {k: g.copy() for k, g in net.backward(targets).items()}

    def loss_fn():
        return net.loss(batch, targets)

    def pattern_fn():
        return activation_pattern(net.layers)

    result = GradCheckResult(0.0)
    for name, p in net.params.items():
        if skip_kinks:
            order = rng.permutation(p.size)
            err, checked, skipped = _check_kink_free(
                p, loss_fn, analytic[name], order, eps, min(samples, p.size), pattern_fn, base, max_tries
            )
        else:
            idx = _sample(rng, p.size, samples)
            err, checked, skipped = _check_array(p, loss_fn, analytic[name], idx, eps), len(idx), 0
        result.per_tensor[name] = err
        result.checked[name] = checked
        result.skipped[name] = skipped
        result.max_rel_error = max(result.max_rel_error, err)
    # discard the cache from the last probe and undo running-stat drift
    net.backward(targets)
    for layer in net.layers:
        for k in layer.buffers:
            layer.buffers[k] = saved[f"{layer.name}.{k}"]
    return result


def layer_gradient_check(layer: Layer, x: np.ndarray, eps: float = 1e-5, samples: int = 20, seed: int = 0) -> GradCheckResult:
    """Check one built layer in isolation, parameters and input gradient.

    The scalar objective is ``sum(out * R)`` for a fixed random ``R``
    (cross-entropy against random targets for the softmax layer).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if isinstance(layer, Dropout) and layer.rate > 0:
        raise NondeterministicNetwork("dropout is active; set rate to 0 for gradient checks")
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    saved = {k: v.copy() for k, v in layer.buffers.items()}
    is_softmax = isinstance(layer, SoftmaxCrossEntropy)
    out = layer.forward(x, True)
    if is_softmax:
        targets = rng.integers(0, x.shape[1], size=x.shape[0])

        def loss_fn():
            return SoftmaxCrossEntropy.loss(layer.forward(x, True), targets)

        dx = layer.backward(targets)
    else:
        R = rng.standard_normal(out.shape)

        def loss_fn():
            return float(np.sum(layer.forward(x, True) * R))

        dx = layer.backward(R)
    analytic = {k: g.copy() for k, g in layer.grads.items()}

    result = GradCheckResult(0.0)
    for name, p in layer.params.items():
        err = _check_array(p, loss_fn, analytic[name], _sample(rng, p.size, samples), eps)
        result.per_tensor[f"{layer.name}.{name}"] = err
    err = _check_array(x, loss_fn, dx, _sample(rng, x.size, samples), eps)
    result.per_tensor[f"{layer.name}.input"] = err
    result.max_rel_error = max(result.per_tensor.values())
    layer._cache = None
    layer.buffers.update(saved)
    return result
