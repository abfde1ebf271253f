"""Two-input adaptive noise canceller driven by normalised LMS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ppnet.errors import ConfigError, LengthMismatch


@dataclass(frozen=True)
class AncConfig:
    taps: int = 32
    step: float = 0.1
    regularizer: float = 1e-6

    def __post_init__(self):
        if int(self.taps) != self.taps or self.taps < 1:
            raise ConfigError(f"taps must be a positive integer, got {self.taps}")
        if not 0.0 <= self.step < 2.0:
            raise ConfigError(f"step must lie in (0, 2), got {self.step}")
        if not self.regularizer > 0.0:
            raise ConfigError(f"regularizer must be positive, got {self.regularizer}")


def nlms_cancel(primary, reference, cfg: AncConfig | None = None) -> np.ndarray:
    """Subtract an adaptively filtered copy of ``reference`` from ``primary``.

    The filter sees the last ``taps`` reference samples (zeros before the
    start). The returned error signal is the estimate of the clean source.
    ``step == 0`` is accepted and freezes the filter at zero.
    """
    cfg = cfg or AncConfig()
    d = np.asarray(primary, dtype=np.float64).reshape(-1)
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    if d.shape != ref.shape:
        raise LengthMismatch(f"primary has {d.size} samples, reference has {ref.size}")
    L = int(cfg.taps)
    if d.size <= L:
        raise ConfigError(f"signal length {d.size} must exceed the filter order {L}")

    # row t holds reference[t-L+1 .. t], oldest first
    frames = sliding_window_view(np.concatenate((np.zeros(L - 1), ref)), L)
    energy = np.einsum("ij,ij->i", frames, frames)
    w = np.zeros(L)
    out = np.empty_like(d)
    mu, eps = float(cfg.step), float(cfg.regularizer)
    for t in range(d.size):
        x = frames[t]
        e = d[t] - w @ x
        out[t] = e
        if mu:
            w += (mu * e / (eps + energy[t])) * x
    return out
