import numpy as np
import pytest

from ppnet.errors import ConfigError, LengthMismatch
from ppnet.noise_cancel import AncConfig, nlms_cancel

SR = 48000


def scenario(seed=0):
    """Clean voiced-like source plus FIR-filtered reference noise at 0 dB SNR."""
    rng = np.random.default_rng(seed)
    n = 2 * SR
    t = np.arange(n) / SR
    s = 0.3 * np.sin(2 * np.pi * 220 * t) + 0.15 * np.sin(2 * np.pi * 660 * t + 0.3)
    n0 = rng.standard_normal(n)
    h = rng.standard_normal(8) * np.exp(-0.3 * np.arange(8))
    noise = np.convolve(n0, h)[:n]
    noise *= np.sqrt(np.mean(s**2) / np.mean(noise**2))
    return s, noise, n0


def test_zero_reference_is_identity(rng):
    p = rng.standard_normal(500)
    np.testing.assert_array_equal(nlms_cancel(p, np.zeros(500)), p)


def test_zero_step_is_identity(rng):
    p, r = rng.standard_normal(400), rng.standard_normal(400)
    np.testing.assert_array_equal(nlms_cancel(p, r, AncConfig(step=0.0)), p)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        nlms_cancel(np.zeros(100), np.zeros(99))


def test_too_short_for_taps():
    with pytest.raises(ConfigError):
        nlms_cancel(np.zeros(32), np.zeros(32), AncConfig(taps=32))


@pytest.mark.parametrize("kwargs", [dict(taps=0), dict(step=2.0), dict(step=-0.1), dict(regularizer=0.0)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        AncConfig(**kwargs)


def test_cancels_correlated_noise():
    s, noise, n0 = scenario()
    out = nlms_cancel(s + noise, n0)
    half = len(s) // 2
    before = np.mean(noise[half:] ** 2)
    after = np.mean((out[half:] - s[half:]) ** 2)
    assert 10 * np.log10(before / after) >= 10.0


def test_finite_on_silent_reference_bursts(rng):
    r = rng.standard_normal(3000)
    r[1000:2000] = 0.0
    out = nlms_cancel(rng.standard_normal(3000), r)
    assert np.all(np.isfinite(out))


def test_deterministic(rng):
    p, r = rng.standard_normal(2000), rng.standard_normal(2000)
    np.testing.assert_array_equal(nlms_cancel(p, r), nlms_cancel(p, r))


def test_output_length(rng):
    assert nlms_cancel(rng.standard_normal(777), rng.standard_normal(777)).shape == (777,)
