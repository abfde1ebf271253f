import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppnet.errors import ConfigError, SegmentTooShort, TooManyRanges
from ppnet.segmentation import PhonemeSegment
from ppnet.spectrogram import (
    StftConfig,
    aggregate_ranges,
    featurize,
    frame_signal,
    hann_window,
    range_index,
    stft_magnitudes,
)

from conftest import naive_dft_magnitudes

SR = 48000
CFG = StftConfig()


def test_geometry():
    assert (CFG.window_len, CFG.hop_len, CFG.n_bins) == (240, 24, 257)


def test_zero_segment():
    assert np.all(stft_magnitudes(np.zeros(2400)) == 0)


def test_shape_is_100_by_257():
    assert stft_magnitudes(np.ones(2400)).shape == (100, 257)


def test_matches_naive_dft(rng):
    seg = rng.uniform(-1, 1, 2400)
    mags = stft_magnitudes(seg)
    frames = frame_signal(seg, CFG)
    for i in range(0, 100, 9):
        assert np.max(np.abs(mags[i] - naive_dft_magnitudes(frames[i], 512))) < 1e-6


def test_frames_are_windowed_slices(rng):
    seg = rng.uniform(-1, 1, 2400)
    frames = frame_signal(seg, CFG)
    np.testing.assert_array_equal(frames[3], seg[72:312] * hann_window(240))
    # last frame runs past 2400 samples and is zero-padded
    assert np.all(frames[99][2400 - 99 * 24 :] == 0)


def test_sine_peak_bin():
    t = np.arange(2400) / SR
    mags = stft_magnitudes(np.sin(2 * np.pi * 3000 * t))
    expected = int(np.argmin(np.abs(np.arange(257) * SR / 512 - 3000)))
    assert expected == 32
    full = mags[: (2400 - 240) // 24 + 1]  # frames without tail padding
    assert np.all(full.argmax(axis=1) == expected)
    oracle = naive_dft_magnitudes(frame_signal(np.sin(2 * np.pi * 3000 * t), CFG)[5], 512)
    assert int(np.argmax(oracle)) == expected


def test_hop_shift_moves_one_row(rng):
    seg = rng.uniform(-1, 1, 2400 + 24)
    a = stft_magnitudes(seg[:2400])
    b = stft_magnitudes(seg[24 : 2400 + 24])
    full = (2400 - 240) // 24 + 1  # frames clear of the zero-padded tail
    np.testing.assert_allclose(b[: full - 1], a[1:full], atol=1e-12)


def test_too_short():
    with pytest.raises(SegmentTooShort):
        stft_magnitudes(np.zeros(100))


def test_aggregate_identity(rng):
    m = rng.random((4, 257))
    np.testing.assert_allclose(aggregate_ranges(m, 257), m)


def test_aggregate_constant():
    np.testing.assert_allclose(aggregate_ranges(np.full((3, 257), 2.5), 150), 2.5)


def test_partition_257_into_150():
    idx = range_index(257, 150)
    counts = np.bincount(idx, minlength=150)
    assert counts.sum() == 257
    assert np.all(counts >= 1)
    assert set(counts.tolist()) == {1, 2}
    assert np.all(np.diff(idx) >= 0)  # contiguous
    # equal-width in frequency: range r holds bins k with floor(k*150/257) == r
    for r in range(150):
        members = [k for k in range(257) if k * 150 // 257 == r]
        assert counts[r] == len(members)


def test_too_many_ranges():
    with pytest.raises(TooManyRanges):
        aggregate_ranges(np.zeros((2, 10)), 11)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 2**31 - 1))
def test_aggregate_preserves_mass(n_bins, n_ranges, seed):
    if n_ranges > n_bins:
        return
    m = np.random.default_rng(seed).random((3, n_bins))
    out = aggregate_ranges(m, n_ranges)
    counts = np.bincount(range_index(n_bins, n_ranges), minlength=n_ranges)
    np.testing.assert_allclose((out * counts).sum(axis=1), m.sum(axis=1), rtol=1e-9)


def test_featurize_shape_and_stats(rng):
    seg = PhonemeSegment(rng.uniform(-0.5, 0.5, 2400), "vowel", 1.0, SR)
    fm = featurize(seg)
    assert fm.values.shape == (100, 150)
    assert abs(fm.values.mean()) < 1e-9
    assert fm.values.std() == pytest.approx(1.0)
    assert fm.std > 0


def test_featurize_zero_segment():
    fm = featurize(np.zeros(2400))
    assert fm.values.shape == (100, 150)
    assert np.all(fm.values == 0)


def test_featurize_deterministic(rng):
    seg = rng.uniform(-1, 1, 2400)
    assert featurize(seg).values.tobytes() == featurize(seg).values.tobytes()


def test_featurize_rejects_other_rates():
    with pytest.raises(ConfigError):
        featurize(PhonemeSegment(np.zeros(800), "vowel", 0.0, 16000))


@pytest.mark.parametrize("kwargs", [dict(fft_size=128), dict(n_ranges=300), dict(n_frames=0), dict(window_kind="hamming")])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        StftConfig(**kwargs)
