import numpy as np
import pytest

from ccsnd.channel import (
    DeviceRealization,
    FadingModelI,
    FadingModelII,
    complex_noise,
    device_frame,
    sample_active_set,
    sample_delays,
    synthesize_frame,
)
from ccsnd.codebook import build_codebook
from ccsnd.errors import ConfigError

SAMPLES = 100_000


def _within_se(samples, expected, k=3.0):
    se = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - expected) <= k * se + 1e-12


def test_model_one_magnitude_moments():
    m = FadingModelI(h_lower=1.5, snr_linear=1.0)
    h = m.sample(np.random.default_rng(0), SAMPLES)
    mag = np.abs(h)
    assert mag.min() >= 1.5 and mag.max() <= 3.0
    _within_se(mag, 2.25)
    # E|h|^2 for U[a, 2a] is 7a^2/3
    _within_se(mag**2, 7 * 1.5**2 / 3)
    _within_se(np.cos(np.angle(h)), 0.0)
    _within_se(np.sin(np.angle(h)), 0.0)


def test_model_one_power():
    assert FadingModelI(h_lower=2.0, snr_linear=4.0).power == pytest.approx(2.0)


@pytest.mark.parametrize("alpha, mean", [(2.0, 0.10), (20.0, 0.05 * 20 / 19)])
def test_model_two_mean_gain(alpha, mean):
    m = FadingModelII(eta=0.05, alpha=alpha, snr_linear=1.0)
    gain = np.abs(m.sample(np.random.default_rng(1), SAMPLES)) ** 2
    assert gain.min() >= 0.05 * (1 - 1e-12)
    assert gain.mean() == pytest.approx(mean, rel=0.05)


def test_model_two_tail():
    m = FadingModelII(eta=0.05, alpha=3.0)
    gain = np.abs(m.sample(np.random.default_rng(2), SAMPLES)) ** 2
    # P(g > 2 eta) = 2^-alpha
    frac = np.mean(gain > 0.1)
    assert frac == pytest.approx(1 / 8, abs=3 * np.sqrt(0.125 * 0.875 / SAMPLES))


def test_model_two_power_and_validation():
    assert FadingModelII(eta=0.05, snr_linear=1.0).power == pytest.approx(40.0)
    with pytest.raises(ConfigError):
        FadingModelII(alpha=1.0)
    with pytest.raises(ConfigError):
        FadingModelI(h_lower=0.0)


def test_scalar_sample():
    assert isinstance(FadingModelI().sample(np.random.default_rng(0)), complex)
    assert isinstance(FadingModelII().sample(np.random.default_rng(0)), complex)


def test_noise_variance():
    w = complex_noise(np.random.default_rng(3), SAMPLES)
    _within_se(np.abs(w) ** 2, 1.0)
    _within_se(w.real**2, 0.5)
    _within_se(w.real * w.imag, 0.0)


def test_active_set_distinct_and_in_range():
    ids = sample_active_set(100, 38, 5)
    assert len(set(ids)) == 100
    assert all(0 <= i < 2**38 for i in ids)
    small = sample_active_set(16, 4, 5)
    assert sorted(small) == list(range(16))
    assert sample_active_set(0, 10, 0) == []
    with pytest.raises(ValueError):
        sample_active_set(17, 4, 0)


def test_active_set_deterministic():
    assert sample_active_set(10, 38, 123) == sample_active_set(10, 38, 123)


def test_delays_range_and_mean():
    d = sample_delays(SAMPLES, 20, np.random.default_rng(4))
    assert d.min() == 0 and d.max() == 20
    _within_se(d.astype(float), 10.0)
    assert np.all(sample_delays(50, 0, 0) == 0)


def test_noiseless_frame_energy():
    cb = build_codebook(J=8, slot_len=50, T=0, seed=0)
    dev = DeviceRealization(0, 1.0 + 0j, 0)
    frame = synthesize_frame([dev], np.array([[3, 200, 17, 90]]), cb, power=1.0, noise_on=False)
    assert np.linalg.norm(frame.y) ** 2 == pytest.approx(4 * 50)


def test_delayed_codewords_stay_in_slot():
    cb = build_codebook(J=6, slot_len=30, T=5, seed=1)
    block = np.array([1, 2, 3])
    for tau in range(6):
        frame = synthesize_frame([DeviceRealization(0, 1j, tau)], block[None], cb, 1.0, noise_on=False)
        for i in range(3):
            s = frame.slot(i)
            assert np.all(s[:tau] == 0)
            assert np.all(s[tau + 25 :] == 0)
            np.testing.assert_allclose(s[tau : tau + 25], 1j * cb.column(block[i]))


def test_frame_superposition_and_power():
    cb = build_codebook(J=6, slot_len=30, T=2, seed=1)
    blocks = np.array([[1, 2], [5, 6]])
    devs = [DeviceRealization(0, 0.5 + 0j, 1), DeviceRealization(1, -1j, 2)]
    y = synthesize_frame(devs, blocks, cb, power=4.0, noise_on=False).y
    expect = np.zeros(60, dtype=complex)
    for dev, b in zip(devs, blocks):
        x = device_frame(b, cb)
        expect[dev.tau :] += 2.0 * dev.h * x[: 60 - dev.tau]
    np.testing.assert_allclose(y, expect)


def test_frame_rejects_large_delay():
    cb = build_codebook(J=4, slot_len=10, T=2, seed=0)
    with pytest.raises(ValueError):
        synthesize_frame([DeviceRealization(0, 1 + 0j, 3)], np.array([[1]]), cb, 1.0, noise_on=False)


def test_frame_noise_deterministic():
    cb = build_codebook(J=4, slot_len=10, T=0, seed=0)
    a = synthesize_frame([], np.zeros((0, 2)), cb, 1.0, True, seed=9, n=2)
    b = synthesize_frame([], np.zeros((0, 2)), cb, 1.0, True, seed=9, n=2)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.slots().shape == (10, 2)
    np.testing.assert_array_equal(a.slots()[:, 1], a.slot(1))


def test_per_slot_codebooks():
    books = [build_codebook(J=4, slot_len=8, T=0, seed=s) for s in range(3)]
    y = synthesize_frame([DeviceRealization(0, 1 + 0j, 0)], np.array([[1, 2, 3]]), books, 1.0, False).y
    for i, cb in enumerate(books):
        np.testing.assert_allclose(y[i * 8 : (i + 1) * 8], cb.column(i + 1))
