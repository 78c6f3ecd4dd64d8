import numpy as np
import pytest

from e2ecc.channel import (channel_llr, demodulate, hard_bits, modulate, noise_sigma,
                           noise_target, sample, transmit)


def test_modulation_roundtrip(rng):
    x = rng.integers(0, 2, (4, 9))
    assert np.array_equal(modulate([0, 1]), [1.0, -1.0])
    assert np.array_equal(demodulate(modulate(x)), x)
    with pytest.raises(ValueError):
        demodulate([0.5])


def test_hard_bits_zero_maps_to_zero():
    assert np.array_equal(hard_bits([0.0, -0.0, 1e-9, -1e-9]), [0, 0, 0, 1])


def test_noise_sigma_formula():
    # rate 1/2 at 0 dB: sigma^2 = 1 / (2 * 0.5 * 1)
    assert noise_sigma(0.0, 1, 2) == pytest.approx(1.0)
    assert noise_sigma(10 * np.log10(2), 16, 32) == pytest.approx(np.sqrt(0.5))
    assert noise_sigma(3.0, 16, 31) > noise_sigma(5.0, 16, 31)


def test_transmit_seeded_and_zero_noise(rng):
    xs = modulate(rng.integers(0, 2, (3, 8)))
    assert np.array_equal(transmit(xs, 0.7, 5), transmit(xs, 0.7, 5))
    assert np.array_equal(transmit(xs, 0.0, 5), xs)
    with pytest.raises(ValueError):
        transmit(xs, -1.0, 0)


def test_transmit_per_row_sigma():
    xs = np.ones((2, 20000))
    y = transmit(xs, np.array([[0.1], [1.0]]), 0)
    assert np.std(y[0]) == pytest.approx(0.1, rel=0.05)
    assert np.std(y[1]) == pytest.approx(1.0, rel=0.05)


def test_noise_target_and_llr(rng):
    x = rng.integers(0, 2, 50)
    y = transmit(modulate(x), 0.9, 1)
    z = noise_target(y, x)
    assert np.array_equal(z, (np.sign(y) != modulate(x)).astype(np.uint8))
    assert np.allclose(channel_llr(y, 0.5), 8 * y)


def test_sample_empirical_ber():
    # hard-decision BER is Q(1/sigma)
    from math import erfc, sqrt
    s = sample(np.zeros((4000, 31), np.uint8), 4.0, 16, 3)
    p = 0.5 * erfc(1 / (s.sigma * sqrt(2)))
    est = hard_bits(s.y).mean()
    assert abs(est - p) < 4 * sqrt(p * (1 - p) / s.y.size)
