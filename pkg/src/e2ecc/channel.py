"""BPSK over AWGN.

Noise comes from ``numpy.random.Generator`` seeded with ``PCG64`` and drawn
with its ziggurat ``standard_normal``; that stream is stable across numpy
releases for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import as_bits


def modulate(x) -> np.ndarray:
    """Bipolar map 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * as_bits(x, "x").astype(np.float64)


def demodulate(xs) -> np.ndarray:
    """Inverse of :func:`modulate` on {+1, -1}."""
    xs = np.asarray(xs, dtype=np.float64)
    if not np.isin(xs, (-1.0, 1.0)).all():
        raise ValueError("demodulate expects values in {+1, -1}")
    return ((1.0 - xs) / 2).astype(np.uint8)


def hard_bits(y) -> np.ndarray:
    """bin(y): 1 where y < 0, else 0 (so bin(0) = 0)."""
    return (np.asarray(y) < 0).astype(np.uint8)


def noise_sigma(ebno_db, k: int, n: int):
    """Noise std for a rate ``k/n`` code at the given Eb/N0 (dB), unit symbol energy."""
    if k <= 0 or n <= 0:
        raise ValueError("code dimensions must be positive")
    return 1.0 / np.sqrt(2.0 * (k / n) * 10.0 ** (np.asarray(ebno_db, dtype=np.float64) / 10.0))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def transmit(xs, sigma, rng_seed=None) -> np.ndarray:
    """``y = xs + sigma * g`` with g standard normal.

    ``sigma`` may be a scalar or broadcast against ``xs`` (e.g. one value per
    row of a batch). ``rng_seed`` is an int, a seed sequence, or a Generator.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if (sigma < 0).any():
        raise ValueError("sigma must be non-negative")
    xs = np.asarray(xs, dtype=np.float64)
    rng = make_rng(rng_seed)
    return xs + sigma * rng.standard_normal(xs.shape)


def noise_target(y, x) -> np.ndarray:
    """Hard bit of the multiplicative noise: 1 where sign(y) disagrees with the sent symbol."""
    y = np.asarray(y)
    x = as_bits(x, "x")
    if y.shape != x.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {x.shape}")
    return hard_bits(y) ^ x


def channel_llr(y, sigma) -> np.ndarray:
    """AWGN log-likelihood ratios log p(y|0)/p(y|1) = 2y/sigma^2."""
    return 2.0 * np.asarray(y, dtype=np.float64) / np.asarray(sigma, dtype=np.float64) ** 2


@dataclass
class ChannelSample:
    x: np.ndarray
    x_s: np.ndarray
    y: np.ndarray
    ebno_db: float
    sigma: float


def sample(x, ebno_db: float, k: int, rng_seed=None) -> ChannelSample:
    """Modulate and transmit codeword(s) ``x`` at ``ebno_db``."""
    x = as_bits(x, "x")
    sigma = float(noise_sigma(ebno_db, k, x.shape[-1]))
    xs = modulate(x)
    return ChannelSample(x, xs, transmit(xs, sigma, rng_seed), ebno_db, sigma)
