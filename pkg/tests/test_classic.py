import numpy as np
import pytest

from e2ecc.channel import channel_llr, modulate, noise_sigma, transmit
from e2ecc.classic import TannerGraph, bp_decode, hard_syndrome_ok, ml_decode
from e2ecc.codes import builtin_H, builtin_code, repetition_H
from e2ecc.gf2 import Code, codewords, encode


def test_tanner_graph():
    g = TannerGraph(repetition_H(3))
    assert [list(c) for c in g.checks] == [[0, 1], [0, 2]]
    assert sorted(g.edges()) == [(0, 0), (0, 1), (1, 0), (2, 1)]


def test_bp_noiseless_and_single():
    code = builtin_code("hamming_7_4")
    x = encode([1, 0, 1, 1], code)
    soft, hard, ok = bp_decode(code.H, 4.0 * modulate(x), 5)
    assert ok and np.array_equal(hard, x)


def test_bp_corrects_single_error():
    H = builtin_H("hamming_7_4")
    llr = np.full(7, 3.0)
    llr[2] = -1.0
    _, hard, ok = bp_decode(H, llr, 10)
    assert ok and not hard.any()


def test_bp_degree_one_check_is_finite():
    H = np.array([[1, 0, 0], [0, 1, 1]], dtype=np.uint8)
    soft, hard, ok = bp_decode(H, np.array([0.5, -0.2, 1.0]), 5)
    assert np.isfinite(soft).all() and hard[0] == 0


def test_bp_input_validation():
    H = repetition_H(3)
    with pytest.raises(ValueError):
        bp_decode(H, np.zeros(4), 5)
    with pytest.raises(ValueError):
        bp_decode(H, np.array([np.nan, 0, 0]), 5)
    with pytest.raises(ValueError):
        bp_decode(H, np.zeros(3), 0)


def test_ml_exact_on_small_code(rng):
    code = builtin_code("hamming_7_4")
    y = rng.standard_normal((200, 7))
    m_hat, x_hat = ml_decode(code, y)
    cw = codewords(code)
    best = cw[np.argmax(y @ modulate(cw).T, axis=1)]
    assert np.array_equal(x_hat, best)
    assert np.array_equal(encode(m_hat, code), x_hat)


def test_ml_tie_goes_to_lowest_index():
    code = builtin_code("hamming_7_4")
    m_hat, x_hat = ml_decode(code, np.zeros(7))
    assert not x_hat.any() and not m_hat.any()


def test_ml_refuses_large_k():
    with pytest.raises(ValueError, match="exceeds cap"):
        ml_decode(Code(np.zeros((21, 2), np.uint8)), np.zeros(23))


def test_bp_equals_ml_on_repetition(rng):
    code = builtin_code("repetition_3_1")
    sigma = noise_sigma(2.0, 1, 3)
    x = rng.integers(0, 2, (10_000, 1)) * np.ones((1, 3), dtype=np.int64)
    y = transmit(modulate(x), sigma, rng)
    _, hard, _ = bp_decode(code.H, channel_llr(y, sigma), 5)
    assert np.array_equal(hard, ml_decode(code, y)[1])


def test_hard_syndrome_ok():
    H = repetition_H(3)
    assert hard_syndrome_ok(H, np.array([1.0, 2.0, 0.5]))
    assert not hard_syndrome_ok(H, np.array([1.0, -2.0, 0.5]))
