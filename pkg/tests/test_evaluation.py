import math

import numpy as np
import pytest

from e2ecc.codes import builtin_code, builtin_H
from e2ecc.evaluation import (BerPoint, BerReport, BPDecoder, EvalConfig, HardDecoder,
                              LinearCode, MLDecoder, emit_report, estimate_ber, format_table,
                              read_report_csv, sweep)
from e2ecc.gf2 import gf2_matmul

HAMMING = builtin_code("hamming_7_4")


class FlipDecoder:
    """Hard decision followed by independent bit flips with probability ``p``."""

    name = "flip"

    def __init__(self, p, seed=0):
        self.p = p
        self.rng = np.random.default_rng(seed)

    def __call__(self, y, sigma):
        return (y < 0).astype(np.uint8) ^ (self.rng.random(y.shape) < self.p)


class BrokenDecoder:
    name = "broken"

    def __call__(self, y, sigma):
        raise RuntimeError("boom")


def test_identity_decoder_noiseless_is_censored():
    pt = estimate_ber(HardDecoder(), HAMMING, 200.0, min_codewords=100, max_codewords=5000,
                      chunk=1000)
    assert pt.bit_errors == 0 and pt.censored and pt.frames_sent == 5000
    assert math.isnan(pt.neg_ln_ber)


def test_stopping_rule_and_unbiasedness():
    p = 0.01
    pt = estimate_ber(FlipDecoder(p), HAMMING, 200.0, min_codewords=20_000, min_error_frames=50,
                      chunk=5000)
    assert not pt.censored
    assert pt.frames_sent >= 20_000 and pt.frame_errors >= 50
    assert abs(pt.ber - p) <= 3 * math.sqrt(p * (1 - p) / pt.bits_sent)


def test_error_frames_drive_stop():
    pt = estimate_ber(FlipDecoder(1e-4), HAMMING, 200.0, min_codewords=1000,
                      min_error_frames=50, chunk=5000)
    assert pt.frame_errors >= 50 and pt.frames_sent > 1000


def test_decoder_failures_counted():
    pt = estimate_ber(BrokenDecoder(), HAMMING, 4.0, min_codewords=100, min_error_frames=1,
                      chunk=100)
    assert pt.decoder_failures == 100 and pt.frame_errors == 100


def test_invariants_and_validation():
    pt = estimate_ber(HardDecoder(), HAMMING, 2.0, min_codewords=1000, chunk=500)
    assert pt.bit_errors <= pt.bits_sent and pt.frame_errors <= pt.frames_sent
    assert pt.neg_ln_ber == pytest.approx(-math.log(pt.bit_errors / pt.bits_sent))
    with pytest.raises(ValueError):
        estimate_ber(HardDecoder(), HAMMING, 2.0, min_codewords=0)


def test_native_form_code_generator():
    lc = LinearCode.from_parity_check(builtin_H("bch_31_16"))
    assert not gf2_matmul(lc.G, lc.H.T).any()
    lc = LinearCode.from_parity_check(builtin_H("ldpc_49_24"))
    assert lc.H.shape == (28, 49) and lc.k == 24
    assert not gf2_matmul(lc.G, lc.H.T).any()


def test_ml_in_native_coordinates(rng):
    lc = LinearCode.from_parity_check(builtin_H("hamming_7_4"))
    y = 1.0 - 2.0 * gf2_matmul(rng.integers(0, 2, (50, 4)), lc.G) + 0.01
    assert np.array_equal(MLDecoder(lc)(y, 0.1), (y < 0).astype(np.uint8))


def test_sweep_shapes_and_determinism():
    cfg = EvalConfig(min_codewords=2000, min_error_frames=5, chunk=1000, seed=7)
    decs = [HardDecoder(), BPDecoder(HAMMING.H, 5)]
    a = sweep(decs, HAMMING, [5.0, 3.0], cfg)
    b = sweep(decs, HAMMING, [3.0, 5.0], EvalConfig(**{**cfg.__dict__, "workers": 2}))
    assert [r.decoder for r in a] == ["hard", "bp5"]
    assert [p.ebno_db for p in a[0].points] == [3.0, 5.0]
    for ra, rb in zip(a, b):
        assert [(p.bit_errors, p.frames_sent) for p in ra.points] == \
               [(p.bit_errors, p.frames_sent) for p in rb.points]
    single = sweep([HardDecoder()], HAMMING, [4.0], cfg)
    assert len(single) == 1 and len(single[0].points) == 1


def test_sweep_collects_errors():
    rep = sweep([HardDecoder()], HAMMING, [4.0],
                EvalConfig(min_codewords=10, max_codewords=5))[0]
    assert rep.errors and not rep.points


def test_sweep_rejects_empty():
    with pytest.raises(ValueError):
        sweep([], HAMMING, [4.0])


def test_report_roundtrip(tmp_path):
    cfg = EvalConfig(min_codewords=1000, min_error_frames=5, chunk=500)
    reps = sweep([HardDecoder(), BPDecoder(HAMMING.H, 5)], HAMMING, [3.0, 4.0], cfg)
    path = tmp_path / "r.csv"
    emit_report(reps, path)
    assert len(path.read_text().strip().splitlines()) == 1 + 2 * 2
    back = read_report_csv(path)
    for a, b in zip(reps, back):
        for pa, pb in zip(a.points, b.points):
            assert (pa.bits_sent, pa.bit_errors, pa.frames_sent, pa.frame_errors, pa.censored) == \
                   (pb.bits_sent, pb.bit_errors, pb.frames_sent, pb.frame_errors, pb.censored)


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit_report([], path)
    assert path.read_text() == ("code,decoder,ebno_db,bits,bit_errors,frames,frame_errors,"
                                "ber,neg_ln_ber,censored\n")


def test_pretty_table(tmp_path):
    rep = BerReport("c", "d", [BerPoint(4.0, 100, 1, 10, 1), BerPoint(5.0, 100, 0, 10, 0, True)])
    text = format_table(rep)
    assert "4.61" in text and "-" in text
    emit_report(rep, tmp_path / "t.txt", "pretty_table")
    with pytest.raises(ValueError):
        emit_report(rep, tmp_path / "t.txt", "xml")


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_report([], tmp_path / "missing" / "r.csv")
