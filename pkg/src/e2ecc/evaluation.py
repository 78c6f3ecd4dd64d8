"""Monte-Carlo bit and frame error rates.

Each operating point streams uniformly random messages in fixed-size chunks
until at least ``min_codewords`` words were decoded *and* at least
``min_error_frames`` of them were wrong, or until ``max_codewords`` is hit,
in which case the point is flagged as censored. Chunk ``i`` of a point draws
from its own ``SeedSequence([seed, point_key, i])`` substream, so counts do
not depend on worker scheduling.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import channel_llr, hard_bits, noise_sigma
from .classic import bp_decode, ml_decode
from .gf2 import Code, as_bits, gf2_matmul, independent_rows, standardize

CSV_COLUMNS = ("code", "decoder", "ebno_db", "bits", "bit_errors", "frames",
               "frame_errors", "ber", "neg_ln_ber", "censored")


@dataclass(frozen=True)
class LinearCode:
    """A code in its native coordinates: generator ``G``, checks ``H``.

    ``std`` is the standard-form equivalent and ``perm`` maps it back:
    a standard-form codeword ``c`` corresponds to ``c'`` with ``c'[perm] = c``.
    """

    name: str
    G: np.ndarray
    H: np.ndarray
    std: Code
    perm: np.ndarray

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @classmethod
    def from_code(cls, code: Code) -> "LinearCode":
        return cls(code.name, code.G, code.H, code, np.arange(code.n))

    @classmethod
    def from_parity_check(cls, H, name: str = "code") -> "LinearCode":
        """Keep ``H`` as given (redundant rows allowed) for decoding."""
        H = as_bits(H, "H")
        std, perm = standardize(independent_rows(H), name=name)
        G = np.zeros_like(std.G)
        G[:, perm] = std.G
        return cls(name, G, H, std, perm)


def as_linear_code(code) -> LinearCode:
    if isinstance(code, LinearCode):
        return code
    if isinstance(code, Code):
        return LinearCode.from_code(code)
    return LinearCode.from_parity_check(code)


# ---------------------------------------------------------------------------
# decoders: callables (y, sigma) -> hard codeword estimates (batch, n)

class HardDecoder:
    """Per-bit hard decision, no decoding."""

    name = "hard"

    def __call__(self, y, sigma):
        return hard_bits(y)


class BPDecoder:
    def __init__(self, H, iterations: int = 5):
        self.H = as_bits(H, "H")
        self.iterations = iterations
        self.name = f"bp{iterations}"

    def __call__(self, y, sigma):
        return bp_decode(self.H, channel_llr(y, sigma), self.iterations)[1]


class MLDecoder:
    """Exhaustive ML over the codebook of ``code``, in its native coordinates."""

    name = "ml"

    def __init__(self, code):
        self.code = as_linear_code(code)

    def __call__(self, y, sigma):
        perm = self.code.perm
        x_std = ml_decode(self.code.std, np.asarray(y)[:, perm])[1]
        out = np.empty_like(x_std)
        out[:, perm] = x_std
        return out


class NeuralDecoder:
    """Wraps a :class:`~e2ecc.model.DecoderModel` with a fixed parity-check matrix."""

    name = "neural"

    def __init__(self, model, H, batch: int = 2048):
        self.model = model
        self.H = as_bits(H, "H")
        self.batch = batch
        self.masks = model.frozen_masks(self.H)

    @classmethod
    def from_checkpoint(cls, ckpt, batch: int = 2048) -> "NeuralDecoder":
        return cls(ckpt.model, ckpt.H, batch)

    def __call__(self, y, sigma):
        return self.model.decode(y, self.H, self.masks, batch=self.batch)


# ---------------------------------------------------------------------------

@dataclass
class BerPoint:
    ebno_db: float
    bits_sent: int = 0
    bit_errors: int = 0
    frames_sent: int = 0
    frame_errors: int = 0
    censored: bool = False
    decoder_failures: int = 0
    # sum over frames of (bit errors in frame)^2, for a frame-level variance
    bit_errors_sq: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else math.nan

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames_sent if self.frames_sent else math.nan

    @property
    def neg_ln_ber(self) -> float:
        """``-ln BER``; NaN when no bit error was observed."""
        return -math.log(self.ber) if self.bit_errors > 0 else math.nan

    @property
    def ber_stderr(self) -> float:
        """Standard error of ``ber`` treating frames (not bits) as independent.

        Decoders make bursty errors, so the binomial bit-level formula would
        understate the spread. Falls back to it when squared counts are absent.
        """
        if self.frames_sent < 2:
            return math.nan
        n = self.bits_sent / self.frames_sent
        if self.bit_errors_sq == 0 and self.bit_errors:
            p = self.ber
            return math.sqrt(p * (1 - p) / self.bits_sent)
        mean = self.bit_errors / self.frames_sent
        var = (self.bit_errors_sq / self.frames_sent - mean**2) * self.frames_sent / (self.frames_sent - 1)
        return math.sqrt(max(var, 0.0) / self.frames_sent) / n

    def merge(self, other: "BerPoint") -> "BerPoint":
        return BerPoint(self.ebno_db, self.bits_sent + other.bits_sent,
                        self.bit_errors + other.bit_errors,
                        self.frames_sent + other.frames_sent,
                        self.frame_errors + other.frame_errors,
                        self.censored or other.censored,
                        self.decoder_failures + other.decoder_failures,
                        self.bit_errors_sq + other.bit_errors_sq)


@dataclass
class BerReport:
    code: str
    decoder: str
    points: list = field(default_factory=list)
    seed: int = 0
    wall_time: float = 0.0
    errors: list = field(default_factory=list)

    def __post_init__(self):
        self.points.sort(key=lambda p: p.ebno_db)

    @property
    def censored(self) -> bool:
        return any(p.censored for p in self.points)


@dataclass
class EvalConfig:
    min_codewords: int = 100_000
    min_error_frames: int = 50
    max_codewords: int = 10_000_000
    chunk: int = 10_000
    seed: int = 0
    workers: int = 1
    zero_codeword: bool = False


def point_key(ebno_db: float) -> int:
    return int(round(float(ebno_db) * 1000)) & 0xFFFFFFFF


def _chunk(code: LinearCode, ebno_db, size, seed, index, zero_codeword):
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, point_key(ebno_db), index])))
    if zero_codeword:
        x = np.zeros((size, code.n), dtype=np.uint8)
    else:
        x = gf2_matmul(rng.integers(0, 2, size=(size, code.k), dtype=np.uint8), code.G)
    sigma = float(noise_sigma(ebno_db, code.k, code.n))
    y = (1.0 - 2.0 * x) + sigma * rng.standard_normal(x.shape)
    return x, y, sigma


def estimate_ber(decoder, code, ebno_db: float, min_codewords: int = 100_000,
                 min_error_frames: int = 50, seed: int = 0,
                 max_codewords: int = 10_000_000, chunk: int = 10_000,
                 zero_codeword: bool = False) -> BerPoint:
    """Estimate BER/FER of ``decoder`` on ``code`` at one Eb/N0.

    A decoder exception or a malformed output turns the whole chunk into
    frame errors (the hard decision stands in for the bit count) and is
    tallied in ``decoder_failures``.
    """
    if min_codewords < 1:
        raise ValueError("min_codewords must be at least 1")
    if max_codewords < min_codewords:
        raise ValueError("max_codewords must be >= min_codewords")
    code = as_linear_code(code)
    pt = BerPoint(float(ebno_db))
    index = 0
    while not (pt.frames_sent >= min_codewords and pt.frame_errors >= min_error_frames):
        if pt.frames_sent >= max_codewords:
            pt.censored = True
            break
        size = min(chunk, max_codewords - pt.frames_sent)
        x, y, sigma = _chunk(code, ebno_db, size, seed, index, zero_codeword)
        index += 1
        failed = np.zeros(size, dtype=bool)
        try:
            x_hat = np.asarray(decoder(y, sigma))
            if x_hat.shape != x.shape:
                raise ValueError(f"decoder returned shape {x_hat.shape}, expected {x.shape}")
        except Exception:
            x_hat = hard_bits(y)
            failed[:] = True
        wrong = x_hat.astype(np.uint8) != x
        per_frame = wrong.sum(axis=1, dtype=np.int64)
        bad = (per_frame > 0) | failed
        pt.bits_sent += x.size
        pt.bit_errors += int(per_frame.sum())
        pt.bit_errors_sq += int((per_frame**2).sum())
        pt.frames_sent += size
        pt.frame_errors += int(bad.sum())
        pt.decoder_failures += int(failed.sum())
    return pt


def sweep(decoders, code, ebno_list, cfg: EvalConfig | None = None) -> list:
    """Evaluate every decoder at every Eb/N0; one :class:`BerReport` per decoder.

    All decoders see the same channel draws at a given Eb/N0. A point whose
    evaluation raises is recorded in ``report.errors`` and skipped.
    """
    cfg = cfg or EvalConfig()
    decoders = list(decoders)
    ebno_list = [float(e) for e in ebno_list]
    if not decoders or not ebno_list:
        raise ValueError("need at least one decoder and one Eb/N0 value")
    lc = as_linear_code(code)
    jobs = [(i, e) for i in range(len(decoders)) for e in ebno_list]

    def run(job):
        i, e = job
        t0 = time.perf_counter()
        try:
            pt = estimate_ber(decoders[i], lc, e, cfg.min_codewords, cfg.min_error_frames,
                              cfg.seed, cfg.max_codewords, cfg.chunk, cfg.zero_codeword)
            return i, pt, None, time.perf_counter() - t0
        except Exception as exc:
            return i, None, f"{e} dB: {type(exc).__name__}: {exc}", time.perf_counter() - t0

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    reports = [BerReport(lc.name, getattr(d, "name", f"decoder{i}"), seed=cfg.seed)
               for i, d in enumerate(decoders)]
    for i, pt, err, dt in results:
        rep = reports[i]
        rep.wall_time += dt
        if err is not None:
            rep.errors.append(err)
        else:
            rep.points.append(pt)
    for rep in reports:
        rep.points.sort(key=lambda p: p.ebno_db)
    return reports


# ---------------------------------------------------------------------------
# reports

def _rows(reports):
    if isinstance(reports, BerReport):
        reports = [reports]
    for rep in reports:
        for p in rep.points:
            nl = p.neg_ln_ber
            yield dict(code=rep.code, decoder=rep.decoder, ebno_db=repr(p.ebno_db),
                       bits=p.bits_sent, bit_errors=p.bit_errors, frames=p.frames_sent,
                       frame_errors=p.frame_errors, ber=repr(p.ber),
                       neg_ln_ber="" if math.isnan(nl) else repr(nl),
                       censored=int(p.censored))


def format_table(reports) -> str:
    """``-ln BER`` grid: one row per (code, decoder), one column per Eb/N0."""
    if isinstance(reports, BerReport):
        reports = [reports]
    snrs = sorted({p.ebno_db for r in reports for p in r.points})
    head = ["code", "decoder"] + [f"{e:g} dB" for e in snrs]
    body = []
    for r in reports:
        cells = {p.ebno_db: p for p in r.points}
        row = [r.code, r.decoder]
        for e in snrs:
            p = cells.get(e)
            if p is None or math.isnan(p.neg_ln_ber):
                row.append("-")
            else:
                row.append(f"{p.neg_ln_ber:.2f}" + ("*" if p.censored else ""))
        body.append(row)
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(line, widths)) for line in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if any(r.censored for r in reports):
        lines.append("* censored at the codeword cap")
    return "\n".join(lines) + "\n"


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(_rows(reports))
    return buf.getvalue()


def emit_report(reports, path, format: str = "csv") -> None:
    """Write ``reports`` to ``path`` as CSV or as a plain-text table."""
    path = Path(path)
    if format == "csv":
        path.write_text(report_csv(reports))
    elif format == "pretty_table":
        path.write_text(format_table(reports))
    else:
        raise ValueError(f"unknown report format {format!r}")


def read_report_csv(path) -> list:
    """Parse a CSV written by :func:`emit_report` back into reports."""
    reports: dict = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        for row in reader:
            key = (row["code"], row["decoder"])
            rep = reports.setdefault(key, BerReport(*key))
            rep.points.append(BerPoint(float(row["ebno_db"]), int(row["bits"]),
                                       int(row["bit_errors"]), int(row["frames"]),
                                       int(row["frame_errors"]), bool(int(row["censored"]))))
    return list(reports.values())
