"""Reference decoders: flooding sum-product BP and exhaustive ML.

Both decoders are vectorized over a leading batch axis; a single received
word is treated as a batch of one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import hard_bits
from .gf2 import Code, as_bits, codewords, gf2_matmul

# Bound on the tanh argument (half an LLR); keeps atanh of the product finite.
TANH_CLAMP = 15.0
ML_MAX_K = 20
_TANH_MAX = float(np.tanh(TANH_CLAMP))


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite graph of ``H``: check ``c`` touches variable ``v`` iff H[c, v] = 1."""

    H: np.ndarray

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def checks(self) -> list:
        return [np.nonzero(row)[0] for row in self.H]

    @property
    def variables(self) -> list:
        return [np.nonzero(col)[0] for col in self.H.T]

    def edges(self):
        c, v = np.nonzero(self.H)
        return list(zip(v.tolist(), c.tolist()))


def hard_syndrome_ok(H, y) -> np.ndarray | bool:
    """True where ``H bin(y) = 0``."""
    s = gf2_matmul(hard_bits(y), as_bits(H).T)
    ok = ~s.any(axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


def _leave_one_out_prod(t: np.ndarray) -> np.ndarray:
    """Product over the last axis excluding each position, without division."""
    ones = np.ones(t.shape[:-1] + (1,), dtype=t.dtype)
    prefix = np.cumprod(np.concatenate([ones, t[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, t[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def bp_decode(H, channel_llr, iterations: int):
    """Sum-product belief propagation with flooding schedule.

    Parameters
    ----------
    H : (m, n) binary array
    channel_llr : (n,) or (batch, n) array of log p(y|0)/p(y|1)
    iterations : number of check+variable update rounds; each word stops
        early once its hard decision satisfies every check.

    Returns
    -------
    soft_llr, hard, syndrome_ok with the batch shape of ``channel_llr``.
    """
    if iterations < 1:
        raise ValueError("need at least one BP iteration")
    H = as_bits(H, "H")
    llr = np.asarray(channel_llr, dtype=np.float64)
    single = llr.ndim == 1
    llr = np.atleast_2d(llr)
    if llr.shape[1] != H.shape[1]:
        raise ValueError(f"LLR length {llr.shape[1]} != n={H.shape[1]}")
    if not np.isfinite(llr).all():
        raise ValueError("channel LLRs must be finite")

    mask = H.astype(bool)[None]
    Hf = H.astype(np.float64)
    soft = llr.copy()
    ok = np.zeros(len(llr), dtype=bool)
    active = np.arange(len(llr))
    R = np.zeros((len(llr),) + H.shape)
    for _ in range(iterations):
        L = llr[active]
        Q = (L + R.sum(axis=1))[:, None, :] - R
        T = np.where(mask, np.tanh(np.clip(Q / 2, -TANH_CLAMP, TANH_CLAMP)), 1.0)
        # degree-1 checks give an empty product of 1; cap like a clamped message
        prod = np.clip(_leave_one_out_prod(T), -_TANH_MAX, _TANH_MAX)
        R = 2.0 * np.arctanh(prod) * Hf
        post = L + R.sum(axis=1)
        soft[active] = post
        done = hard_syndrome_ok(H, post)
        done = np.atleast_1d(done)
        ok[active[done]] = True
        active = active[~done]
        R = R[~done]
        if active.size == 0:
            break
    hard = hard_bits(soft)
    if single:
        return soft[0], hard[0], bool(ok[0])
    return soft, hard, ok


_CODEBOOK_CACHE: dict = {}


def _codebook(code: Code):
    key = hash(code)
    hit = _CODEBOOK_CACHE.get(key)
    if hit is None or not np.array_equal(hit[0], code.P):
        cw = codewords(code)
        hit = (code.P, cw, 1.0 - 2.0 * cw.astype(np.float64))
        _CODEBOOK_CACHE.clear()
        _CODEBOOK_CACHE[key] = hit
    return hit[1], hit[2]


def ml_decode(code: Code, y, max_k: int = ML_MAX_K, chunk: int = 256):
    """Nearest-codeword decoding by enumeration of all ``2**k`` codewords.

    Minimizing ``||y - xi(x)||^2`` is maximizing the correlation ``<y, xi(x)>``;
    ``argmax`` returns the first maximum, i.e. ties go to the smallest
    message index. Returns ``(m_hat, x_hat)``.
    """
    if code.k > max_k:
        raise ValueError(f"ML decoding refused: k={code.k} exceeds cap {max_k}")
    cw, symbols = _codebook(code)
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != code.n:
        raise ValueError(f"received length {y.shape[1]} != n={code.n}")
    step = max(1, min(chunk, (1 << 24) // len(symbols)))
    idx = np.empty(len(y), dtype=np.int64)
    for s in range(0, len(y), step):
        idx[s : s + step] = np.argmax(y[s : s + step] @ symbols.T, axis=1)
    x_hat = cw[idx]
    m_hat = ((idx[:, None] >> np.arange(code.k - 1, -1, -1)) & 1).astype(np.uint8)
    if single:
        return m_hat[0], x_hat[0]
    return m_hat, x_hat
