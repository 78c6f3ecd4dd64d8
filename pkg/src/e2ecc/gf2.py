"""Exact linear algebra over GF(2).

Binary matrices are plain ``numpy`` arrays of dtype ``uint8`` holding 0/1
values, row-major. Message and codeword vectors are row vectors so that
encoding reads ``x = m G``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RankDeficientError(ValueError):
    """Raised when a parity-check matrix does not have full row rank."""

    def __init__(self, rank: int, rows: int):
        super().__init__(f"matrix is rank deficient: rank {rank} < {rows} rows")
        self.rank = rank
        self.rows = rows


def as_bits(a, name: str = "array") -> np.ndarray:
    """Return ``a`` as a uint8 array, rejecting anything outside {0, 1}."""
    arr = np.asarray(a)
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return arr.astype(np.uint8)


def gf2_matmul(a, b) -> np.ndarray:
    """Matrix product reduced mod 2.

    Works for vectors and stacks the same way ``@`` does. Integer
    accumulation is exact for any inner dimension below 2**31.
    """
    a = as_bits(a, "A")
    b = as_bits(b, "B")
    if a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return ((a.astype(np.int64) @ b.astype(np.int64)) & 1).astype(np.uint8)


def gf2_rank(a) -> int:
    """Rank over GF(2) via row reduction."""
    m = as_bits(a).copy()
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        pivots = np.nonzero(m[rank:, c])[0]
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        hit = np.nonzero(m[:, c])[0]
        hit = hit[hit != rank]
        m[hit] ^= m[rank]
        rank += 1
    return rank


def independent_rows(H) -> np.ndarray:
    """Greedy maximal set of linearly independent rows, in original order."""
    H = as_bits(H, "H")
    keep, rank = [], 0
    for i in range(H.shape[0]):
        if gf2_rank(H[keep + [i]]) > rank:
            keep.append(i)
            rank += 1
    return H[keep]


@dataclass(frozen=True)
class Code:
    """Binary linear block code in standard form.

    ``G = [I_k | P]`` and ``H = [P^T | I_{n-k}]``. Only ``P`` is stored; the
    other matrices are derived on access.
    """

    P: np.ndarray
    name: str = field(default="code", compare=False)

    def __post_init__(self):
        p = as_bits(self.P, "P")
        if p.ndim != 2:
            raise ValueError("P must be a 2-D matrix")
        p.setflags(write=False)
        object.__setattr__(self, "P", p)

    @property
    def k(self) -> int:
        return self.P.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[0] + self.P.shape[1]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def G(self) -> np.ndarray:
        return np.hstack([np.eye(self.k, dtype=np.uint8), self.P])

    @property
    def H(self) -> np.ndarray:
        return np.hstack([self.P.T, np.eye(self.n - self.k, dtype=np.uint8)])

    @classmethod
    def from_parity_check(cls, H, name: str = "code") -> "Code":
        """Build from an ``H`` that is already ``[P^T | I]``."""
        H = as_bits(H, "H")
        r, n = H.shape
        if not np.array_equal(H[:, n - r:], np.eye(r, dtype=np.uint8)):
            raise ValueError("H is not in standard form [P^T | I]; use standardize()")
        return cls(H[:, : n - r].T.copy(), name=name)

    def __eq__(self, other):
        return isinstance(other, Code) and np.array_equal(self.P, other.P)

    def __hash__(self):
        return hash((self.P.shape, self.P.tobytes()))

    def __repr__(self):
        return f"Code(name={self.name!r}, n={self.n}, k={self.k})"


def standardize(H_any, name: str = "code") -> tuple[Code, np.ndarray]:
    """Row-reduce ``H_any`` to ``[P^T | I]`` using column swaps where needed.

    Returns the code and ``perm``, a column permutation such that the row
    space of ``code.H`` equals the row space of ``H_any[:, perm]``. Pivots
    are placed right to left; for each pivot row the leftmost column with a
    one in the not-yet-reduced region is chosen, so the result is
    deterministic.
    """
    H = as_bits(H_any, "H").copy()
    if H.ndim != 2:
        raise ValueError("H must be a 2-D matrix")
    r, n = H.shape
    if r >= n:
        raise ValueError(f"need fewer checks than bits, got {r}x{n}")
    perm = np.arange(n)
    for i in range(r):
        col = n - r + i
        if not H[i:, col].any():
            # leftmost column outside the already-fixed pivot block
            cand = [c for c in range(n - r + i) if H[i:, c].any()]
            cand += [c for c in range(col + 1, n) if H[i:, c].any()]
            if not cand:
                raise RankDeficientError(gf2_rank(H_any), r)
            c = cand[0]
            H[:, [col, c]] = H[:, [c, col]]
            perm[[col, c]] = perm[[c, col]]
        p = i + np.nonzero(H[i:, col])[0][0]
        if p != i:
            H[[i, p]] = H[[p, i]]
        hit = np.nonzero(H[:, col])[0]
        hit = hit[hit != i]
        H[hit] ^= H[i]
    return Code.from_parity_check(H, name=name), perm


def encode(m, code: Code) -> np.ndarray:
    """Codeword(s) ``m G mod 2``; ``m`` may be a vector or a (batch, k) array."""
    m = as_bits(m, "message")
    if m.shape[-1] != code.k:
        raise ValueError(f"message length {m.shape[-1]} != k={code.k}")
    return gf2_matmul(m, code.G)


def syndrome(code_or_H, c) -> np.ndarray:
    """Syndrome ``H c`` for a word or a (batch, n) stack of words."""
    H = code_or_H.H if isinstance(code_or_H, Code) else as_bits(code_or_H, "H")
    c = as_bits(c, "word")
    if c.shape[-1] != H.shape[1]:
        raise ValueError(f"word length {c.shape[-1]} != n={H.shape[1]}")
    return gf2_matmul(c, H.T)


def codewords(code: Code) -> np.ndarray:
    """All ``2**k`` codewords, row ``i`` encoding the binary expansion of ``i``.

    Bit ``j`` of the message is the ``j``-th most significant bit of ``i``,
    so row order is lexicographic in the message.
    """
    k = code.k
    idx = np.arange(2**k, dtype=np.int64)
    msgs = ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    return encode(msgs, code)
