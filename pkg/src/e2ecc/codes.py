"""Constructions of the classical codes used as baselines.

Each builder returns a parity-check matrix in its usual (non-standard) form;
``standardize`` turns it into a :class:`~e2ecc.gf2.Code` when a systematic
version is needed.
"""
from __future__ import annotations

import numpy as np

from .gf2 import Code, as_bits, gf2_rank, independent_rows, standardize


def repetition_H(n: int = 3) -> np.ndarray:
    """Repetition code: every bit checked against the first one."""
    H = np.zeros((n - 1, n), dtype=np.uint8)
    H[:, 0] = 1
    H[:, 1:] = np.eye(n - 1, dtype=np.uint8)
    return H


def hamming_7_4_H() -> np.ndarray:
    """Cyclic-form Hamming(7,4), generator polynomial 1 + x + x^3."""
    return cyclic_H(poly_divmod(_xn_minus_1(7), [1, 1, 0, 1])[0], 7)


# --- polynomials over GF(2), coefficient lists lowest degree first ---------

def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _xn_minus_1(n):
    return [1] + [0] * (n - 1) + [1]


def poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] ^= bj
    return _trim(out)


def poly_divmod(a, b):
    a = _trim(a)
    b = _trim(b)
    q = [0] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    for shift in range(len(a) - len(b), -1, -1):
        if r[shift + len(b) - 1]:
            q[shift] = 1
            for j, bj in enumerate(b):
                r[shift + j] ^= bj
    return _trim(q), _trim(r)


def _minimal_poly(power: int, m: int, prim: int):
    """Minimal polynomial over GF(2) of alpha**power in GF(2^m)."""
    order = 2**m - 1
    exp = [0] * (2 * order)
    x = 1
    for i in range(order):
        exp[i] = x
        x <<= 1
        if x >> m:
            x ^= prim
    for i in range(order, 2 * order):
        exp[i] = exp[i - order]
    log = {exp[i]: i for i in range(order)}

    coset = []
    e = power % order
    while e not in coset:
        coset.append(e)
        e = (2 * e) % order
    # product of (X - alpha^e) with coefficients in GF(2^m), lowest first
    poly = [1]
    for e in coset:
        root = exp[e]
        new = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            new[i + 1] ^= c
            if c:
                new[i] ^= exp[(log[c] + log[root]) % order]
        poly = new
    if any(c not in (0, 1) for c in poly):
        raise ArithmeticError("minimal polynomial not binary")
    return poly


def bch_generator(n: int, t: int, prim: int) -> list:
    """Generator polynomial of the narrow-sense primitive BCH code.

    ``prim`` is the primitive polynomial as an integer bit mask, e.g.
    ``0b100101`` for 1 + x^2 + x^5.
    """
    m = n.bit_length()
    if 2**m - 1 != n:
        raise ValueError("primitive BCH needs n = 2^m - 1")
    g = [1]
    seen = set()
    for i in range(1, 2 * t, 2):
        mp = tuple(_minimal_poly(i, m, prim))
        if mp not in seen:
            seen.add(mp)
            g = poly_mul(g, list(mp))
    return g


def cyclic_H(h, n: int) -> np.ndarray:
    """Parity-check matrix of a cyclic code from its check polynomial ``h``.

    Rows are the ``n - k`` consecutive shifts of the reciprocal of ``h``.
    """
    h = _trim(h)
    k = len(h) - 1
    rec = h[::-1]
    H = np.zeros((n - k, n), dtype=np.uint8)
    for i in range(n - k):
        H[i, i : i + k + 1] = rec
    return H


def bch_H(n: int = 31, t: int = 3, prim: int = 0b100101) -> np.ndarray:
    """Cyclic parity-check matrix of a binary BCH code (default BCH(31,16))."""
    g = bch_generator(n, t, prim)
    h, rem = poly_divmod(_xn_minus_1(n), g)
    assert rem == [0]
    return cyclic_H(h, n)


def array_ldpc_H(p: int = 7, rows: int = 4, cols: int | None = None,
                 drop_dependent: bool = True) -> np.ndarray:
    """Array LDPC code: block ``(i, j)`` is the circulant shift ``P^(i*j)``.

    With ``p = 7`` and four block rows this is the (49, 24) code. The
    stacked matrix has ``rows - 1`` dependent checks; with
    ``drop_dependent`` the last check of every block row after the first is
    removed so that ``H`` has full row rank.
    """
    cols = p if cols is None else cols
    eye = np.eye(p, dtype=np.uint8)
    blocks = [[np.roll(eye, (i * j) % p, axis=1) for j in range(cols)] for i in range(rows)]
    H = np.block(blocks).astype(np.uint8)
    if drop_dependent:
        keep = [r for r in range(rows * p) if r < p or (r % p) != p - 1]
        H = H[keep]
    return H


def polar_info_set(n: int, k: int, design_snr_db: float = 0.0) -> np.ndarray:
    """Indices of the ``k`` most reliable synthetic channels.

    Reliabilities come from the Bhattacharyya-parameter recursion on a BPSK
    AWGN channel at ``design_snr_db`` (Es/N0).
    """
    m = n.bit_length() - 1
    if 2**m != n:
        raise ValueError("polar length must be a power of two")
    z = np.array([np.exp(-(10 ** (design_snr_db / 10)))])
    for _ in range(m):
        nz = np.empty(2 * z.size)
        nz[0::2] = 2 * z - z**2
        nz[1::2] = z**2
        z = nz
    return np.sort(np.argsort(z, kind="stable")[:k])


def polar_kernel(n: int) -> np.ndarray:
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = np.array([[1]], dtype=np.uint8)
    while G.shape[0] < n:
        G = np.kron(G, F)
    return G


def polar_H(n: int = 32, k: int = 11, design_snr_db: float = 0.0) -> np.ndarray:
    """Parity checks of a polar code: frozen columns of the (involutive) kernel."""
    GN = polar_kernel(n)
    info = polar_info_set(n, k, design_snr_db)
    frozen = np.setdiff1d(np.arange(n), info)
    return GN[:, frozen].T.copy()


def random_standard_code(n: int, k: int, rng: np.random.Generator, name: str = "random") -> Code:
    """Standard-form code with i.i.d. Bernoulli(1/2) ``P``."""
    return Code(rng.integers(0, 2, size=(k, n - k), dtype=np.uint8), name=name)


def random_H(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank parity-check matrix (rejection sampled)."""
    while True:
        H = rng.integers(0, 2, size=(n - k, n), dtype=np.uint8)
        if gf2_rank(H) == n - k:
            return H


BUILTIN = {
    "repetition_3_1": lambda: repetition_H(3),
    "hamming_7_4": hamming_7_4_H,
    "bch_31_16": lambda: bch_H(31, 3),
    "ldpc_49_24": lambda: array_ldpc_H(7, 4, drop_dependent=False),
    "polar_32_11": lambda: polar_H(32, 11),
}


def builtin_H(name: str) -> np.ndarray:
    """Parity-check matrix of a named builtin code, in its native form."""
    try:
        return as_bits(BUILTIN[name]())
    except KeyError:
        raise KeyError(f"unknown builtin code {name!r}; choose from {sorted(BUILTIN)}") from None


def builtin_code(name: str) -> Code:
    """Standard-form version of a named builtin code (redundant checks dropped)."""
    return standardize(independent_rows(builtin_H(name)), name=name)[0]
