"""Text formats for binary matrices: alist and dense 0/1 rows."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .gf2 import as_bits


class MatrixFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.col = col


def _ints(line: str, lineno: int) -> list:
    try:
        return [int(t) for t in line.split()]
    except ValueError:
        raise MatrixFormatError(f"expected integers, got {line.strip()!r}", lineno) from None


def parse_alist(text: str) -> np.ndarray:
    """Parse an alist file into an ``m x n`` matrix.

    Layout: ``n m``; max column and row degree; ``n`` column degrees;
    ``m`` row degrees; ``n`` lines of 1-indexed row positions per column;
    ``m`` lines of column positions per row. Zero padding entries are
    ignored. Column and row lists must describe the same matrix.
    """
    lines = [(i + 1, l) for i, l in enumerate(text.splitlines()) if l.strip()]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise MatrixFormatError("unexpected end of file", last + 1)
        pos += 1
        return lines[pos - 1]

    ln, l = take()
    dims = _ints(l, ln)
    if len(dims) != 2 or min(dims) < 1:
        raise MatrixFormatError("first line must be 'n m' with positive sizes", ln)
    n, m = dims
    ln, l = take()
    if len(_ints(l, ln)) != 2:
        raise MatrixFormatError("second line must hold the two maximum degrees", ln)
    ln, l = take()
    col_deg = _ints(l, ln)
    if len(col_deg) != n:
        raise MatrixFormatError(f"expected {n} column degrees, got {len(col_deg)}", ln)
    ln, l = take()
    row_deg = _ints(l, ln)
    if len(row_deg) != m:
        raise MatrixFormatError(f"expected {m} row degrees, got {len(row_deg)}", ln)

    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        ln, l = take()
        idx = [v for v in _ints(l, ln) if v != 0]
        if len(idx) != col_deg[j]:
            raise MatrixFormatError(
                f"column {j + 1} lists {len(idx)} entries but its degree is {col_deg[j]}", ln)
        for v in idx:
            if not 1 <= v <= m:
                raise MatrixFormatError(f"row index {v} out of range 1..{m}", ln)
            H[v - 1, j] = 1
    H2 = np.zeros_like(H)
    for i in range(m):
        ln, l = take()
        idx = [v for v in _ints(l, ln) if v != 0]
        if len(idx) != row_deg[i]:
            raise MatrixFormatError(
                f"row {i + 1} lists {len(idx)} entries but its degree is {row_deg[i]}", ln)
        for v in idx:
            if not 1 <= v <= n:
                raise MatrixFormatError(f"column index {v} out of range 1..{n}", ln)
            H2[i, v - 1] = 1
        if not np.array_equal(H2[i], H[i]):
            raise MatrixFormatError(f"row {i + 1} disagrees with the column lists", ln)
    if pos < len(lines):
        raise MatrixFormatError("trailing content after the row lists", lines[pos][0])
    return H


def write_alist(H) -> str:
    """alist text for ``H``; zero-padded to the maximum degrees."""
    H = as_bits(H, "H")
    m, n = H.shape
    cols = [np.nonzero(H[:, j])[0] + 1 for j in range(n)]
    rows = [np.nonzero(H[i])[0] + 1 for i in range(m)]
    cmax = max((len(c) for c in cols), default=0)
    rmax = max((len(r) for r in rows), default=0)

    def pad(idx, width):
        # an all-zero matrix still needs a non-blank line per list
        return " ".join(str(v) for v in list(idx) + [0] * (max(width, 1) - len(idx)))

    out = [f"{n} {m}", f"{cmax} {rmax}",
           " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    out += [pad(c, cmax) for c in cols]
    out += [pad(r, rmax) for r in rows]
    return "\n".join(out) + "\n"


def parse_dense(text: str) -> np.ndarray:
    """Rows of ``0``/``1`` characters, optionally separated by spaces."""
    rows = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        bits = []
        col = 0
        for ch in line:
            if ch in " \t\r,":
                continue
            col += 1
            if ch not in "01":
                raise MatrixFormatError(f"non-binary character {ch!r} at row {i} col {col}", i, col)
            bits.append(ch == "1")
        if rows and len(bits) != len(rows[0]):
            raise MatrixFormatError(
                f"ragged row {i}: {len(bits)} entries, expected {len(rows[0])}", i)
        rows.append(bits)
    if not rows:
        raise MatrixFormatError("empty matrix")
    return np.array(rows, dtype=np.uint8)


def write_dense(M) -> str:
    M = as_bits(M)
    return "\n".join("".join(str(int(b)) for b in row) for row in np.atleast_2d(M)) + "\n"


def read_matrix(path) -> np.ndarray:
    """Load a matrix file; ``.alist`` is parsed as alist, anything else as dense."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".alist":
        return parse_alist(text)
    return parse_dense(text)


def write_matrix(M, path) -> None:
    path = Path(path)
    path.write_text(write_alist(M) if path.suffix == ".alist" else write_dense(M))
