from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays
from hypothesis import strategies as st

from e2ecc.codeio import (MatrixFormatError, parse_alist, parse_dense, read_matrix,
                          write_alist, write_dense)
from e2ecc.codes import BUILTIN, builtin_H

CODES = Path(__file__).resolve().parents[1] / "codes"

REP_ALIST = """3 2
2 1
2 1 1
2 2
1 2
1 0
2 0
1 2
1 3
"""


def test_repetition_alist():
    assert np.array_equal(parse_alist(REP_ALIST), [[1, 1, 0], [1, 0, 1]])


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_shipped_files_roundtrip(name):
    text = (CODES / f"{name}.alist").read_text()
    H = parse_alist(text)
    assert np.array_equal(H, builtin_H(name))
    assert write_alist(H) == text


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 12)),
              elements=st.integers(0, 1)))
def test_alist_and_dense_roundtrip(H):
    assert np.array_equal(parse_alist(write_alist(H)), H)
    assert np.array_equal(parse_dense(write_dense(H)), H)


def test_alist_index_out_of_range():
    bad = REP_ALIST.replace("1 3\n", "1 4\n")
    with pytest.raises(MatrixFormatError, match="line 9"):
        parse_alist(bad)


def test_alist_degree_mismatch():
    bad = REP_ALIST.replace("2 1 1\n", "2 2 1\n")
    with pytest.raises(MatrixFormatError, match="line 6"):
        parse_alist(bad)


def test_alist_truncated():
    with pytest.raises(MatrixFormatError, match="end of file"):
        parse_alist("\n".join(REP_ALIST.splitlines()[:6]))


def test_dense_examples():
    assert np.array_equal(parse_dense("10\n01"), np.eye(2))
    assert np.array_equal(parse_dense("1 0\n0 1\n\n"), np.eye(2))
    with pytest.raises(MatrixFormatError, match="row 1 col 3"):
        parse_dense("102")
    with pytest.raises(MatrixFormatError, match="ragged"):
        parse_dense("10\n1")


def test_read_matrix_dispatch(tmp_path):
    (tmp_path / "h.txt").write_text("110\n101\n")
    (tmp_path / "h.alist").write_text(REP_ALIST)
    assert np.array_equal(read_matrix(tmp_path / "h.txt"), read_matrix(tmp_path / "h.alist"))
