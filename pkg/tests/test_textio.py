import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from heavytail.errors import ShapeError
from heavytail.textio import (
    csv_text,
    fmt,
    parse_record,
    read_csv,
    read_matrix,
    read_vectors,
    record_text,
    write_matrix,
    write_vectors,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite))
def test_matrix_round_trip_exact(tmp_path_factory, B):
    p = tmp_path_factory.mktemp("m") / "B.txt"
    write_matrix(p, B)
    assert np.array_equal(read_matrix(p), B)


def test_matrix_header_errors(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n1 2 3\n")
    with pytest.raises(ShapeError):
        read_matrix(p)
    p.write_text("3")
    with pytest.raises(ShapeError):
        read_matrix(p)


def test_vectors(tmp_path):
    p = tmp_path / "v.txt"
    write_vectors(p, [[1.0, 2.0], [3.0, 4.0]])
    assert read_vectors(p).shape == (2, 2)
    p.write_text("0.6\n0.8\n")
    assert np.array_equal(read_vectors(p), [[0.6, 0.8]])
    p.write_text("1 2\n3\n")
    with pytest.raises(ShapeError):
        read_vectors(p)


def test_fmt():
    assert fmt(None) == "" and fmt(True) == "1" and fmt(np.bool_(False)) == "0"
    assert fmt(np.int64(3)) == "3" and fmt(0.1) == "0.1" and fmt(math.nan) == "nan"
    assert float(fmt(1 / 3)) == 1 / 3


def test_csv_and_records(tmp_path):
    text = csv_text(["a", "b"], [(1, 0.5), (2, None)])
    assert text == "a,b\n1,0.5\n2,\n"
    p = tmp_path / "x.csv"
    p.write_text(text)
    assert read_csv(p) == (["a", "b"], [["1", "0.5"], ["2", ""]])
    p.write_text("")
    with pytest.raises(ShapeError):
        read_csv(p)
    assert parse_record(record_text([("k", 1.5), ("ok", True)])) == {"k": "1.5", "ok": "1"}
