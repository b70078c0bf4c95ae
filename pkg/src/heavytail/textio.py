"""Plain-text formats: matrices, vectors, key-value records and pinned CSV."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError


def write_matrix(path, B) -> None:
    """First line ``rows cols``, then one row per line with ``%.17g`` values."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    lines = [f"{B.shape[0]} {B.shape[1]}"]
    lines += [" ".join("%.17g" % v for v in row) for row in B]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ShapeError(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = np.array([float(t) for t in tokens[2:]])
    if vals.size != rows * cols:
        raise ShapeError(f"{path}: header says {rows}x{cols} but found {vals.size} values")
    return vals.reshape(rows, cols)


def write_vectors(path, X) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Path(path).write_text("".join(" ".join("%.17g" % v for v in row) + "\n" for row in X))


def read_vectors(path) -> np.ndarray:
    """Rows of decimals.  A file with one value per line is read as a single vector."""
    rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise ShapeError(f"{path}: no vectors")
    if all(len(r) == 1 for r in rows) and len(rows) > 1:
        return np.array([[float(r[0]) for r in rows]])
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ShapeError(f"{path}: rows have different lengths {sorted(widths)}")
    return np.array([[float(v) for v in r] for r in rows])


def fmt(v) -> str:
    """Canonical text for a CSV cell or record value."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=",", lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ShapeError(f"{path}: empty CSV (header row is mandatory)")
    return rows[0], rows[1:]


def record_text(items) -> str:
    return "".join(f"{k}={fmt(v)}\n" for k, v in items)


def parse_record(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out
