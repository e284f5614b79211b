"""CSV loading, sample covariance and positive-definiteness checks."""

import csv
import io
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, ParseError
from .linalg import SPD_TOL, SpdMatrix


@dataclass(frozen=True)
class DataMatrix:
    """``N x n`` array of observations, one row per observation."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise EmptyInput(f"data matrix must be non-empty 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParseError("data matrix has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]


def _open(path):
    if str(path) == "-":
        return io.StringIO(sys.stdin.read())
    return open(path, newline="")


def load_matrix_csv(path, has_header=False):
    """Read a rectangular numeric CSV file (``'-'`` reads standard input).

    Blank lines are skipped. Missing or non-numeric cells, NaN and
    infinities are errors; line and column numbers in the messages are
    1-based.
    """
    rows = []
    width = None
    with _open(path) as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if has_header and lineno == 1:
                continue
            vals = []
            for col, cell in enumerate(rec, start=1):
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", lineno, col) from None
                if not math.isfinite(x):
                    raise ParseError(f"non-finite cell {cell!r}", lineno, col)
                vals.append(x)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"expected {width} fields, found {len(vals)}", lineno)
            rows.append(vals)
    if not rows:
        raise EmptyInput(f"no data rows in {path}")
    return DataMatrix(np.array(rows))


def write_matrix_csv(path, M, header=None):
    """Write a 2-D array as CSV with 17 significant digits (exact round-trip)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    fh = sys.stdout if str(path) == "-" else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in M:
            w.writerow([format(x, ".17g") for x in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def sample_covariance(Y, center=False):
    """``(1/N) sum_k y_k y_k^T``; with ``center`` the column means are removed first."""
    if not isinstance(Y, DataMatrix):
        Y = DataMatrix(Y)
    X = Y.values
    if center:
        X = X - X.mean(axis=0)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def validate_spd(S, tol=SPD_TOL):
    """Certify ``S`` positive definite; raises SingularCovariance otherwise."""
    return SpdMatrix.certify(S, tol)
