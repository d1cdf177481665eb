"""Plain-text matrix files.

Format: a header line ``rows cols`` followed by ``rows`` lines of
whitespace-separated values written with 17 significant digits, which
round-trips IEEE doubles exactly.
"""
from pathlib import Path

import numpy as np


class MatrixFormatError(ValueError):
    pass


def format_matrix(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got {a.ndim}-D")
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in a)
    return "\n".join(lines) + "\n"


def save_matrix(path, a):
    Path(path).write_text(format_matrix(a))


def parse_matrix(text, source="<string>"):
    lines = text.splitlines()
    if not lines:
        raise MatrixFormatError(f"{source}:1: empty file")
    header = lines[0].split()
    try:
        rows, cols = (int(v) for v in header)
    except ValueError:
        raise MatrixFormatError(f"{source}:1: malformed header {lines[0]!r}, expected 'rows cols'") from None
    if rows < 0 or cols < 0:
        raise MatrixFormatError(f"{source}:1: negative dimensions")
    body = [ln for ln in lines[1:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != rows:
        raise MatrixFormatError(f"{source}:{len(body) + 2}: expected {rows} rows, found {len(body)}")
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split()
        if len(fields) != cols:
            raise MatrixFormatError(f"{source}:{i + 2}: expected {cols} values, found {len(fields)}")
        try:
            out[i] = [float(v) for v in fields]
        except ValueError:
            raise MatrixFormatError(f"{source}:{i + 2}: non-numeric value") from None
    return out


def load_matrix(path):
    path = Path(path)
    return parse_matrix(path.read_text(), source=str(path))
