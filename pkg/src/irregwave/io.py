"""Strict CSV readers that report the offending line number."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = ["read_columns", "read_xy"]


def read_columns(path, names: tuple[str, ...], allow_extra: bool = False, bounds: dict | None = None) -> list[np.ndarray]:
    """Read the named leading columns of a headed CSV as float arrays.

    ``bounds`` maps a column name to an inclusive (lo, hi) range.
    """
    bounds = bounds or {}
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        want = list(names)
        if header[: len(want)] != want or (not allow_extra and len(header) != len(want)):
            raise InputError(f"{path}:1: expected header {','.join(want)}, got {','.join(header)}")
        cols = [[] for _ in want]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(want) or (not allow_extra and len(row) != len(want)):
                raise InputError(f"{path}:{line}: expected {len(want)} fields, got {len(row)}")
            for name, c, cell in zip(want, cols, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}:{line}: not a number: {cell.strip()!r}") from None
                if not np.isfinite(v):
                    raise InputError(f"{path}:{line}: non-finite value")
                if name in bounds and not bounds[name][0] <= v <= bounds[name][1]:
                    lo, hi = bounds[name]
                    raise InputError(f"{path}:{line}: {name} outside [{lo:g}, {hi:g}]")
                c.append(v)
    if not cols[0]:
        raise InputError(f"{path}: no data rows")
    return [np.asarray(c) for c in cols]


def read_xy(path) -> tuple[np.ndarray, np.ndarray]:
    """(x, y) from a CSV headed ``x,y``; x must lie in [0, 1]."""
    xs, ys = read_columns(path, ("x", "y"), bounds={"x": (0.0, 1.0)})
    return xs, ys
