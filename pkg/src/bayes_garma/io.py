"""CSV ingestion and deterministic result files."""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .core import INTERCEPT, CountSeries, Covariate, design_matrix
from .errors import DomainError, GarmaError

SCHEMA_VERSION = 1
SIG_DIGITS = 6


class DataError(GarmaError, ValueError):
    """Input data file is missing or malformed."""


def load_series(path, y_column: str = "y", scale_divisor: float = 1.0,
                covariates: Sequence[Covariate] = (INTERCEPT,)) -> CountSeries:
    """Read a count series from a CSV file with a header row.

    The counts are divided by ``scale_divisor`` and rounded to the nearest
    integer (halves up), with a warning if rounding changed any value.  Time runs
    t = 1..n in file order.  External covariate columns are read from the
    same file.
    """
    if not scale_divisor > 0:
        raise DomainError("scale_divisor must be positive")
    externals = [c.column for c in covariates if c.kind == "external"]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        for col in [y_column] + externals:
            if col not in header:
                raise DataError(f"{path}: column {col!r} not found in header")
        iy = header.index(y_column)
        iext = {c: header.index(c) for c in externals}
        ys: List[float] = []
        ext: Dict[str, List[float]] = {c: [] for c in externals}
        for row in reader:
            line = reader.line_num
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}, line {line}: expected {len(header)} fields, "
                                f"got {len(row)}")
            try:
                value = float(row[iy])
                for c, i in iext.items():
                    ext[c].append(float(row[i]))
            except ValueError as exc:
                raise DataError(f"{path}, line {line}: {exc}") from exc
            if not math.isfinite(value):
                raise DataError(f"{path}, line {line}: count is not finite")
            if value < 0:
                raise DataError(f"{path}, line {line}: negative count {row[iy]!r}")
            ys.append(value)
    if not ys:
        raise DataError(f"{path}: no data rows")
    scaled = np.asarray(ys) / scale_divisor
    # halves round up (2.5 -> 3), not to even
    y = np.floor(scaled + 0.5)
    if np.any(y != scaled):
        warnings.warn(f"{int(np.sum(y != scaled))} count(s) rounded to integers after "
                      f"division by {scale_divisor:g}", UserWarning, stacklevel=2)
    t = np.arange(1, y.size + 1)
    external = {c: np.asarray(v) for c, v in ext.items()}
    return CountSeries(y.astype(np.int64), design_matrix(covariates, t, external), origin=1)


def save_series(series: CountSeries, path) -> None:
    """Write columns t, y with t = 1..n, the indexing :func:`load_series` uses."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y"])
        for t, y in enumerate(series.y, start=1):
            w.writerow([t, int(y)])


def fmt(value):
    """Round a number to six significant digits; other values pass through."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{SIG_DIGITS}g}")
    return value


def _normalize(obj):
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    return fmt(obj)


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if not math.isfinite(v) else f"{v:.{SIG_DIGITS}g}"
    if value is None:
        return ""
    return str(value)


@dataclass
class Table:
    header: List[str]
    rows: List[list]


@dataclass
class Results:
    """Everything one command produced: a JSON summary plus named CSV tables."""

    command: str
    summary: dict = field(default_factory=dict)
    tables: Dict[str, Table] = field(default_factory=dict)


def emit_report(results: Results, out_dir) -> List[str]:
    """Write ``summary.json`` and ``<name>.csv`` per table; returns the paths.

    Numbers are written with six significant digits and keys in insertion
    order, so the same results always produce byte-identical files.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}") from exc
    doc = {"schema_version": SCHEMA_VERSION, "command": results.command}
    doc.update(_normalize(results.summary))
    paths = []
    try:
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, allow_nan=False)
            fh.write("\n")
        paths.append(path)
        for name in sorted(results.tables):
            table = results.tables[name]
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(table.header)
                for row in table.rows:
                    w.writerow([_cell(v) for v in row])
            paths.append(path)
    except OSError as exc:
        raise DataError(f"cannot write to {out_dir}: {exc}") from exc
    return paths


def draws_table(names: Sequence[str], draws: np.ndarray) -> Table:
    return Table(list(names), [list(row) for row in np.asarray(draws, dtype=float)])
