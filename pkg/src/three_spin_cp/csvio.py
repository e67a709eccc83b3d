"""CSV emission and reading for time series and scan profiles.

Layout: ``#``-prefixed ``key = value`` metadata lines, one header row, then
data rows written with 13 significant digits.
"""
from __future__ import annotations

import csv
import io
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .series import Profile, TimeSeries

FLOAT_FORMAT = "%.12e"
TIME_COLUMN = "time_s"
VOLATILE_KEYS = ("created",)


def _meta_value(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v).replace("\n", " ")


def _parse_value(s: str) -> Any:
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def write_table(columns: Mapping[str, Any], path: str | os.PathLike,
                metadata: Mapping[str, Any] | None = None) -> Path:
    """Write equal-length numeric columns. Non-finite data is refused before the file is touched."""
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    if any(a.ndim != 1 for a in arrays) or len({a.size for a in arrays}) > 1:
        raise ValueError("columns must be one-dimensional and of equal length")
    for k, a in zip(names, arrays):
        if not np.all(np.isfinite(a)):
            raise ValueError(f"column {k!r} contains non-finite values; nothing written")
    for k in names:
        if "," in k or "\n" in k:
            raise ValueError(f"column name {k!r} cannot contain ',' or newlines")
    buf = io.StringIO()
    md = {"tool": f"three-spin-cp {__version__}",
          "created": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}
    md.update(metadata or {})
    for k, v in md.items():
        buf.write(f"# {k} = {_meta_value(v)}\n")
    buf.write(",".join(names) + "\n")
    if arrays and arrays[0].size:
        np.savetxt(buf, np.column_stack(arrays), fmt=FLOAT_FORMAT, delimiter=",")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_csv(series: TimeSeries | Profile, path: str | os.PathLike) -> Path:
    """Write a :class:`TimeSeries` or :class:`Profile` with its metadata."""
    if isinstance(series, TimeSeries):
        cols = {TIME_COLUMN: series.times, **series.channels}
        md = {"kind": "timeseries", "units": "time in s; amplitudes in units of thermal rare-spin polarization"}
    elif isinstance(series, Profile):
        cols = {series.parameter: series.values, **series.columns}
        md = {"kind": "profile", "parameter": series.parameter,
              "units": "scan values in Hz; amplitudes in units of thermal rare-spin polarization"}
    else:
        raise TypeError("write_csv expects a TimeSeries or Profile")
    md.update({k: v for k, v in series.metadata.items() if k not in ("kind", "tool")})
    return write_table(cols, path, md)


def read_table(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    meta: dict[str, Any] = {}
    header = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition(" = ")
                if sep:
                    meta[key] = _parse_value(value)
                continue
            if header is None:
                header = next(csv.reader([line.strip()]))
                continue
            if line.strip():
                rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {k: data[:, j] for j, k in enumerate(header)}, meta


def read_csv(path: str | os.PathLike) -> TimeSeries | Profile:
    """Inverse of :func:`write_csv`."""
    cols, meta = read_table(path)
    kind = meta.pop("kind", "timeseries")
    meta.pop("units", None)
    for k in ("tool",) + VOLATILE_KEYS:
        meta.pop(k, None)
    if kind == "profile":
        param = meta.pop("parameter")
        values = cols.pop(param)
        return Profile(param, values, cols, meta)
    times = cols.pop(TIME_COLUMN)
    return TimeSeries(times, cols, meta)
