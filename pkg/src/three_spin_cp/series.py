"""Tabulated simulation outputs."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np


def _frozen_array(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Channel amplitudes sampled on a strictly increasing time grid (seconds)."""

    times: np.ndarray
    channels: Mapping[str, np.ndarray] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = _frozen_array(self.times)
        if t.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if not np.all(np.isfinite(t)):
            raise ValueError("times must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        ch = {}
        for name, v in dict(self.channels).items():
            a = _frozen_array(v)
            if a.shape != t.shape:
                raise ValueError(f"channel {name!r} has length {a.size}, expected {t.size}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            ch[str(name)] = a
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "channels", MappingProxyType(ch))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def __len__(self) -> int:
        return self.times.size

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.channels)

    def peak(self, name: str, absolute: bool = False) -> tuple[float, float]:
        """(time, value) at the channel maximum."""
        v = self.channels[name]
        i = int(np.argmax(np.abs(v) if absolute else v))
        return float(self.times[i]), float(v[i])

    def with_metadata(self, **extra) -> "TimeSeries":
        md = dict(self.metadata)
        md.update(extra)
        return TimeSeries(self.times, self.channels, md)

    def scaled(self, factor: float) -> "TimeSeries":
        return TimeSeries(self.times, {k: factor * v for k, v in self.channels.items()}, self.metadata)


@dataclass(frozen=True)
class Profile:
    """Figure of merit(s) as a function of one scanned parameter."""

    parameter: str
    values: np.ndarray
    columns: Mapping[str, np.ndarray] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = _frozen_array(self.values)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("scan grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("scan grid must be finite")
        cols = {}
        for name, c in dict(self.columns).items():
            a = _frozen_array(c)
            if a.shape != v.shape:
                raise ValueError(f"column {name!r} has wrong length")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"column {name!r} contains non-finite values")
            cols[str(name)] = a
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", MappingProxyType(cols))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def argmax(self, column: str) -> float:
        return float(self.values[int(np.argmax(self.columns[column]))])
