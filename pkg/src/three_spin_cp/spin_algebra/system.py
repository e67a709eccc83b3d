"""Spin-system description: spins, shifts, J and dipolar networks, geometry."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from ..errors import SpinSystemError

ABUNDANT = "abundant-S"
RARE = "rare-I"

#: gyromagnetic ratios in rad s^-1 T^-1
GAMMA = MappingProxyType({
    "1H": 267.5221874e6,
    "13C": 67.2828e6,
    "15N": -27.116e6,
    "19F": 251.815e6,
    "31P": 108.394e6,
})

MAX_SPINS = 8


@dataclass(frozen=True)
class Spin:
    label: str
    species: str
    gamma: float
    isotope: str = ""

    def __post_init__(self):
        if self.species not in (ABUNDANT, RARE):
            raise SpinSystemError(f"unknown species {self.species!r}")
        if not np.isfinite(self.gamma) or self.gamma == 0:
            raise SpinSystemError(f"spin {self.label!r}: gyromagnetic ratio must be finite and nonzero")

    @classmethod
    def from_isotope(cls, label: str, isotope: str, species: str | None = None) -> "Spin":
        try:
            gamma = GAMMA[isotope]
        except KeyError:
            raise SpinSystemError(f"unknown isotope {isotope!r}; known: {sorted(GAMMA)}") from None
        if species is None:
            species = ABUNDANT if isotope in ("1H", "19F") else RARE
        return cls(label, species, gamma, isotope)


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SpinSystem:
    """Immutable spin network.

    Frequencies are angular (rad/s), coordinates in angstrom. Coupling maps
    are keyed by index pairs ``(i, j)`` with ``i < j`` after construction.
    ``dipolar_axes`` optionally gives molecular-frame unit vectors for pairs
    whose dipolar constant was given explicitly without a geometry.
    """

    spins: tuple[Spin, ...]
    shifts: tuple[float, ...] = ()
    j_couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    dipolar_constants: Mapping[tuple[int, int], float] = field(default_factory=dict)
    geometry: Mapping[int, tuple[float, float, float]] | None = None
    dipolar_axes: Mapping[tuple[int, int], tuple[float, float, float]] = field(default_factory=dict)

    def __post_init__(self):
        spins = tuple(self.spins)
        n = len(spins)
        if not 1 <= n <= MAX_SPINS:
            raise SpinSystemError(f"spin count {n} outside 1..{MAX_SPINS}")
        labels = [s.label for s in spins]
        if len(set(labels)) != n:
            raise SpinSystemError("spin labels must be unique")
        shifts = tuple(float(x) for x in self.shifts) if len(self.shifts) else (0.0,) * n
        if len(shifts) != n or not np.all(np.isfinite(shifts)):
            raise SpinSystemError("shifts must be finite, one per spin")
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "j_couplings", self._normalize(self.j_couplings, "J"))
        geom = None
        if self.geometry is not None:
            geom = {}
            for k, xyz in self.geometry.items():
                i = self._resolve(k)
                v = tuple(float(c) for c in xyz)
                if len(v) != 3 or not np.all(np.isfinite(v)):
                    raise SpinSystemError(f"bad coordinates for spin {labels[i]!r}")
                geom[i] = v
            geom = MappingProxyType(geom)
        object.__setattr__(self, "geometry", geom)
        dip = dict(self._normalize(self.dipolar_constants, "dipolar"))
        axes = {}
        for key, v in dict(self.dipolar_axes).items():
            i, j = (self._resolve(x) for x in key)
            u = np.asarray(v, float)
            if u.shape != (3,) or not np.linalg.norm(u) > 0:
                raise SpinSystemError(f"dipolar axis for {key} must be a nonzero 3-vector")
            u = u / np.linalg.norm(u)
            axes[_pair(i, j)] = tuple(u if i < j else -u)
        object.__setattr__(self, "dipolar_axes", MappingProxyType(axes))
        if geom is not None:
            from ..solid import dipolar_constant  # local import: solid depends on this module

            for i in range(n):
                for j in range(i + 1, n):
                    if i in geom and j in geom:
                        r = np.linalg.norm(np.subtract(geom[i], geom[j]))
                        if r == 0:
                            raise SpinSystemError(f"coincident coordinates for {labels[i]!r}, {labels[j]!r}")
                        b = dipolar_constant(spins[i].gamma, spins[j].gamma, r)
                        if (i, j) in dip and not np.isclose(dip[(i, j)], b, rtol=1e-9, atol=0):
                            raise SpinSystemError(
                                f"dipolar constant for {labels[i]}-{labels[j]} contradicts geometry")
                        dip[(i, j)] = b
        object.__setattr__(self, "dipolar_constants", MappingProxyType(dip))

    def _resolve(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < len(self.spins):
                raise SpinSystemError(f"spin index {key} out of range")
            return int(key)
        for i, s in enumerate(self.spins):
            if s.label == key:
                return i
        raise SpinSystemError(f"unknown spin {key!r}")

    def _normalize(self, mapping, what) -> Mapping[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for key, val in dict(mapping).items():
            i, j = (self._resolve(x) for x in key)
            if i == j:
                raise SpinSystemError(f"{what} coupling of a spin with itself ({key})")
            val = float(val)
            if not np.isfinite(val):
                raise SpinSystemError(f"{what} coupling {key} is not finite")
            p = _pair(i, j)
            if p in out and out[p] != val:
                raise SpinSystemError(f"{what} coupling {key} given twice with different values")
            out[p] = val
        return MappingProxyType(out)

    @classmethod
    def build(cls, spins: Sequence[tuple[str, str] | tuple[str, str, str]],
              shifts: Mapping[str, float] | None = None,
              j: Mapping[tuple[str, str], float] | None = None,
              dipolar: Mapping[tuple[str, str], float] | None = None,
              geometry: Mapping[str, Sequence[float]] | None = None,
              dipolar_axes: Mapping[tuple[str, str], Sequence[float]] | None = None) -> "SpinSystem":
        """Label-based constructor; ``spins`` holds ``(label, isotope[, species])``."""
        sp = tuple(Spin.from_isotope(*s) for s in spins)
        labels = [s.label for s in sp]
        sh = [0.0] * len(sp)
        for k, v in (shifts or {}).items():
            if k not in labels:
                raise SpinSystemError(f"shift given for unknown spin {k!r}")
            sh[labels.index(k)] = v
        return cls(sp, tuple(sh), j or {}, dipolar or {}, geometry, dipolar_axes or {})

    # convenience accessors
    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def dim(self) -> int:
        return 2 ** len(self.spins)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.spins)

    def index(self, key) -> int:
        return self._resolve(key)

    @property
    def abundant(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.spins) if s.species == ABUNDANT)

    @property
    def rare(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.spins) if s.species == RARE)

    def rare_spin(self) -> int:
        """Index of the single rare spin; CP scenarios need exactly one."""
        r = self.rare
        if len(r) != 1:
            raise SpinSystemError(f"exactly one rare-I spin required, found {len(r)}")
        return r[0]

    def j(self, i, k) -> float:
        return self.j_couplings.get(_pair(self._resolve(i), self._resolve(k)), 0.0)

    def b(self, i, k) -> float:
        return self.dipolar_constants.get(_pair(self._resolve(i), self._resolve(k)), 0.0)

    def pair_axis(self, i: int, k: int) -> np.ndarray:
        """Molecular-frame unit vector from spin i to spin k."""
        i, k = self._resolve(i), self._resolve(k)
        if self.geometry is not None and i in self.geometry and k in self.geometry:
            v = np.subtract(self.geometry[k], self.geometry[i])
            r = np.linalg.norm(v)
            if r == 0:
                raise SpinSystemError("coincident coordinates")
            return v / r
        p = _pair(i, k)
        if p in self.dipolar_axes:
            u = np.asarray(self.dipolar_axes[p])
            return u if p == (i, k) else -u
        raise SpinSystemError(f"no geometry for pair {self.labels[i]}-{self.labels[k]}")

    def replace(self, **changes) -> "SpinSystem":
        from dataclasses import replace
        return replace(self, **changes)
