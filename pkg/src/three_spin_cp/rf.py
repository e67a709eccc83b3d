"""RF amplitude profiles for the rare-spin spin lock."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("constant", "linear-ramp")


@dataclass(frozen=True)
class RfProfile:
    """Spin-lock amplitude omega1(t) over a lock of length tau.

    A linear ramp of span s sweeps from (1 - s/2) to (1 + s/2) times the
    nominal amplitude, centred on it.
    """

    nominal: float
    kind: str = "constant"
    span: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"RF profile kind must be one of {KINDS}")
        if not np.isfinite(self.nominal):
            raise ValueError("RF amplitude must be finite")
        if not (np.isfinite(self.span) and self.span >= 0):
            raise ValueError("ramp span must be >= 0")
        if self.kind == "constant" and self.span != 0:
            raise ValueError("constant profile has zero span")

    @classmethod
    def ramp(cls, nominal: float, span: float) -> "RfProfile":
        return cls(nominal, "linear-ramp", span) if span > 0 else cls(nominal)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def amplitude(self, t, tau: float, scale: float = 1.0):
        t = np.asarray(t, dtype=float)
        if self.is_constant:
            return np.full_like(t, scale * self.nominal)
        if tau <= 0:
            raise ValueError("ramp needs a positive lock time")
        return scale * self.nominal * (1.0 - 0.5 * self.span + self.span * t / tau)

    def with_nominal(self, nominal: float) -> "RfProfile":
        return RfProfile(nominal, self.kind, self.span)


class RampCoefficient:
    """Vectorized omega1(t) for use as a modulated-Hamiltonian coefficient."""

    def __init__(self, profile: RfProfile, tau: float, scale: float = 1.0):
        self.profile, self.tau, self.scale = profile, tau, scale

    def __call__(self, t):
        return self.profile.amplitude(t, self.tau, self.scale)
