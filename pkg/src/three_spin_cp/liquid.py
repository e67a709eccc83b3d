"""Liquid-state three-spin CP: Hamiltonians, average Hamiltonian and trajectories.

Two abundant spins S1, S2 (shift difference Delta = Omega_1 - Omega_2) are
J-coupled to each other with full isotropic coupling and to a rare spin I
with secular couplings. Spin locking I at omega1 ~ |Delta| moves the
anti-longitudinal order S1z - S2z onto I. In the frame tilted along the RF
the 2-3 block of the problem is a fictitious two-spin system whose
second-order average Hamiltonian is

    (omega1 - Delta) Iz + A (Iz + Sz') + B (Iz - Sz') + C ZQx + D Sz' Ix

with A + B = J-^2/(8 Delta), A - B = J_SS^2/(2 Delta), C = J- J_SS/(2 Delta)
and D = -(omega1 - Delta) J-/Delta. Nulling the Iz - Sz' coefficient gives
the matched amplitude omega1_opt = Delta + J_SS^2/(2 Delta) - J-^2/(8 Delta).

For Delta < 0 the same block couples through the double-quantum pair of
operators; the mediating term is then Iz + Sz' and the transferred I signal
changes sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MatchingError, SpinSystemError
from .rf import RfProfile
from .series import TimeSeries
from .spin_algebra.operators import embed_operator, fictitious_operator, is_hermitian
from .spin_algebra.system import ABUNDANT, RARE, SpinSystem

MATCH_TOL = 1e-3


@dataclass(frozen=True)
class LiquidParams:
    """Liquid CP problem: system, designated transfer pair and spin lock.

    Spins may be given by index or label; by default the first two abundant
    spins form the pair and the single rare spin is I. Frequencies in rad/s.
    """

    system: SpinSystem
    omega1: float
    s1: int | str | None = None
    s2: int | str | None = None
    i_spin: int | str | None = None
    i_offset: float = 0.0
    rf_profile: RfProfile | None = None

    def __post_init__(self):
        sys_ = self.system
        i = sys_.rare_spin() if self.i_spin is None else sys_.index(self.i_spin)
        ab = sys_.abundant
        if self.s1 is None or self.s2 is None:
            if len(ab) < 2:
                raise SpinSystemError("need two abundant spins for the transfer pair")
        s1 = ab[0] if self.s1 is None else sys_.index(self.s1)
        s2 = ab[1] if self.s2 is None else sys_.index(self.s2)
        if s1 == s2:
            raise SpinSystemError("transfer pair spins must differ")
        for s in (s1, s2):
            if sys_.spins[s].species != ABUNDANT:
                raise SpinSystemError(f"{sys_.labels[s]!r} is not an abundant spin")
        if sys_.spins[i].species != RARE:
            raise SpinSystemError(f"{sys_.labels[i]!r} is not the rare spin")
        if not np.isfinite(self.omega1) or not np.isfinite(self.i_offset):
            raise ValueError("omega1 and i_offset must be finite")
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)
        object.__setattr__(self, "i_spin", i)

    @property
    def delta(self) -> float:
        return self.system.shifts[self.s1] - self.system.shifts[self.s2]

    @property
    def pair(self) -> tuple[int, int]:
        return self.s1, self.s2

    def with_omega1(self, omega1: float) -> "LiquidParams":
        from dataclasses import replace
        return replace(self, omega1=omega1)


@dataclass(frozen=True)
class LiquidAht:
    sigma: float
    delta: float
    j_plus: float
    j_minus: float
    j_ss: float
    A: float
    B: float
    C: float
    D: float
    omega1_opt: float
    omega1: float

    @property
    def delta_sign(self) -> str:
        return "positive" if self.delta > 0 else "negative"


# ------------------------------------------------------------ Hamiltonians

def liquid_static_hamiltonian(system: SpinSystem, i_spin: int | None = None, i_offset: float = 0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian without the RF term.

    Abundant spins carry isotropic shifts and full J couplings among
    themselves; couplings to the rare spin are secular (omega_J Sz Iz).
    """
    i_spin = system.rare_spin() if i_spin is None else system.index(i_spin)
    n = system.n
    h = np.zeros((system.dim, system.dim), dtype=complex)
    for k in range(n):
        shift = system.shifts[k] + (i_offset if k == i_spin else 0.0)
        if shift:
            h += shift * embed_operator(n, k, "z")
    for (a, b), w in system.j_couplings.items():
        if not w:
            continue
        zz = embed_operator(n, a, "z") @ embed_operator(n, b, "z")
        if system.spins[a].species == system.spins[b].species:
            ff = 0.5 * (embed_operator(n, a, "+") @ embed_operator(n, b, "-")
                        + embed_operator(n, a, "-") @ embed_operator(n, b, "+"))
            h += w * (zz + ff)
        else:
            h += w * zz
    return h


def build_liquid_hamiltonian(params: LiquidParams) -> np.ndarray:
    """Full rotating-frame Hamiltonian including omega1 Ix and the I offset."""
    h = liquid_static_hamiltonian(params.system, params.i_spin, params.i_offset)
    return h + params.omega1 * embed_operator(params.system.n, params.i_spin, "x")


@lru_cache(maxsize=64)
def _tilt_rotation(n: int, i_spin: int) -> np.ndarray:
    c = np.cos(np.pi / 4)
    r1 = np.array([[c, -c], [c, c]], dtype=complex)  # exp(-i pi/2 Iy) on one spin
    mats = [np.eye(2)] * n
    mats[i_spin] = r1
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    out.flags.writeable = False
    return out


def tilt_to_rf_frame(h: np.ndarray, system: SpinSystem | int, i_spin: int | None = None,
                     inverse: bool = False) -> np.ndarray:
    """exp(+i pi/2 Iy) h exp(-i pi/2 Iy): Ix -> Iz, Iz -> -Ix. ``inverse`` undoes it."""
    n = system.n if isinstance(system, SpinSystem) else int(system)
    if i_spin is None:
        i_spin = system.rare_spin()
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("tilt expects a Hermitian operator")
    r = _tilt_rotation(n, int(i_spin))
    return r @ h @ r.conj().T if inverse else r.conj().T @ h @ r


# --------------------------------------------------------------- AHT pieces

def _couplings(params: LiquidParams) -> tuple[float, float, float]:
    s = params.system
    j1, j2 = s.j(params.s1, params.i_spin), s.j(params.s2, params.i_spin)
    return s.j(params.s1, params.s2), j1 + j2, j1 - j2


def liquid_fourier_components(params: LiquidParams) -> dict[int, np.ndarray]:
    """Interaction-frame Fourier components of the tilted 2-3 block.

    The frame removes Delta Sz' from the S pair and |Delta| Iz from I, so the
    zero-frequency part is (omega1 - |Delta|) Iz restricted to the block.
    Keys are multiples of |Delta|.
    """
    delta = params.delta
    if delta == 0:
        raise ValueError("Delta = 0: no shift difference to match")
    if params.i_offset:
        raise ValueError("Fourier decomposition assumes on-resonance irradiation")
    n, pair, i = params.system.n, params.pair, params.i_spin
    jss, _, jm = _couplings(params)
    sgn = 1 if delta > 0 else -1
    unit = fictitious_operator(params.system, pair, "2-3", "unit")
    sz = fictitious_operator(params.system, pair, "2-3", "z")
    sp = fictitious_operator(params.system, pair, "2-3", "+")
    sm = fictitious_operator(params.system, pair, "2-3", "-")
    ip, im, iz = (embed_operator(n, i, a) for a in "+-z")
    comps = {0: (params.omega1 - abs(delta)) * iz @ unit}
    terms = [(sgn, 0.5 * jss * sp), (-sgn, 0.5 * jss * sm),
             (1, -0.5 * jm * sz @ ip), (-1, -0.5 * jm * sz @ im)]
    for p, h in terms:
        comps[p] = comps[p] + h if p in comps else np.array(h)
    return comps


def liquid_aht_coefficients(params: LiquidParams) -> LiquidAht:
    """Closed-form second-order coefficients and the matched RF amplitude."""
    delta = params.delta
    if delta == 0:
        raise ValueError("Delta = 0: no shift difference to match")
    jss, jp, jm = _couplings(params)
    ad = abs(delta)
    a = (jm ** 2 + 4 * jss ** 2) / (16 * ad)
    b = (jm ** 2 - 4 * jss ** 2) / (16 * ad)
    c = jm * jss / (2 * ad)
    d = -(params.omega1 - ad) * jm / ad
    opt = ad + jss ** 2 / (2 * ad) - jm ** 2 / (8 * ad)
    sigma = params.system.shifts[params.s1] + params.system.shifts[params.s2]
    return LiquidAht(sigma, delta, jp, jm, jss, a, b, c, d, opt, params.omega1)


def _gate(params: LiquidParams) -> LiquidAht:
    aht = liquid_aht_coefficients(params)
    if abs(params.omega1 - aht.omega1_opt) > MATCH_TOL * abs(aht.delta):
        raise MatchingError(
            f"omega1/2pi = {params.omega1 / 2 / np.pi:.3f} Hz is not matched "
            f"(optimum {aht.omega1_opt / 2 / np.pi:.3f} Hz); analytic forms hold only at match")
    if params.i_offset:
        raise MatchingError("analytic forms assume on-resonance irradiation")
    return aht


def liquid_forward_analytic(params: LiquidParams, tau_grid, anti_amplitude: float = 4.0,
                            sum_amplitude: float = 0.0) -> TimeSeries:
    """Matched-RF trajectory from rho0 = a (S1z - S2z) + s (S1z + S2z).

    Channels use a_Q = Tr(rho Q)/Tr(Q^2); with a = 4 the Ix channel peaks at
    4 when C tau = pi. The sum part commutes with the Hamiltonian.
    """
    aht = _gate(params)
    tau = np.asarray(tau_grid, dtype=float)
    cc = np.cos(aht.C * tau)
    sgn = 1.0 if aht.delta > 0 else -1.0
    ix = sgn * anti_amplitude * 0.5 * (1 - cc)
    anti = anti_amplitude * 0.5 * (1 + cc)
    return _pair_series(tau, ix, anti, sum_amplitude, aht, "forward")


def liquid_inverse_analytic(params: LiquidParams, tau_grid, i_amplitude: float = 1.0) -> TimeSeries:
    """Matched-RF trajectory from spin-locked I magnetization rho0 = p Ix.

    Half of the I order sits in the 2-3 block and is exchanged with the
    anti-longitudinal order; the anti channel peaks at p/2 when C tau = pi.
    """
    aht = _gate(params)
    tau = np.asarray(tau_grid, dtype=float)
    cc = np.cos(aht.C * tau)
    sgn = 1.0 if aht.delta > 0 else -1.0
    ix = i_amplitude * (0.75 + 0.25 * cc)
    anti = sgn * i_amplitude * 0.25 * (1 - cc)
    return _pair_series(tau, ix, anti, 0.0, aht, "inverse")


def _pair_series(tau, ix, anti, sum_amp, aht, kind) -> TimeSeries:
    ch = {
        "Ix": ix,
        "S1z": sum_amp + anti,
        "S2z": sum_amp - anti,
        "S1z-S2z": anti,
    }
    meta = {"model": f"aht-{kind}", "C_rad_s": float(aht.C),
            "omega1_opt_rad_s": float(aht.omega1_opt), "delta_rad_s": float(aht.delta)}
    return TimeSeries(tau, ch, meta)
