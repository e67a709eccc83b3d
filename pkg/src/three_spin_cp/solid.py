"""MAS solids: dipolar Fourier sets, time-periodic Hamiltonians, second-order AHT.

Under magic-angle spinning a secular dipolar coupling becomes
d(t) = sum_{n=+-1,+-2} d_n exp(i n w_R t) with

    d_{+-1} = -(b / (2 sqrt 2)) sin(2 beta) exp(+-i gamma)
    d_{+-2} = (b / 4) sin^2(beta) exp(+-2 i gamma)

for a pair whose internuclear vector has polar angle beta and azimuth gamma
in the rotor frame. With k = w_R / |Delta| the interaction-frame
Hamiltonian of the designated three-spin block has components at
p = n k +- 1 and the second-order average Hamiltonian reduces to

    A (Iz + Sz') + B (Iz - Sz') + C1 ZQx + C2 ZQy          (Delta > 0)

whose B, C1, C2 part drives an effective rotation at
w_eff = sqrt(4 B^2 + C_eff^2) tilted by phi, tan(phi) = C_eff / (2 B).
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import constants
from scipy.spatial.transform import Rotation

from .errors import ResonanceError, SpinSystemError
from .rf import RampCoefficient, RfProfile
from .series import TimeSeries
from .spin_algebra.operators import embed_operator, fictitious_operator
from .spin_algebra.propagation import ModulatedHamiltonian
from .spin_algebra.system import ABUNDANT, SpinSystem

ORDERS = (-2, -1, 1, 2)
RESONANCE_TOL = 1e-6


def dipolar_constant(gamma_i: float, gamma_j: float, r: float) -> float:
    """b = -(mu0 / 4 pi) gamma_i gamma_j hbar / r^3 in rad/s, with r in angstrom."""
    if not r > 0:
        raise ValueError("internuclear distance must be positive")
    r_m = r * 1e-10
    return -constants.mu_0 / (4 * np.pi) * gamma_i * gamma_j * constants.hbar / r_m ** 3


@dataclass(frozen=True)
class CrystalliteOrientation:
    """Euler angles (radians) taking molecular-frame vectors to the rotor frame.

    The rotation is R = Rz(gamma) Ry(beta) Rz(alpha) acting on vectors, so
    gamma is a rotation about the rotor axis.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.alpha, self.beta, self.gamma])):
            raise ValueError("Euler angles must be finite")
        if not -1e-12 <= self.beta <= np.pi + 1e-12:
            raise ValueError("beta must lie in [0, pi]")

    @classmethod
    def from_degrees(cls, alpha: float, beta: float, gamma: float) -> "CrystalliteOrientation":
        return cls(*np.deg2rad([alpha, beta, gamma]))

    def degrees(self) -> tuple[float, float, float]:
        return tuple(float(x) for x in np.rad2deg([self.alpha, self.beta, self.gamma]))

    def rotation(self) -> Rotation:
        return Rotation.from_euler("zyz", [self.alpha, self.beta, self.gamma])


def pair_rotor_angles(system: SpinSystem, pair, orientation: CrystalliteOrientation) -> tuple[float, float]:
    """Polar and azimuthal angle (beta_p, gamma_p) of a pair vector in the rotor frame."""
    i, j = pair
    v = orientation.rotation().apply(system.pair_axis(i, j))
    beta = float(np.arccos(np.clip(v[2], -1.0, 1.0)))
    gamma = float(np.arctan2(v[1], v[0]) % (2 * np.pi))
    return beta, gamma


def mas_fourier_coefficients(b: float, beta_p: float, gamma_p: float) -> dict[int, complex]:
    """Fourier coefficients d_n, n = +-1, +-2, of a spinning dipolar coupling."""
    d1 = -(b / (2 * np.sqrt(2))) * np.sin(2 * beta_p)
    d2 = (b / 4) * np.sin(beta_p) ** 2
    return {
        1: d1 * np.exp(1j * gamma_p), -1: d1 * np.exp(-1j * gamma_p),
        2: d2 * np.exp(2j * gamma_p), -2: d2 * np.exp(-2j * gamma_p),
    }


@dataclass(frozen=True)
class FourierSet:
    """Per-pair MAS Fourier coefficients, keyed by index pairs (i < j)."""

    pairs: Mapping[tuple[int, int], Mapping[int, complex]]

    def __post_init__(self):
        clean = {}
        for (i, j), coeffs in dict(self.pairs).items():
            key = (i, j) if i < j else (j, i)
            c = {n: complex(coeffs.get(n, 0.0)) for n in ORDERS}
            for n in (1, 2):
                if abs(c[-n] - np.conj(c[n])) > 1e-12 * max(1.0, abs(c[n])):
                    raise ValueError(f"pair {key}: d(-{n}) must equal conj(d({n}))")
            clean[key] = MappingProxyType(c)
        object.__setattr__(self, "pairs", MappingProxyType(clean))

    def get(self, i: int, j: int) -> Mapping[int, complex]:
        key = (i, j) if i < j else (j, i)
        return self.pairs.get(key, MappingProxyType({n: 0j for n in ORDERS}))

    def time_domain(self, i: int, j: int, t, omega_r: float) -> np.ndarray:
        c = self.get(i, j)
        t = np.asarray(t, dtype=float)
        return 2 * np.real(c[1] * np.exp(1j * omega_r * t) + c[2] * np.exp(2j * omega_r * t))


def fourier_sets(system: SpinSystem, orientation: CrystalliteOrientation) -> FourierSet:
    """Fourier set for every pair carrying a dipolar constant."""
    out = {}
    for (i, j), b in system.dipolar_constants.items():
        beta, gamma = pair_rotor_angles(system, (i, j), orientation)
        out[(i, j)] = mas_fourier_coefficients(b, beta, gamma)
    return FourierSet(out)


class _FourierCoefficient:
    """Real coefficient 2 Re(d1 e^{i w t} + d2 e^{2 i w t}) as a vectorized callable."""

    def __init__(self, coeffs: Mapping[int, complex], omega_r: float):
        self.d1, self.d2, self.w = complex(coeffs[1]), complex(coeffs[2]), float(omega_r)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return 2 * np.real(self.d1 * np.exp(1j * self.w * t) + self.d2 * np.exp(2j * self.w * t))


def _pair_operator(system: SpinSystem, i: int, j: int) -> np.ndarray:
    n = system.n
    zz = embed_operator(n, i, "z") @ embed_operator(n, j, "z")
    if system.spins[i].species == system.spins[j].species:
        ff = (embed_operator(n, i, "+") @ embed_operator(n, j, "-")
              + embed_operator(n, i, "-") @ embed_operator(n, j, "+"))
        return 2 * zz - 0.5 * ff
    return 2 * zz


def frequency_scale(system: SpinSystem, omega1: float = 0.0) -> float:
    """Largest of |omega1|, the abundant-spin shift spread and coupling magnitudes (rad/s)."""
    s = [system.shifts[k] for k in system.abundant]
    spread = (max(s) - min(s)) if s else 0.0
    vals = [abs(omega1), spread]
    vals += [abs(v) for v in system.j_couplings.values()]
    vals += [abs(v) for v in system.dipolar_constants.values()]
    return float(max(vals))


def mas_hamiltonian(system: SpinSystem, fourier: FourierSet, omega_r: float, omega1: float = 0.0,
                    i_offset: float = 0.0, i_spin: int | None = None, rf: RfProfile | None = None,
                    tau: float | None = None, rf_scale: float = 1.0) -> ModulatedHamiltonian:
    """Rotating-frame MAS Hamiltonian as a modulated operator sum.

    Homonuclear pairs carry d(t) [2 Sz Sz - (S+S- + S-S+)/2], heteronuclear
    pairs 2 d(t) Sz Iz. Isotropic J couplings and shifts are static. A ramped
    ``rf`` profile over a lock of length ``tau`` replaces ``omega1`` and
    breaks periodicity.
    """
    from .liquid import liquid_static_hamiltonian

    if not omega_r > 0:
        raise ValueError("spinning rate must be positive")
    i_spin = system.rare_spin() if i_spin is None else system.index(i_spin)
    static = liquid_static_hamiltonian(system, i_spin, i_offset)
    ix = embed_operator(system.n, i_spin, "x")
    ops, coefs = [], []
    for (i, j), b in system.dipolar_constants.items():
        if (i, j) not in fourier.pairs:
            raise SpinSystemError(f"no Fourier data for pair {system.labels[i]}-{system.labels[j]}")
        c = fourier.get(i, j)
        if not any(abs(c[n]) for n in ORDERS):
            continue
        ops.append(_pair_operator(system, i, j))
        coefs.append(_FourierCoefficient(c, omega_r))
    nominal = omega1 if rf is None else rf.nominal
    fmax = max(frequency_scale(system, nominal * rf_scale * 1.05), abs(system.shifts[i_spin] + i_offset))
    period = 2 * np.pi / omega_r
    if rf is None or rf.is_constant:
        static = static + rf_scale * nominal * ix
        return ModulatedHamiltonian(static, tuple(ops), tuple(coefs), period, fmax)
    if tau is None:
        raise ValueError("a ramped RF profile needs the lock time tau")
    ops.append(ix)
    coefs.append(RampCoefficient(rf, tau, rf_scale))
    return ModulatedHamiltonian(static, tuple(ops), tuple(coefs), None, fmax)


def sample_mas_hamiltonian(system: SpinSystem, fourier: FourierSet, omega1: float, i_offset: float,
                           omega_r: float, t: float) -> np.ndarray:
    """MAS Hamiltonian at a single time t (constant RF)."""
    return mas_hamiltonian(system, fourier, omega_r, omega1, i_offset)(t)


# ------------------------------------------------------------ AHT

def _check_k(k: float) -> None:
    if not np.isfinite(k):
        raise ValueError("k must be finite")
    for r in (1.0, 2.0):
        if abs(abs(k) - r) < RESONANCE_TOL:
            raise ResonanceError(
                f"k = {k} sits at |k| = {r:g}: second-order AHT diverges at the onset of an "
                "alternative HORROR-like recoupling")


def solid_fourier_components(system: SpinSystem, s_pair, i_spin: int, fourier: FourierSet, delta: float,
                             k: float, omega1: float | None = None) -> dict[float, np.ndarray]:
    """Interaction-frame components at p = n k +- 1 (keys in units of |Delta|).

    The p = 0 part is (omega1 - |Delta|) Iz on the 2-3 block, zero when
    ``omega1`` is omitted (matched).
    """
    if delta == 0:
        raise ValueError("Delta = 0: no shift difference to match")
    s1, s2 = (system.index(x) for x in s_pair)
    i_spin = system.index(i_spin)
    n = system.n
    sgn = 1 if delta > 0 else -1
    unit = fictitious_operator(system, (s1, s2), "2-3", "unit")
    sz = fictitious_operator(system, (s1, s2), "2-3", "z")
    sp = fictitious_operator(system, (s1, s2), "2-3", "+")
    sm = fictitious_operator(system, (s1, s2), "2-3", "-")
    ip, im, iz = (embed_operator(n, i_spin, a) for a in "+-z")
    dss = fourier.get(s1, s2)
    d1, d2 = fourier.get(s1, i_spin), fourier.get(s2, i_spin)
    comps: dict[float, np.ndarray] = {}

    def add(p, h):
        key = float(p) + 0.0
        comps[key] = comps[key] + h if key in comps else np.array(h, dtype=complex)

    add(0.0, (0.0 if omega1 is None else omega1 - abs(delta)) * iz @ unit)
    for m in ORDERS:
        dm = d1[m] - d2[m]
        add(m * k + sgn, -0.5 * dss[m] * sp)
        add(m * k - sgn, -0.5 * dss[m] * sm)
        add(m * k + 1, -dm * sz @ ip)
        add(m * k - 1, -dm * sz @ im)
    return comps


@dataclass(frozen=True)
class SolidAht:
    """Second-order coefficients on the basis suited to the sign of Delta.

    For Delta > 0: A (Iz + Sz') + B (Iz - Sz') + C1 ZQx + C2 ZQy.
    For Delta < 0: A (Iz + Sz') + B (Iz - Sz') + C1 DQx + C2 DQy, where the
    Iz + Sz' term now mediates the transfer. ``offset`` is the mediating
    coefficient including any RF mismatch (omega1 - |Delta|)/2.
    """

    k: float
    delta: float
    A: float
    B: float
    C1: float
    C2: float
    delta_sign: str
    rf_mismatch: float = 0.0

    @property
    def offset(self) -> float:
        base = self.B if self.delta_sign == "positive" else self.A
        return base + 0.5 * self.rf_mismatch

    @property
    def c_eff(self) -> float:
        return float(np.hypot(self.C1, self.C2))

    @property
    def chi(self) -> float:
        return float(np.arctan2(self.C2, self.C1))

    @property
    def omega_eff(self) -> float:
        return float(np.hypot(2 * self.offset, self.c_eff))

    @property
    def phi(self) -> float:
        return float(np.arctan2(self.c_eff, 2 * self.offset))

    @property
    def basis(self) -> str:
        return "ZQ" if self.delta_sign == "positive" else "DQ"


def solid_aht_coefficients(d_ss: Mapping[int, complex], d_minus: Mapping[int, complex], delta: float, k: float,
                           delta_sign: str | None = None, omega1: float | None = None) -> SolidAht:
    """Closed-form second-order coefficients from the pair Fourier data.

    ``d_ss`` are the S1-S2 coefficients, ``d_minus`` the differences
    d_S1I - d_S2I. ``delta`` sets the scale |Delta|; its sign is used unless
    ``delta_sign`` is given. ``omega1`` adds the RF mismatch to the offset.
    """
    if delta == 0:
        raise ValueError("Delta = 0: no shift difference to match")
    _check_k(k)
    if delta_sign is None:
        delta_sign = "positive" if delta > 0 else "negative"
    if delta_sign not in ("positive", "negative"):
        raise ValueError("delta_sign must be 'positive' or 'negative'")
    ad = abs(delta)
    d = {n: complex(d_ss.get(n, 0.0)) for n in ORDERS}
    dm = {n: complex(d_minus.get(n, 0.0)) for n in ORDERS}
    f1, f2 = 1 - 4 * k ** 2, 1 - k ** 2
    den = f1 * f2
    ss1, ss2 = d[-1] * d[1], d[-2] * d[2]
    hh1, hh2 = dm[-1] * dm[1], dm[-2] * dm[2]
    a = ((ss1 + hh1) * f1 + (ss2 + hh2) * f2) / (2 * ad * den)
    b = -((ss1 - hh1) * f1 + (ss2 - hh2) * f2) / (2 * ad * den)
    c1 = -((dm[-1] * d[1] + dm[1] * d[-1]) * f1 + (dm[-2] * d[2] + dm[2] * d[-2]) * f2) / (ad * den)
    c2 = -1j * k * ((dm[-1] * d[1] - dm[1] * d[-1]) * f1
                    + 2 * (dm[-2] * d[2] - dm[2] * d[-2]) * f2) / (ad * den)
    vals = np.array([a, b, c1, c2])
    scale = max(np.max(np.abs(vals)), 1e-300)
    if np.max(np.abs(vals.imag)) > 1e-10 * scale:
        raise ValueError("coefficients not real: Fourier inputs lack conjugate symmetry")
    a, b, c1, c2 = (float(v.real) for v in vals)
    if delta_sign == "negative":
        # mirrored frame: the Iz + Sz' and Iz - Sz' roles swap, DQ replaces ZQ
        a, b, c1, c2 = b, a, -c1, -c2
    mismatch = 0.0 if omega1 is None else omega1 - ad
    return SolidAht(float(k), float(delta), a, b, c1, c2, delta_sign, mismatch)


def designated_fourier(system: SpinSystem, fourier: FourierSet, s_pair, i_spin) -> tuple[dict, dict]:
    """(d_SS, D_-) Fourier entries of a designated pair and rare spin."""
    s1, s2 = (system.index(x) for x in s_pair)
    i_spin = system.index(i_spin)
    dss = dict(fourier.get(s1, s2))
    a, b = fourier.get(s1, i_spin), fourier.get(s2, i_spin)
    return dss, {n: a[n] - b[n] for n in ORDERS}


def solid_forward_analytic(aht: SolidAht, tau_grid, anti_amplitude: float = 4.0,
                           sum_amplitude: float = 0.0) -> TimeSeries:
    """Effective-rotation trajectory from rho0 = a (S1z - S2z) + s (S1z + S2z).

    Ix = +-(a/2) sin^2(phi) (1 - cos(w_eff t)), the sign following Delta.
    """
    tau = np.asarray(tau_grid, dtype=float)
    s2 = np.sin(aht.phi) ** 2
    osc = 1 - np.cos(aht.omega_eff * tau)
    sgn = 1.0 if aht.delta_sign == "positive" else -1.0
    ix = sgn * 0.5 * anti_amplitude * s2 * osc
    anti = anti_amplitude * (1 - 0.5 * s2 * osc)
    ch = {"Ix": ix, "S1z": sum_amplitude + anti, "S2z": sum_amplitude - anti, "S1z-S2z": anti}
    meta = {"model": "aht-solid", "k": aht.k, "omega_eff_rad_s": aht.omega_eff, "phi_rad": aht.phi,
            "c_eff_rad_s": aht.c_eff}
    return TimeSeries(tau, ch, meta)


def static_matching_rf(delta: float, d_ss: float, d_s1i: float, d_s2i: float) -> float:
    """Static single-crystal matching amplitude (advisory only; weak-coupling limit)."""
    if delta == 0:
        raise ValueError("Delta = 0: no shift difference to match")
    ad = abs(delta)
    return ad + d_ss ** 2 / (2 * ad) - (d_s1i - d_s2i) ** 2 / (2 * ad)


def abundant_pair_check(system: SpinSystem, s_pair) -> None:
    for s in s_pair:
        if system.spins[system.index(s)].species != ABUNDANT:
            raise SpinSystemError(f"{s!r} is not an abundant spin")
