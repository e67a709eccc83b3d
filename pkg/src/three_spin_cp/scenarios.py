"""Experiment drivers: buildups, RF and offset scans, AHT-vs-exact comparisons."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ResonanceError, SpinSystemError
from .liquid import LiquidParams, liquid_forward_analytic, liquid_inverse_analytic, liquid_static_hamiltonian
from .powder import EnsembleSpec, OrientationSet, ensemble_average
from .rf import RampCoefficient, RfProfile
from .series import Profile, TimeSeries
from .solid import (CrystalliteOrientation, designated_fourier, fourier_sets, frequency_scale, mas_hamiltonian,
                    solid_aht_coefficients, solid_forward_analytic)
from .spin_algebra.operators import amplitude, deviation_state, embed_operator
from .spin_algebra.propagation import ModulatedHamiltonian, evolve_piecewise
from .spin_algebra.system import ABUNDANT, SpinSystem

log = logging.getLogger(__name__)

PREP_KINDS = ("anti-longitudinal", "i-spinlock", "custom")
CONSERVATION_TOL = 1e-8
DIAGNOSTIC_KEYS = ("max_unitarity_error", "purity_drift", "sz_total_drift")
TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class InitialPrep:
    """Initial deviation state.

    ``anti-longitudinal``: sign * ratio * (S1z - S2z) on the designated pair.
    ``i-spinlock``: i_amplitude * Ix (spin-locked rare-spin magnetization).
    ``custom``: label -> amplitude; abundant spins get p Sz, the rare spin p Ix.
    """

    kind: str = "anti-longitudinal"
    sign: int = 1
    polarizations: Mapping[str, float] | None = None
    thermal_ratio: float = 4.0
    i_amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in PREP_KINDS:
            raise ValueError(f"initial prep must be one of {PREP_KINDS}")
        if self.sign not in (1, -1):
            raise ValueError("prep sign must be +1 or -1")
        if self.kind == "custom":
            if not self.polarizations:
                raise ValueError("custom prep needs a polarization list")
            object.__setattr__(self, "polarizations", MappingProxyType(dict(self.polarizations)))

    def terms(self, system: SpinSystem, s1: int, s2: int, i_spin: int) -> list[tuple[float, np.ndarray]]:
        n = system.n
        if self.kind == "anti-longitudinal":
            p = self.sign * self.thermal_ratio
            return [(p, embed_operator(n, s1, "z")), (-p, embed_operator(n, s2, "z"))]
        if self.kind == "i-spinlock":
            return [(self.i_amplitude, embed_operator(n, i_spin, "x"))]
        out = []
        for label, p in self.polarizations.items():
            k = system.index(label)
            axis = "z" if system.spins[k].species == ABUNDANT else "x"
            out.append((float(p), embed_operator(n, k, axis)))
        return out

    def describe(self) -> str:
        if self.kind == "custom":
            return "custom:" + ",".join(f"{k}={v:g}" for k, v in self.polarizations.items())
        if self.kind == "anti-longitudinal":
            return f"anti-longitudinal:{'+' if self.sign > 0 else '-'}{self.thermal_ratio:g}"
        return f"i-spinlock:{self.i_amplitude:g}"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed for one simulated experiment. Frequencies in rad/s.

    The output grid is ``out_grid`` when given, else ``n_out`` points on
    [0, tau_sl]; for solids the default grid is rotor-synchronized.
    """

    phase: str
    system: SpinSystem
    rf: RfProfile
    tau_sl: float
    s1: int | str | None = None
    s2: int | str | None = None
    i_spin: int | str | None = None
    prep: InitialPrep = field(default_factory=InitialPrep)
    inhomogeneity: EnsembleSpec | None = None
    omega_r: float = 0.0
    orientations: OrientationSet | None = None
    i_offset: float = 0.0
    n_out: int = 201
    out_grid: tuple[float, ...] | None = None
    step: float | None = None
    scheme: str = "magnus4"
    seed: int = 0
    workers: int = 1
    label: str = ""

    def __post_init__(self):
        if self.phase not in ("liquid", "solid"):
            raise ValueError("phase must be 'liquid' or 'solid'")
        sys_ = self.system
        i = sys_.rare_spin() if self.i_spin is None else sys_.index(self.i_spin)
        ab = sys_.abundant
        if (self.s1 is None or self.s2 is None) and len(ab) < 2:
            raise SpinSystemError("need two abundant spins for the transfer pair")
        s1 = ab[0] if self.s1 is None else sys_.index(self.s1)
        s2 = ab[1] if self.s2 is None else sys_.index(self.s2)
        if s1 == s2 or sys_.spins[s1].species != ABUNDANT or sys_.spins[s2].species != ABUNDANT:
            raise SpinSystemError("transfer pair must be two distinct abundant spins")
        if len(sys_.rare) != 1:
            raise SpinSystemError("CP scenarios need exactly one rare spin")
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)
        object.__setattr__(self, "i_spin", i)
        if not (np.isfinite(self.tau_sl) and self.tau_sl >= 0):
            raise ValueError("tau_sl must be finite and >= 0")
        if self.phase == "solid":
            if not self.omega_r > 0:
                raise ValueError("solid phase needs a positive spinning rate")
            if not sys_.dipolar_constants:
                raise ValueError("solid phase needs geometry or explicit dipolar constants")
        else:
            if not any(sys_.j_couplings.values()):
                raise ValueError("liquid phase needs a J-coupling network")
            if self.orientations is not None:
                raise ValueError("orientations only apply to solids")
        if self.inhomogeneity is not None and self.inhomogeneity.kind != "rf-scale":
            raise ValueError("inhomogeneity must be an rf-scale ensemble")
        if self.out_grid is not None:
            g = np.asarray(self.out_grid, dtype=float)
            if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > self.tau_sl * (1 + 1e-12):
                raise ValueError("out_grid must be strictly increasing within [0, tau_sl]")
            object.__setattr__(self, "out_grid", tuple(float(x) for x in g))
        if self.n_out < 1:
            raise ValueError("n_out must be >= 1")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    # ------------------------------------------------------------ helpers
    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @property
    def delta(self) -> float:
        return self.system.shifts[self.s1] - self.system.shifts[self.s2]

    @property
    def k(self) -> float:
        return self.omega_r / abs(self.delta) if self.delta else np.inf

    def times(self) -> np.ndarray:
        if self.out_grid is not None:
            return np.asarray(self.out_grid)
        if self.tau_sl == 0 or self.n_out == 1:
            return np.array([self.tau_sl])
        if self.phase == "solid":
            tr = TWO_PI / self.omega_r
            m = np.unique(np.round(np.linspace(0.0, self.tau_sl / tr, self.n_out)))
            m = m[m * tr <= self.tau_sl * (1 + 1e-12)]
            return m * tr
        return np.linspace(0.0, self.tau_sl, self.n_out)

    def observables(self) -> dict[str, np.ndarray]:
        n = self.system.n
        z1, z2 = embed_operator(n, self.s1, "z"), embed_operator(n, self.s2, "z")
        obs = {"Ix": embed_operator(n, self.i_spin, "x"), "S1z": z1, "S2z": z2, "S1z-S2z": z1 - z2}
        for k in self.system.abundant:
            obs[f"{self.system.labels[k]}z"] = embed_operator(n, k, "z")
        return obs

    def rho0(self) -> np.ndarray:
        return deviation_state(self.system, self.prep.terms(self.system, self.s1, self.s2, self.i_spin))

    def orientation_set(self) -> OrientationSet:
        if self.orientations is not None:
            return self.orientations
        return OrientationSet.explicit([CrystalliteOrientation()])

    def describe(self) -> dict[str, Any]:
        s = self.system
        md: dict[str, Any] = {
            "label": self.label,
            "phase": self.phase,
            "spins": ",".join(f"{sp.label}:{sp.isotope}" for sp in s.spins),
            "transfer": f"{s.labels[self.s1]},{s.labels[self.s2]},{s.labels[self.i_spin]}",
            "shifts_hz": ",".join(f"{lab}:{v / TWO_PI:.9g}" for lab, v in zip(s.labels, s.shifts)),
            "j_hz": ",".join(f"{s.labels[a]}-{s.labels[b]}:{v / TWO_PI:.9g}" for (a, b), v in s.j_couplings.items()),
            "omega1_hz": self.rf.nominal / TWO_PI,
            "ramp_percent": 100 * self.rf.span,
            "tau_sl_s": self.tau_sl,
            "prep": self.prep.describe(),
            "i_offset_hz": self.i_offset / TWO_PI,
            "scheme": self.scheme,
        }
        if self.phase == "solid":
            md["mas_hz"] = self.omega_r / TWO_PI
            md["dipolar_hz"] = ",".join(f"{s.labels[a]}-{s.labels[b]}:{v / TWO_PI:.9g}"
                                        for (a, b), v in s.dipolar_constants.items())
            o = self.orientation_set()
            md["orientations"] = f"{o.scheme}:{o.n_sphere}x{o.n_gamma}"
        if self.inhomogeneity is not None:
            md["inhomogeneity"] = self.inhomogeneity.label
        if self.step is not None:
            md["step_s"] = self.step
        return md


# ---------------------------------------------------------------- buildups

def _hamiltonian(config: ScenarioConfig, orientation, rf_scale: float, tau: float | None) -> ModulatedHamiltonian:
    s = config.system
    if config.phase == "solid":
        fs = fourier_sets(s, orientation)
        return mas_hamiltonian(s, fs, config.omega_r, config.rf.nominal, config.i_offset, config.i_spin,
                               rf=None if config.rf.is_constant else config.rf, tau=tau, rf_scale=rf_scale)
    static = liquid_static_hamiltonian(s, config.i_spin, config.i_offset)
    fmax = max(frequency_scale(s, 1.05 * rf_scale * config.rf.nominal), abs(s.shifts[config.i_spin] + config.i_offset))
    ix = embed_operator(s.n, config.i_spin, "x")
    if config.rf.is_constant:
        return ModulatedHamiltonian(static + rf_scale * config.rf.nominal * ix, max_frequency=fmax)
    return ModulatedHamiltonian(static, (ix,), (RampCoefficient(config.rf, tau, rf_scale),), None, fmax)


def run_member(config: ScenarioConfig, orientation: CrystalliteOrientation | None = None,
               rf_scale: float = 1.0) -> TimeSeries:
    """Exact buildup for one crystallite and one RF scale factor."""
    times = config.times()
    rho0 = config.rho0()
    obs = config.observables()
    names = list(obs)
    if config.rf.is_constant:
        h = _hamiltonian(config, orientation, rf_scale, None)
        ts = evolve_piecewise(h, rho0, float(times[-1]), config.step, obs, times, scheme=config.scheme)
        channels = {k: ts[k] for k in names}
        unit, purity = ts.metadata["max_unitarity_error"], ts.metadata["purity_drift"]
        meta = dict(ts.metadata)
    else:
        # a ramp spans the whole lock, so every lock time is its own experiment
        cols = {k: np.empty(times.size) for k in names}
        unit = purity = 0.0
        meta = {}
        for j, tau in enumerate(times):
            if tau == 0:
                for k in names:
                    cols[k][j] = amplitude(rho0, obs[k])
                continue
            h = _hamiltonian(config, orientation, rf_scale, float(tau))
            ts = evolve_piecewise(h, rho0, float(tau), config.step, obs, [float(tau)], scheme=config.scheme)
            for k in names:
                cols[k][j] = ts[k][0]
            unit = max(unit, ts.metadata["max_unitarity_error"])
            purity = max(purity, ts.metadata["purity_drift"])
            meta = dict(ts.metadata)
        channels = cols
    sz = sum(channels[f"{config.system.labels[k]}z"] for k in config.system.abundant)
    channels["Sz_total"] = sz
    sz0 = sum(amplitude(rho0, obs[f"{config.system.labels[k]}z"]) for k in config.system.abundant)
    drift = float(np.max(np.abs(sz - sz0))) / max(1.0, abs(sz0))
    meta.update(max_unitarity_error=float(unit), purity_drift=float(purity), sz_total_drift=drift)
    return TimeSeries(times, channels, meta)


def run_buildup(config: ScenarioConfig) -> TimeSeries:
    """Exact buildup, averaged over orientations and RF inhomogeneity as configured."""
    if config.phase == "solid":
        ospec = EnsembleSpec.from_orientations(config.orientation_set())
    else:
        ospec = EnsembleSpec("orientation", (None,), (1.0,), "none")
    rspec = config.inhomogeneity or EnsembleSpec("rf-scale", (1.0,), (1.0,), "none")
    inner_workers = config.workers if len(ospec) > 1 else 1
    outer_workers = config.workers if len(ospec) == 1 else 1

    def over_orientations(scale):
        return ensemble_average(lambda o: run_member(config, o, scale), ospec, inner_workers)

    ts = ensemble_average(over_orientations, rspec, outer_workers)
    meta = dict(ts.metadata)
    meta.update(config.describe())
    if meta.get("sz_total_drift", 0.0) > CONSERVATION_TOL:
        log.warning("sum of Sz drifted by %.3e", meta["sz_total_drift"])
    return TimeSeries(ts.times, ts.channels, meta)


# ---------------------------------------------------------------- scans

def _scan(config: ScenarioConfig, grid, make, parameter: str) -> Profile:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("scan grid must be a nonempty 1-d array")
    mx, at, tmax = (np.empty(grid.size) for _ in range(3))
    diag = dict.fromkeys(DIAGNOSTIC_KEYS, 0.0)
    for j, v in enumerate(grid):
        ts = run_buildup(make(v))
        ix = ts["Ix"]
        i = int(np.argmax(ix))
        mx[j], at[j], tmax[j] = ix[i], ix[-1], ts.times[i]
        for key in DIAGNOSTIC_KEYS:
            diag[key] = max(diag[key], float(ts.metadata.get(key, 0.0)))
    meta = config.describe()
    meta.update(diag)
    meta.update({"tau_fixed_s": float(config.times()[-1]),
                 f"argmax_{parameter}": float(grid[int(np.argmax(mx))] / TWO_PI)})
    return Profile(parameter, grid / TWO_PI, {"max_Ix": mx, "Ix_at_tau": at, "tau_at_max_s": tmax}, meta)


def scan_rf(config: ScenarioConfig, omega1_grid: Sequence[float]) -> Profile:
    """Max-over-tau and fixed-tau Ix for each RF amplitude (rad/s); values reported in Hz."""
    return _scan(config, omega1_grid, lambda w: config.replace(rf=config.rf.with_nominal(float(w))), "omega1_hz")


def scan_offset(config: ScenarioConfig, offset_grid: Sequence[float]) -> Profile:
    """As :func:`scan_rf` with the rare-spin RF offset (rad/s) varied."""
    return _scan(config, offset_grid, lambda w: config.replace(i_offset=float(w)), "i_offset_hz")


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonReport:
    """Deviations between analytic AHT trajectories and exact propagation.

    ``relative_rms`` divides by the largest |brute-force| value of the
    channel. Multi-crystallite comparisons list per-member reports and
    carry the worst member values at the top level.
    """

    rms: Mapping[str, float]
    max_abs: Mapping[str, float]
    relative_rms: Mapping[str, float]
    omega1: float
    omega1_opt: float | None
    k: float | None = None
    degenerate: bool = False
    note: str = ""
    analytic: TimeSeries | None = None
    brute: TimeSeries | None = None
    members: tuple["ComparisonReport", ...] = ()
    label: str = ""

    def __post_init__(self):
        for m in (self.rms, self.max_abs, self.relative_rms):
            if any(not v >= 0 for v in m.values()):
                raise ValueError("deviations must be non-negative")


CHANNELS = ("Ix", "S1z-S2z")


def _deviations(analytic: TimeSeries, brute: TimeSeries):
    rms, mx, rel = {}, {}, {}
    for ch in CHANNELS:
        d = analytic[ch] - brute[ch]
        rms[ch] = float(np.sqrt(np.mean(d ** 2)))
        mx[ch] = float(np.max(np.abs(d)))
        peak = float(np.max(np.abs(brute[ch])))
        rel[ch] = rms[ch] / peak if peak > 0 else float(rms[ch] > 0) * np.inf if rms[ch] else 0.0
    return rms, mx, rel


def compare_aht_vs_brute(config: ScenarioConfig) -> ComparisonReport:
    """Compare the closed-form trajectory with exact propagation on the config grid.

    Liquids: the config RF must sit at the matched amplitude (MatchingError
    otherwise). Solids: each listed orientation is compared separately; a
    spinning ratio at |k| = 1 or 2 yields a report flagged ``degenerate``.
    """
    if config.inhomogeneity is not None or not config.rf.is_constant:
        raise ValueError("AHT comparison needs a constant, homogeneous RF field")
    times = config.times()
    prep = config.prep
    if config.phase == "liquid":
        params = LiquidParams(config.system, config.rf.nominal, config.s1, config.s2, config.i_spin, config.i_offset)
        if prep.kind == "anti-longitudinal":
            an = liquid_forward_analytic(params, times, prep.sign * prep.thermal_ratio)
        elif prep.kind == "i-spinlock":
            an = liquid_inverse_analytic(params, times, prep.i_amplitude)
        else:
            raise ValueError("analytic comparison needs an anti-longitudinal or spin-lock prep")
        brute = run_member(config)
        rms, mx, rel = _deviations(an, brute)
        return ComparisonReport(rms, mx, rel, config.rf.nominal, an.metadata["omega1_opt_rad_s"],
                                analytic=an, brute=brute, label=config.label)

    if prep.kind != "anti-longitudinal":
        raise ValueError("solid analytic comparison needs an anti-longitudinal prep")
    k = config.k
    members = []
    for o in config.orientation_set().members:
        brute = run_member(config, o)
        fs = fourier_sets(config.system, o)
        dss, dm = designated_fourier(config.system, fs, (config.s1, config.s2), config.i_spin)
        tag = "euler_deg=" + ",".join(f"{x:.6g}" for x in o.degrees())
        try:
            aht = solid_aht_coefficients(dss, dm, config.delta, k, omega1=config.rf.nominal)
        except ResonanceError as exc:
            members.append(ComparisonReport({}, {}, {}, config.rf.nominal, None, k, True, str(exc),
                                            None, brute, label=tag))
            continue
        an = solid_forward_analytic(aht, times, prep.sign * prep.thermal_ratio)
        rms, mx, rel = _deviations(an, brute)
        members.append(ComparisonReport(rms, mx, rel, config.rf.nominal, abs(config.delta), k,
                                        analytic=an, brute=brute, label=tag))
    degenerate = any(m.degenerate for m in members)
    worst = lambda attr: {ch: max(getattr(m, attr)[ch] for m in members) for ch in CHANNELS} if not degenerate else {}
    single = members[0] if len(members) == 1 else None
    return ComparisonReport(worst("rms"), worst("max_abs"), worst("relative_rms"), config.rf.nominal,
                            abs(config.delta), k, degenerate, members[0].note if degenerate else "",
                            single.analytic if single else None, single.brute if single else None,
                            tuple(members), config.label)
