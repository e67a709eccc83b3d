"""Shipped parameter presets and figure dataset bundles."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ParsedConfig, parse_config_document
from .csvio import write_csv
from .liquid import LiquidParams, liquid_aht_coefficients
from .powder import generate_orientations, rf_inhomogeneity
from .rf import RfProfile
from .scenarios import ScenarioConfig, compare_aht_vs_brute, run_buildup, scan_offset, scan_rf
from .series import Profile, TimeSeries

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
FIGURES = ("fig2", "fig3", "fig4", "fig5", "s1", "s2", "s4")
PRESETS = FIGURES + ("glycine",)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return (resources.files("three_spin_cp") / "presets" / f"{name}.cfg").read_text()


def load_preset(name: str) -> ParsedConfig:
    return parse_config_document(preset_text(name))


@dataclass
class Bundle:
    """Files written for one figure, with a short description of each."""

    figure: str
    out_dir: Path
    files: dict[str, str] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    data: dict[str, TimeSeries | Profile] = field(default_factory=dict)

    def add(self, name: str, obj: TimeSeries | Profile, description: str) -> None:
        write_csv(obj, self.out_dir / name)
        cols = obj.names if isinstance(obj, TimeSeries) else tuple(obj.columns)
        self.files[name] = f"{description} [{', '.join(cols)}]"
        self.data[name] = obj

    def write_manifest(self, preset: str) -> Path:
        lines = [f"# figure: {self.figure}", "# files (file -> contents [channels])"]
        lines += [f"{k} -> {v}" for k, v in self.files.items()]
        if self.summary:
            lines.append("# summary")
            lines += [f"{k} = {v!r}" for k, v in self.summary.items()]
        lines.append("# preset parameters")
        lines += [f"#   {ln}" for ln in preset.splitlines()]
        path = self.out_dir / "manifest.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


@dataclass(frozen=True)
class RunOptions:
    quick: bool = False
    orientations: tuple[int, int] | None = None
    seed: int | None = None
    step: float | None = None
    workers: int = 1

    def apply(self, cfg: ScenarioConfig) -> ScenarioConfig:
        changes = {"workers": self.workers}
        if self.step is not None:
            changes["step"] = self.step
        if self.seed is not None:
            changes["seed"] = self.seed
        if cfg.phase == "solid" and self.orientations is not None:
            changes["orientations"] = generate_orientations("fibonacci", *self.orientations, seed=changes.get("seed", cfg.seed))
        return cfg.replace(**changes)


def _matched(cfg: ScenarioConfig, shifts) -> ScenarioConfig:
    """Liquid config with new shifts and the RF moved to the new matched amplitude."""
    system = cfg.system.replace(shifts=tuple(shifts))
    opt = liquid_aht_coefficients(LiquidParams(system, 0.0, cfg.s1, cfg.s2, cfg.i_spin)).omega1_opt
    return cfg.replace(system=system, rf=cfg.rf.with_nominal(opt))


def _liquid_variant(cfg: ScenarioConfig, delta_hz: float) -> ScenarioConfig:
    """Same couplings with the designated pair at +-delta/2."""
    sh = list(cfg.system.shifts)
    sh[cfg.s1], sh[cfg.s2] = TWO_PI * delta_hz / 2, -TWO_PI * delta_hz / 2
    return _matched(cfg, sh)


def _inhomogeneity_variants(cfg: ScenarioConfig, variants, n_out: int, step: float | None):
    for name, inhom_pct, ramp_pct in variants:
        c = cfg.replace(inhomogeneity=rf_inhomogeneity(inhom_pct) if inhom_pct else None,
                        rf=RfProfile.ramp(cfg.rf.nominal, ramp_pct / 100.0))
        if not c.rf.is_constant:
            c = c.replace(n_out=n_out, step=c.step or step)
        yield name, c


def _fig2(b: Bundle, p: ParsedConfig, opt: RunOptions) -> None:
    base = opt.apply(p.scenario)
    ramp_points = 11 if opt.quick else 41
    for d in (150.0, 300.0, 450.0):
        cfg = _liquid_variant(base, d)
        tag = f"d{d:g}"
        rep = compare_aht_vs_brute(cfg)
        b.add(f"buildup_{tag}_brute.csv", rep.brute, f"exact buildup, delta {d:g} Hz")
        b.add(f"buildup_{tag}_aht.csv", rep.analytic, f"second-order AHT buildup, delta {d:g} Hz")
        b.summary[f"rms_Ix_{tag}"] = rep.rms["Ix"]
        opt_hz = cfg.rf.nominal / TWO_PI
        grid = opt_hz + (np.arange(-20, 20.01, 1.0) if opt.quick else np.arange(-20, 20.001, 0.25))
        prof = scan_rf(cfg.replace(n_out=401 if opt.quick else cfg.n_out), TWO_PI * grid)
        b.add(f"rfscan_{tag}.csv", prof, f"RF matching profile, delta {d:g} Hz")
        b.summary[f"rf_optimum_hz_{tag}"] = prof.argmax("max_Ix")
        b.summary[f"rf_optimum_closed_form_hz_{tag}"] = opt_hz
        variants = [("cw_0pct", 0, 0), ("cw_5pct", 5, 0), ("ramp5_5pct", 5, 5)]
        if d == 450.0:
            variants.append(("ramp10_5pct", 5, 10))
        for name, c in _inhomogeneity_variants(cfg, variants, ramp_points, 1e-4):
            ts = run_buildup(c)
            b.add(f"inhom_{tag}_{name}.csv", ts, f"buildup {name.replace('_', ', ')}, delta {d:g} Hz")
            b.summary[f"final_Ix_{tag}_{name}"] = float(ts["Ix"][-1])


def _fig3(b: Bundle, p: ParsedConfig, opt: RunOptions) -> None:
    ts = run_buildup(opt.apply(p.scenario))
    b.add("inverse_buildup.csv", ts, "spin-lock driven creation of anti-longitudinal order")
    t, v = ts.peak("S1z-S2z")
    b.summary.update(peak_time_s=t, peak_anti=v)


def _fig4(b: Bundle, p: ParsedConfig, opt: RunOptions) -> None:
    cfg = opt.apply(p.scenario)
    rep = compare_aht_vs_brute(cfg)
    for m in rep.members:
        tag = m.label.replace("euler_deg=", "euler_").replace(",", "_")
        b.add(f"{tag}_brute.csv", m.brute, f"exact buildup, {m.label}")
        if m.analytic is not None:
            b.add(f"{tag}_aht.csv", m.analytic, f"second-order AHT buildup, {m.label}")
            b.summary[f"relative_rms_Ix_{tag}"] = m.relative_rms["Ix"]


def fig5_field(cfg: ScenarioConfig, scale: float) -> ScenarioConfig:
    """Scale all shifts and the RF amplitude (a different static field)."""
    system = cfg.system.replace(shifts=tuple(scale * s for s in cfg.system.shifts))
    return cfg.replace(system=system, rf=cfg.rf.with_nominal(scale * cfg.rf.nominal))


def _fig5(b: Bundle, p: ParsedConfig, opt: RunOptions) -> None:
    base = opt.apply(p.scenario)
    if opt.quick and opt.orientations is None:
        base = base.replace(orientations=generate_orientations("fibonacci", 8, 2, base.seed))
    for field_tag, scale in (("600MHz", 1.0), ("300MHz", 0.5)):
        cfg = fig5_field(base, scale)
        for mas in (20e3, 40e3, 80e3):
            c = cfg.replace(omega_r=TWO_PI * mas)
            mtag = f"{field_tag}_mas{mas / 1e3:g}k"
            ts = run_buildup(c)
            b.add(f"buildup_{mtag}.csv", ts, f"powder buildup at {c.rf.nominal / TWO_PI:g} Hz RF")
            b.summary[f"max_Ix_{mtag}"] = float(ts["Ix"].max())
            prof = scan_rf(c, scale * p.scan_omega1)
            b.add(f"rfscan_{mtag}.csv", prof, "powder RF matching profile")
        c = cfg.replace(omega_r=TWO_PI * 40e3)
        prof = scan_offset(c, p.scan_offset)
        b.add(f"offsetscan_{field_tag}_mas40k.csv", prof, "powder 13C offset profile")


def _inhomogeneity_figure(variants_for: Callable[[ScenarioConfig], list]) -> Callable:
    def run(b: Bundle, p: ParsedConfig, opt: RunOptions) -> None:
        for tag, cfg, variants in variants_for(opt.apply(p.scenario)):
            for name, c in _inhomogeneity_variants(cfg, variants, 11 if opt.quick else 41, 1e-4):
                ts = run_buildup(c)
                key = f"{tag}_{name}" if tag else name
                b.add(f"buildup_{key}.csv", ts, f"buildup {name.replace('_', ', ')}")
                b.summary[f"max_Ix_{key}"] = float(ts["Ix"].max())
    return run


def _s1_variants(cfg):
    cw = [("cw_0pct", 0, 0), ("cw_5pct", 5, 0), ("ramp5_5pct", 5, 5)]
    return [("300MHz", cfg, cw), ("600MHz", _scaled_liquid(cfg, 2.0), cw)]


def _scaled_liquid(cfg: ScenarioConfig, scale: float) -> ScenarioConfig:
    return _matched(cfg, [scale * s for s in cfg.system.shifts])


_RUNNERS = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "s1": _inhomogeneity_figure(_s1_variants),
    "s2": _inhomogeneity_figure(lambda c: [("", c, [("cw_0pct", 0, 0), ("cw_2.5pct", 2.5, 0),
                                                    ("cw_5pct", 5, 0), ("cw_10pct", 10, 0)])]),
    "s4": _inhomogeneity_figure(lambda c: [("cw", c, [("0pct", 0, 0), ("5pct", 5, 0)]),
                                           ("ramp10", c, [("0pct", 0, 10), ("5pct", 5, 10)])]),
}


def reproduce_figure(fig_id: str, out_dir: str | Path, options: RunOptions | None = None) -> Bundle:
    """Run a figure's simulations and write its CSV files plus ``manifest.txt``."""
    if fig_id not in _RUNNERS:
        raise KeyError(f"unknown figure {fig_id!r}; available: {', '.join(FIGURES)}")
    options = options or RunOptions()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parsed = load_preset(fig_id)
    bundle = Bundle(fig_id, out)
    log.info("reproducing %s into %s", fig_id, out)
    _RUNNERS[fig_id](bundle, parsed, options)
    bundle.write_manifest(preset_text(fig_id))
    return bundle
