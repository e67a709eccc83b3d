"""Plain-text scenario configuration.

A document is a list of ``key = value`` lines, optionally grouped under
``[section]`` headers (sections only organize; all keys share one flat
namespace). ``#`` starts a comment. Keys carrying a physical quantity end in
a unit suffix (``_hz``, ``_s``, ``_percent``, ``_deg``, ``_angstrom``);
frequencies are given in Hz and converted to rad/s here.

Example::

    phase = liquid
    spins = H1:1H, H2:1H, C:13C
    transfer = H1, H2, C
    delta_hz = 450
    j_hz = H1-H2:8.5, H1-C:172, H2-C:8
    omega1_hz = match
    tau_sl_s = 1.0
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError
from .liquid import LiquidParams, liquid_aht_coefficients
from .powder import OrientationSet, generate_orientations, rf_inhomogeneity
from .rf import RfProfile
from .scenarios import InitialPrep, ScenarioConfig
from .solid import CrystalliteOrientation
from .spin_algebra.system import GAMMA, SpinSystem

TWO_PI = 2 * np.pi
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LABEL = r"[A-Za-z][A-Za-z0-9']*"


class _ValueError(Exception):
    """Value-level problem; carries an optional column offset into the value."""

    def __init__(self, msg: str, offset: int = 0):
        super().__init__(msg)
        self.offset = offset


# ----------------------------------------------------------- value parsers

def _number(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise _ValueError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v):
        raise _ValueError("value must be finite")
    return v


def _nonneg(text: str) -> float:
    v = _number(text)
    if v < 0:
        raise _ValueError("value must be >= 0")
    return v


def _positive(text: str) -> float:
    v = _number(text)
    if v <= 0:
        raise _ValueError("value must be > 0")
    return v


def _int(text: str, lo: int = 0) -> int:
    if not re.fullmatch(r"[-+]?\d+", text):
        raise _ValueError(f"expected an integer, got {text!r}")
    v = int(text)
    if v < lo:
        raise _ValueError(f"value must be >= {lo}")
    return v


def _items(text: str, sep: str = ","):
    """Yield (item, offset) for non-empty separated items."""
    pos = 0
    for part in text.split(sep):
        stripped = part.strip()
        if not stripped:
            raise _ValueError("empty list item", pos)
        yield stripped, pos + part.index(stripped[0])
        pos += len(part) + 1


def _spins(text: str):
    out = []
    for item, off in _items(text):
        m = re.fullmatch(rf"({_LABEL})\s*:\s*(\w+)(?:\s*:\s*(abundant|rare))?", item)
        if not m:
            raise _ValueError(f"spin entry {item!r} should read label:isotope", off)
        if m.group(2) not in GAMMA:
            raise _ValueError(f"unknown isotope {m.group(2)!r}; known: {', '.join(GAMMA)}", off)
        sp = {"abundant": "abundant-S", "rare": "rare-I"}.get(m.group(3))
        out.append((m.group(1), m.group(2)) + ((sp,) if sp else ()))
    return out


def _labels(text: str):
    out = []
    for item, off in _items(text):
        if not re.fullmatch(_LABEL, item):
            raise _ValueError(f"bad spin label {item!r}", off)
        out.append(item)
    return out


def _label_values(text: str):
    out = {}
    for item, off in _items(text):
        m = re.fullmatch(rf"({_LABEL})\s*:\s*({_NUM})", item)
        if not m:
            raise _ValueError(f"entry {item!r} should read label:value", off)
        out[m.group(1)] = float(m.group(2))
    return out


def _pair_values(text: str):
    out = {}
    for item, off in _items(text):
        m = re.fullmatch(rf"({_LABEL})\s*-\s*({_LABEL})\s*:\s*({_NUM})", item)
        if not m:
            raise _ValueError(f"entry {item!r} should read A-B:value", off)
        out[(m.group(1), m.group(2))] = float(m.group(3))
    return out


def _dipolar(text: str):
    """``A-B:value`` or ``A-B:value@(theta_deg, phi_deg)`` items separated by ';'."""
    out = {}
    for item, off in _items(text, ";"):
        m = re.fullmatch(rf"({_LABEL})\s*-\s*({_LABEL})\s*:\s*({_NUM})"
                         rf"(?:\s*@\s*\(\s*({_NUM})\s*,\s*({_NUM})\s*\))?", item)
        if not m:
            raise _ValueError(f"entry {item!r} should read A-B:value@(theta,phi)", off)
        axis = None
        if m.group(4) is not None:
            th, ph = np.radians(float(m.group(4))), np.radians(float(m.group(5)))
            axis = (np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th))
        out[(m.group(1), m.group(2))] = (float(m.group(3)), axis)
    return out


def _geometry(text: str):
    out = {}
    for item, off in _items(text, ";"):
        m = re.fullmatch(rf"({_LABEL})\s*:\s*\(\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*\)", item)
        if not m:
            raise _ValueError(f"entry {item!r} should read label:(x, y, z)", off)
        out[m.group(1)] = tuple(float(m.group(k)) for k in (2, 3, 4))
    return out


def _omega1(text: str):
    return "match" if text == "match" else _number(text)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise _ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _orientations(text: str):
    m = re.fullmatch(r"(?:(fibonacci|random)\s*:\s*)?(\d+)\s*[xX×]\s*(\d+)", text)
    if not m:
        raise _ValueError("orientations should read NxM, fibonacci:NxM or random:NxM")
    n, g = int(m.group(2)), int(m.group(3))
    if n < 1 or g < 1:
        raise _ValueError("orientation counts must be >= 1")
    return m.group(1) or "fibonacci", n, g


def _euler(text: str):
    out = []
    for item, off in _items(text, ";"):
        parts = [p.strip() for p in item.strip("()").split(",")]
        if len(parts) != 3:
            raise _ValueError(f"Euler triple {item!r} needs three angles", off)
        out.append(tuple(_number(p) for p in parts))
    return out


def _prep(text: str):
    if text in ("anti-longitudinal", "anti-longitudinal:+"):
        return ("anti-longitudinal", 1, None)
    if text == "anti-longitudinal:-":
        return ("anti-longitudinal", -1, None)
    if text == "i-spinlock":
        return ("i-spinlock", 1, None)
    if text.startswith("custom:"):
        pol = {}
        body = text[len("custom:"):]
        for item, off in _items(body):
            m = re.fullmatch(rf"({_LABEL})\s*=\s*({_NUM})", item)
            if not m:
                raise _ValueError(f"custom entry {item!r} should read label=value", off + 7)
            pol[m.group(1)] = float(m.group(2))
        return ("custom", 1, pol)
    raise _ValueError("prep should be anti-longitudinal[:+|:-], i-spinlock or custom:L=p,...")


def _grid(text: str):
    """``start:stop:step`` (inclusive) or a comma list, in Hz."""
    m = re.fullmatch(rf"({_NUM})\s*:\s*({_NUM})\s*:\s*({_NUM})", text)
    if m:
        a, b, s = (float(m.group(k)) for k in (1, 2, 3))
        if s <= 0 or b < a:
            raise _ValueError("grid needs start <= stop and a positive step")
        n = int(np.floor((b - a) / s + 1e-9)) + 1
        if n > 100000:
            raise _ValueError("grid too large")
        return a + s * np.arange(n)
    return np.array([_number(x) for x, _ in _items(text)])


KEYS: dict[str, Callable[[str], Any]] = {
    "phase": _choice("liquid", "solid"),
    "label": str,
    "spins": _spins,
    "transfer": _labels,
    "shifts_hz": _label_values,
    "delta_hz": _number,
    "delta_sign": _choice("positive", "negative"),
    "j_hz": _pair_values,
    "dipolar_hz": _dipolar,
    "geometry_angstrom": _geometry,
    "omega1_hz": _omega1,
    "i_offset_hz": _number,
    "ramp_percent": _nonneg,
    "inhomogeneity_percent": _nonneg,
    "inhomogeneity_model": _choice("gaussian", "uniform"),
    "tau_sl_s": _nonneg,
    "mas_hz": _positive,
    "orientations": _orientations,
    "euler_deg": _euler,
    "seed": _int,
    "out_grid": lambda t: _int(t, 1),
    "prep": _prep,
    "thermal_ratio": _positive,
    "step_s": _positive,
    "scan_omega1_hz": _grid,
    "scan_offset_hz": _grid,
}

# quantity stems whose keys must carry a unit suffix
_UNIT_STEMS = {k.rsplit("_", 1)[0]: k for k in KEYS if re.search(r"_(hz|s|percent|deg|angstrom)$", k)}


@dataclass
class ConfigDocument:
    """Parsed ``key = value`` entries with their source positions."""

    values: dict[str, Any] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)
    sections: list[str] = field(default_factory=list)

    def line(self, key: str) -> int:
        return self.lines.get(key, 1)


@dataclass(frozen=True)
class ParsedConfig:
    scenario: ScenarioConfig
    document: ConfigDocument
    scan_omega1: np.ndarray | None = None
    scan_offset: np.ndarray | None = None


def read_document(text: str) -> ConfigDocument:
    """Syntax and per-value checks; collects every problem before raising."""
    doc = ConfigDocument()
    diags: list[tuple[int, int, str]] = []
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        lead = len(body) - len(body.lstrip())
        stripped = body.strip()
        if stripped.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z0-9_.-]+)\s*\]", stripped)
            if m:
                doc.sections.append(m.group(1))
            else:
                diags.append((ln, lead + 1, f"malformed section header {stripped!r}"))
            continue
        if "=" not in body:
            diags.append((ln, lead + 1, "expected 'key = value'"))
            continue
        key_part, value_part = body.split("=", 1)
        key = key_part.strip()
        value = value_part.strip()
        vcol = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if not re.fullmatch(r"[a-z][a-z0-9_]*", key):
            diags.append((ln, lead + 1, f"bad key {key!r}"))
            continue
        if key not in KEYS:
            if key in _UNIT_STEMS:
                diags.append((ln, lead + 1, f"key {key!r} lacks a unit suffix; use {_UNIT_STEMS[key]!r}"))
            elif key.rsplit("_", 1)[0] in _UNIT_STEMS:
                diags.append((ln, lead + 1, f"key {key!r} has the wrong unit; use {_UNIT_STEMS[key.rsplit('_', 1)[0]]!r}"))
            else:
                diags.append((ln, lead + 1, f"unknown key {key!r}"))
            continue
        if key in doc.lines:
            diags.append((ln, lead + 1, f"duplicate key {key!r} (lines {doc.lines[key]} and {ln})"))
            continue
        doc.lines[key] = ln
        doc.raw[key] = value
        if not value:
            diags.append((ln, vcol, f"missing value for {key!r}"))
            continue
        try:
            doc.values[key] = KEYS[key](value)
        except _ValueError as exc:
            diags.append((ln, vcol + exc.offset, f"{key}: {exc}"))
    if "phase" not in doc.lines:
        diags.insert(0, (1, 1, "phase required"))
    if diags:
        raise ConfigError(sorted(diags, key=lambda d: (d[0], d[1])))
    return doc


def _spin_system(doc: ConfigDocument, diags: list) -> tuple[SpinSystem | None, tuple[str, str, str] | None]:
    v, line = doc.values, doc.line
    spins = v["spins"]
    labels = [s[0] for s in spins]
    known = set(labels)

    def check_labels(key, names):
        bad = [n for n in names if n not in known]
        if bad:
            diags.append((line(key), 1, f"{key}: unknown spin label(s) {', '.join(bad)}"))
        return not bad

    ok = True
    for key in ("shifts_hz", "geometry_angstrom"):
        if key in v:
            ok &= check_labels(key, v[key])
    for key in ("j_hz", "dipolar_hz"):
        if key in v:
            ok &= check_labels(key, [x for pair in v[key] for x in pair])
    if "prep" in v and v["prep"][2]:
        ok &= check_labels("prep", v["prep"][2])
    transfer = None
    if "transfer" in v:
        t = v["transfer"]
        if len(t) != 3:
            diags.append((line("transfer"), 1, "transfer lists S1, S2 and I"))
            ok = False
        else:
            ok &= check_labels("transfer", t)
            transfer = tuple(t)
    if not ok:
        return None, None
    if transfer is None:
        # provisional system to find the default designated spins
        probe = SpinSystem.build(spins)
        ab = probe.abundant
        if len(ab) < 2 or len(probe.rare) != 1:
            diags.append((line("spins"), 1, "need two abundant spins and one rare spin"))
            return None, None
        transfer = (labels[ab[0]], labels[ab[1]], labels[probe.rare[0]])
    s1, s2, _ = transfer

    shifts = {k: TWO_PI * x for k, x in v.get("shifts_hz", {}).items()}
    if "delta_hz" in v:
        d = TWO_PI * v["delta_hz"]
        if s1 in shifts or s2 in shifts:
            have = shifts.get(s1, 0.0) - shifts.get(s2, 0.0)
            if abs(have - d) > 1e-9 * max(1.0, abs(d)):
                diags.append((line("delta_hz"), 1,
                              f"delta_hz = {v['delta_hz']:g} disagrees with shifts_hz difference "
                              f"{have / TWO_PI:g} of {s1} and {s2}"))
                return None, None
        else:
            shifts[s1], shifts[s2] = 0.5 * d, -0.5 * d
    if "delta_sign" in v:
        want = 1 if v["delta_sign"] == "positive" else -1
        have = shifts.get(s1, 0.0) - shifts.get(s2, 0.0)
        if have == 0:
            diags.append((line("delta_sign"), 1, "delta_sign needs a nonzero shift difference"))
            return None, None
        if np.sign(have) != want:
            shifts[s1], shifts[s2] = shifts.get(s2, 0.0), shifts.get(s1, 0.0)

    dip = v.get("dipolar_hz", {})
    try:
        system = SpinSystem.build(
            spins, shifts=shifts,
            j={k: TWO_PI * x for k, x in v.get("j_hz", {}).items()},
            dipolar={k: TWO_PI * val for k, (val, _) in dip.items()},
            geometry=v.get("geometry_angstrom"),
            dipolar_axes={k: ax for k, (_, ax) in dip.items() if ax is not None})
    except ValueError as exc:
        key = "dipolar_hz" if "dipolar_hz" in v and "dipolar" in str(exc) else "spins"
        diags.append((line(key), 1, str(exc)))
        return None, None
    return system, transfer


def parse_config_document(text: str) -> ParsedConfig:
    """Parse a document into a validated scenario plus optional scan grids."""
    doc = read_document(text)
    v, line = doc.values, doc.line
    diags: list[tuple[int, int, str]] = []
    phase = v["phase"]
    for key in ("spins", "omega1_hz", "tau_sl_s"):
        if key not in v:
            diags.append((line("phase"), 1, f"{key} required"))
    if phase == "solid":
        if "mas_hz" not in v:
            diags.append((line("phase"), 1, "solid phase requires mas_hz"))
        if "geometry_angstrom" not in v and "dipolar_hz" not in v:
            diags.append((line("phase"), 1, "solid phase requires geometry_angstrom or dipolar_hz"))
        if "orientations" in v and "euler_deg" in v:
            diags.append((line("euler_deg"), 1, "give either orientations or euler_deg, not both"))
    else:
        if "j_hz" not in v:
            diags.append((line("phase"), 1, "liquid phase requires j_hz"))
        for key in ("mas_hz", "orientations", "euler_deg", "geometry_angstrom", "dipolar_hz"):
            if key in v:
                diags.append((line(key), 1, f"{key} only applies to the solid phase"))
    if "inhomogeneity_model" in v and "inhomogeneity_percent" not in v:
        diags.append((line("inhomogeneity_model"), 1, "inhomogeneity_model without inhomogeneity_percent"))
    if "thermal_ratio" in v and v.get("prep", ("anti-longitudinal",))[0] != "anti-longitudinal":
        diags.append((line("thermal_ratio"), 1, "thermal_ratio applies to the anti-longitudinal prep"))
    if diags:
        raise ConfigError(diags)

    system, transfer = _spin_system(doc, diags)
    if system is None:
        raise ConfigError(diags)
    s1, s2, i = (system.index(x) for x in transfer)

    omega1 = v["omega1_hz"]
    if omega1 == "match":
        delta = system.shifts[s1] - system.shifts[s2]
        if delta == 0:
            raise ConfigError([(line("omega1_hz"), 1, "omega1_hz = match needs a nonzero shift difference")])
        if phase == "liquid":
            omega1 = liquid_aht_coefficients(LiquidParams(system, 0.0, s1, s2, i)).omega1_opt
        else:
            omega1 = abs(delta)
    else:
        omega1 = TWO_PI * omega1
    rf = RfProfile.ramp(omega1, v.get("ramp_percent", 0.0) / 100.0)
    inhom = None
    if v.get("inhomogeneity_percent", 0.0) > 0:
        inhom = rf_inhomogeneity(v["inhomogeneity_percent"], v.get("inhomogeneity_model", "gaussian"))
    seed = v.get("seed", 0)
    orientations = None
    if phase == "solid":
        if "euler_deg" in v:
            orientations = OrientationSet.explicit([CrystalliteOrientation.from_degrees(*e) for e in v["euler_deg"]])
        elif "orientations" in v:
            scheme, n, g = v["orientations"]
            orientations = generate_orientations(scheme, n, g, seed)
    kind, sign, pol = v.get("prep", ("anti-longitudinal", 1, None))
    prep = InitialPrep(kind, sign, pol, v.get("thermal_ratio", 4.0))
    try:
        scenario = ScenarioConfig(
            phase, system, rf, v["tau_sl_s"], s1, s2, i, prep, inhom,
            TWO_PI * v.get("mas_hz", 0.0), orientations, TWO_PI * v.get("i_offset_hz", 0.0),
            n_out=v.get("out_grid", 201), step=v.get("step_s"), seed=seed, label=v.get("label", ""))
    except ValueError as exc:
        raise ConfigError([(line("phase"), 1, str(exc))]) from None
    grid = lambda key: TWO_PI * v[key] if key in v else None
    return ParsedConfig(scenario, doc, grid("scan_omega1_hz"), grid("scan_offset_hz"))


def parse_grid(text: str) -> np.ndarray:
    """Scan grid in Hz from ``start:stop:step`` or a comma list."""
    try:
        return _grid(text.strip())
    except _ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def parse_config(text: str) -> ScenarioConfig:
    """Validated :class:`ScenarioConfig`, or :class:`ConfigError` listing every problem."""
    return parse_config_document(text).scenario
