"""Command-line interface: ``three-spin-cp <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 unknown subcommand.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ParsedConfig, parse_config_document, parse_grid
from .csvio import write_csv
from .errors import ConfigError, MatchingError, NumericalError, ResonanceError, SpinSystemError
from .figures import FIGURES, PRESETS, RunOptions, load_preset, reproduce_figure
from .scenarios import compare_aht_vs_brute, run_buildup, scan_offset, scan_rf

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNKNOWN = 0, 2, 3, 4
SUBCOMMANDS = ("buildup", "scan-rf", "scan-offset", "compare-aht", "reproduce")
VALUE_FLAGS = {"--config", "--preset", "--out-dir", "--seed", "--step", "--orientations", "--threads", "--grid"}
TWO_PI = 2 * np.pi


def _orientations(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)[xX×](\d+)", text)
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise argparse.ArgumentTypeError("expected NxM with N, M >= 1")
    return int(m.group(1)), int(m.group(2))


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="scenario configuration file")
    src.add_argument("--preset", choices=PRESETS, help="shipped preset instead of a config file")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="seed for random orientation sets")
    common.add_argument("--step", type=_positive_float, help="integrator step override (s)")
    common.add_argument("--orientations", type=_orientations, help="powder grid NxM (sphere x gamma)")
    common.add_argument("--threads", type=_positive_int, default=1, help="concurrent ensemble members")
    common.add_argument("--quick", action="store_true", help="coarser grids for a fast preview")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="three-spin-cp", description="Three-spin cross-polarization simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("buildup", parents=[common], help="exact buildup curve")
    for name, what in (("scan-rf", "RF amplitude"), ("scan-offset", "rare-spin offset")):
        s = sub.add_parser(name, parents=[common], help=f"{what} profile")
        s.add_argument("--grid", help="start:stop:step or comma list in Hz (overrides the config)")
    sub.add_parser("compare-aht", parents=[common], help="analytic AHT versus exact propagation")
    r = sub.add_parser("reproduce", parents=[common], help="figure dataset bundle")
    r.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    return p


def _load(args) -> ParsedConfig:
    if args.preset:
        return load_preset(args.preset)
    if args.config is None:
        raise ConfigError("give --config or --preset")
    try:
        text = args.config.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    return parse_config_document(text)


def _options(args) -> RunOptions:
    return RunOptions(args.quick, args.orientations, args.seed, args.step, args.threads)


def _scan_grid(args, parsed: ParsedConfig, key: str):
    if args.grid:
        return TWO_PI * parse_grid(args.grid)
    grid = parsed.scan_omega1 if key == "scan_omega1_hz" else parsed.scan_offset
    if grid is None:
        raise ConfigError(f"no scan grid: add {key} to the config or pass --grid")
    return grid


def _run(args) -> int:
    out: Path = args.out_dir
    if args.command == "reproduce":
        if args.figure not in FIGURES:
            raise ConfigError(f"unknown figure {args.figure!r}; available: {', '.join(FIGURES)}")
        b = reproduce_figure(args.figure, out, _options(args))
        print(f"wrote {len(b.files)} files and manifest.txt to {out}")
        for k, v in b.summary.items():
            print(f"  {k} = {v:.6g}")
        return EXIT_OK
    parsed = _load(args)
    cfg = _options(args).apply(parsed.scenario)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "buildup":
        ts = run_buildup(cfg)
        write_csv(ts, out / "buildup.csv")
        t, v = ts.peak("Ix", absolute=True)
        print(f"max |Ix| = {abs(v):.6g} at {t:.6g} s -> {out / 'buildup.csv'}")
    elif args.command in ("scan-rf", "scan-offset"):
        if args.command == "scan-rf":
            prof, name = scan_rf(cfg, _scan_grid(args, parsed, "scan_omega1_hz")), "rf_scan.csv"
        else:
            prof, name = scan_offset(cfg, _scan_grid(args, parsed, "scan_offset_hz")), "offset_scan.csv"
        write_csv(prof, out / name)
        print(f"argmax(max_Ix) = {prof.argmax('max_Ix'):.6g} Hz -> {out / name}")
    else:
        rep = compare_aht_vs_brute(cfg)
        members = rep.members or (rep,)
        for m in members:
            tag = m.label.replace("euler_deg=", "euler_").replace(",", "_") if rep.members else "liquid"
            write_csv(m.brute, out / f"compare_{tag}_brute.csv")
            if m.analytic is not None:
                write_csv(m.analytic, out / f"compare_{tag}_aht.csv")
            if m.degenerate:
                print(f"{tag}: degenerate ({m.note})")
            else:
                print(f"{tag}: rms Ix = {m.rms['Ix']:.4g}, relative {m.relative_rms['Ix']:.4g}")
    return EXIT_OK


def _first_positional(argv: list[str]) -> str | None:
    skip = False
    for a in argv:
        if skip:
            skip = False
        elif a in VALUE_FLAGS:
            skip = True
        elif not a.startswith("-"):
            return a
    return None


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = _first_positional(argv)
    if command is not None and command not in SUBCOMMANDS:
        print(f"three-spin-cp: unknown subcommand {command!r}; choose from {', '.join(SUBCOMMANDS)}",
              file=sys.stderr)
        return EXIT_UNKNOWN
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        for ln, col, msg in exc.diagnostics:
            print(f"config:{ln}:{col}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (MatchingError, ResonanceError, SpinSystemError, ValueError, KeyError) as exc:
        print(f"three-spin-cp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"three-spin-cp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
