"""Design and bench-analysis toolkit for quartz micropillar resonators.

Exit codes: 0 success, 1 computation error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, csvio, report
from .config import SWEEP_DIMENSION, ConfigError, load_config, parse_config
from .physmodel import ValidationError
from .units import UnitError, parse_quantity


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (.cfg)")
    common.add_argument("--paper-defaults", action="store_true",
                        help="use the published device constants (a --config file still overrides them)")
    common.add_argument("--out", help="output file (JSON report or CSV)")

    p = argparse.ArgumentParser(prog="micropillar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="modes, effective mass, loss and noise budget")
    sub.add_parser("coating", parents=[common], help="mirror stack transmission and cavity finesse")
    sub.add_parser("budget", parents=[common], help="ground-state criteria and displacement noise")

    sim = sub.add_parser("simulate", parents=[common], help="write synthetic bench data as CSV")
    sim.add_argument("kind", choices=("ringdown", "sweep", "michelson"))
    sim.add_argument("--seed", type=int, help="override bench.seed")
    sim.add_argument("--jitter", action="store_true", help="apply interferometer jitter (sweep, michelson)")

    fit = sub.add_parser("fit", parents=[common], help="estimate (nu, Q) from a CSV record")
    fit.add_argument("kind", choices=("ringdown", "sweep"))
    fit.add_argument("--in", dest="infile", required=True, help="input CSV")
    fit.add_argument("--nu-hint", help="carrier frequency, e.g. '3.66 MHz'")
    fit.add_argument("--envelope", choices=("rms", "lockin"), default="rms",
                     help="ring-down envelope detector (default: sliding-window rms)")

    sg = sub.add_parser("sweep-geometry", parents=[common], help="CSV table of fundamental vs a geometry parameter")
    sg.add_argument("--parameter", choices=sorted(SWEEP_DIMENSION))
    sg.add_argument("--start")
    sg.add_argument("--stop")
    sg.add_argument("--steps", type=int)
    sg.add_argument("--jobs", type=int, default=1)
    return p


def _config(args, required: bool = True):
    if args.config:
        cfg = load_config(args.config)
        if args.paper_defaults:
            cfg.defaults_applied.insert(0, "published defaults requested; config file values override them")
        return cfg
    if args.paper_defaults or not required:
        cfg = parse_config("", source="<paper-defaults>")
        return cfg
    raise UsageError("either --config or --paper-defaults is required")


def _emit(rep: dict, out) -> None:
    sys.stdout.write(report.to_text(rep))
    if out:
        Path(out).write_text(report.to_json(rep), encoding="utf-8")


def _simulate(args, cfg) -> None:
    if not args.out:
        raise UsageError("simulate needs --out")
    b = dict(cfg.bench)
    seed = args.seed if args.seed is not None else b["seed"]
    osc = cfg.oscillator
    meta = {"seed": seed, "frequency_hz": repr(osc.frequency), "quality_factor": repr(osc.quality_factor)}
    if args.kind == "sweep":
        grid = bench.sweep_grid(osc, b["span_linewidths"], b["n_points"])
        if args.jitter:
            p = replace(cfg.interferometer, seed=seed)
            sw = bench.jittered_sweep(osc, b["drive_force"], grid, p, b["dwell_time"])
            meta["jitter"] = f"rms={p.jitter_rms!r} rad, correlation_time={p.jitter_correlation_time!r} s"
        else:
            sw = bench.sweep_response(osc, b["drive_force"], grid)
        meta["convention"] = "x = F0 chi(2 pi nu), viscous damping"
        csvio.write_sweep(args.out, sw, meta)
        return
    mode = b["mode"] if args.kind == "ringdown" else "full"
    ts = bench.synth_ringdown(osc, b["amplitude"], b["duration"], b["sample_rate"], b["snr"], seed, mode)
    meta["mode"] = mode
    if mode == "envelope":
        meta["carrier_frequency_hz"] = repr(osc.frequency)
    if args.kind == "ringdown":
        meta["units"] = "displacement in m"
        csvio.write_timeseries(args.out, ts, meta)
        return
    p = replace(cfg.interferometer, seed=seed + 1,
                jitter_rms=cfg.interferometer.jitter_rms if args.jitter else 0.0)
    out = bench.michelson_signal(ts, p)
    meta["units"] = "photodiode intensity, arbitrary units"
    meta["interferometer"] = (f"wavelength={p.wavelength!r} m, phase={p.operating_phase!r} rad, "
                              f"jitter_rms={p.jitter_rms!r} rad")
    csvio.write_timeseries(args.out, out, meta, column="intensity_au")


def _fit(args) -> dict:
    if args.kind == "ringdown":
        ts, column, meta = csvio.read_timeseries(args.infile)
        hint = None
        if args.nu_hint:
            hint = parse_quantity(args.nu_hint, "frequency")
        elif meta.get("mode") == "envelope" and "carrier_frequency_hz" in meta:
            hint = float(meta["carrier_frequency_hz"])
        fit = bench.fit_ringdown(ts, nu_hint=hint, envelope=args.envelope)
    else:
        sw, meta = csvio.read_sweep(args.infile)
        fit = bench.fit_lorentzian(sw)
    return report.fit_report(fit, args.kind, Path(args.infile).name, meta)


def _sweep_geometry(args, cfg) -> None:
    s = dict(cfg.sweep)
    parameter = args.parameter or s["parameter"]
    dim = SWEEP_DIMENSION[parameter]
    start = parse_quantity(args.start, dim) if args.start else s["start"]
    stop = parse_quantity(args.stop, dim) if args.stop else s["stop"]
    steps = args.steps or s["steps"]
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    values = np.linspace(start, stop, steps)
    rows = report.sweep_geometry(cfg, parameter, values, jobs=max(1, args.jobs))
    lines = [f"# swept={parameter}, unit=m, n_elements={cfg.modal['n_elements']}",
             "parameter,value,frequency_hz,effective_mass_kg,q_clamp"]
    for v, f, m, q in rows:
        lines.append(f"{parameter},{v:.17g},{f:.17g},{m:.17g},{'inf' if math.isinf(q) else format(q, '.17g')}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_cli(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "fit":
            rep = _fit(args)
            _emit(rep, args.out)
            return 0
        cfg = _config(args)
        if args.command == "design":
            _emit(report.design_report(cfg), args.out)
        elif args.command == "coating":
            _emit(report.coating_report(cfg), args.out)
        elif args.command == "budget":
            _emit(report.budget_report(cfg), args.out)
        elif args.command == "simulate":
            _simulate(args, cfg)
        elif args.command == "sweep-geometry":
            _sweep_geometry(args, cfg)
        return 0
    except (UsageError, ConfigError, UnitError, FileNotFoundError, csvio.CsvFormatError) as exc:
        print(f"micropillar: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ValidationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"micropillar: computation failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
