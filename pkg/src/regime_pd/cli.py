"""Command line interface.

    regime-pd solve <cfg>... [--jobs N]
    regime-pd oracle <cfg>...
    regime-pd converge <cfg> --ns 64,128,256,512 --nsteps 100,200,400
    regime-pd presets list | dump <name>

``<cfg>`` is a config file path or ``preset:<name>``.  On failure a single
JSON line ``{"error": ..., "message": ..., ...}`` goes to stderr and the exit
code is nonzero.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import (ConfigError, ExperimentConfig, ParseError, ValidationError, load_config,
                     load_preset, preset_names, preset_text)
from .experiments import run_convergence, run_oracle, run_solve
from .pide_operator import QuadratureConfig

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("expected positive integers")
    return vals


def load_any(ref: str) -> ExperimentConfig:
    if ref.startswith("preset:"):
        return load_preset(ref.split(":", 1)[1])
    return load_config(ref)


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    q = {}
    if getattr(args, "z_cut", None) is not None:
        q["z_cut"] = args.z_cut
    if getattr(args, "panels_inner", None) is not None:
        q["panels_inner"] = args.panels_inner
    if getattr(args, "gl_order", None) is not None:
        q["gl_order"] = args.gl_order
    changes = {}
    if q:
        try:
            changes["quadrature"] = dataclasses.replace(cfg.quadrature, **q)
        except ValueError as exc:
            raise ValidationError("quadrature", str(exc)) from exc
    if getattr(args, "theta", None) is not None:
        if not 0 <= args.theta <= 1:
            raise ValidationError("time.theta", "must lie in [0, 1]")
        changes["time"] = dataclasses.replace(cfg.time, theta=args.theta)
    if getattr(args, "barrier_log", None) is not None:
        k = args.barrier_log
        if not cfg.grid.x_min < k < cfg.grid.x_max:
            raise ValidationError("barrier.k", f"barrier {k:g} is outside the grid")
        changes["barrier"] = dataclasses.replace(cfg.barrier, k=k, liabilities=None,
                                                 asset_value=None)
    if getattr(args, "out", None) is not None:
        changes["output"] = dataclasses.replace(cfg.output, directory=args.out)
    return cfg.replace(**changes) if changes else cfg


def _run_one(task):
    kind, cfg, extra = task
    if kind == "solve":
        return [str(p) for p in run_solve(cfg)]
    if kind == "oracle":
        return [str(p) for p in run_oracle(cfg)]
    return [str(p) for p in run_convergence(cfg, *extra)]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regime-pd",
                                description="Default probabilities under regime-switching Levy models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--z-cut", type=float, help="truncation of the jump integrals")
        sp.add_argument("--panels-inner", type=int, help="geometric panels on [-1, 1]")
        sp.add_argument("--gl-order", type=int, help="Gauss-Legendre points per panel")
        sp.add_argument("--theta", type=float, help="theta-scheme parameter (0 = fully implicit)")
        sp.add_argument("--barrier-log", type=float, help="log barrier k = ln(L/V0)")
        sp.add_argument("--out", help="output directory (overrides output.directory)")

    s = sub.add_parser("solve", help="collocation solve: PD table and surface")
    s.add_argument("configs", nargs="+")
    s.add_argument("--jobs", type=int, default=1, help="experiments run in parallel")
    common(s)
    o = sub.add_parser("oracle", help="Fourier reference PDs")
    o.add_argument("configs", nargs="+")
    o.add_argument("--jobs", type=int, default=1)
    common(o)
    c = sub.add_parser("converge", help="log relative error sweep against the oracle")
    c.add_argument("configs", nargs="+")
    c.add_argument("--ns", type=_int_list, default=[64, 128, 256, 512])
    c.add_argument("--nsteps", type=_int_list, default=[100, 200, 400])
    c.add_argument("--jobs", type=int, default=1)
    common(c)
    pr = sub.add_parser("presets", help="bundled configurations")
    prs = pr.add_subparsers(dest="action", required=True)
    prs.add_parser("list")
    d = prs.add_parser("dump")
    d.add_argument("name")
    return p


def _error(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _error("UsageError", "invalid command line", EXIT_USAGE)
    try:
        if args.command == "presets":
            if args.action == "list":
                for name in preset_names():
                    print(name)
            else:
                sys.stdout.write(preset_text(args.name))
            return 0
        cfgs = [apply_overrides(load_any(c), args) for c in args.configs]
        extra = (args.ns, args.nsteps) if args.command == "converge" else None
        tasks = [(args.command, cfg, extra) for cfg in cfgs]
        if args.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                results = list(ex.map(_run_one, tasks))
        else:
            results = [_run_one(t) for t in tasks]
        for paths in results:
            for path in paths:
                print(path)
        return 0
    except ParseError as exc:
        return _error("ParseError", str(exc), EXIT_CONFIG, line=exc.line)
    except ValidationError as exc:
        return _error("ValidationError", str(exc), EXIT_CONFIG, field=exc.field)
    except KeyError as exc:
        return _error("UnknownPreset", str(exc.args[0]), EXIT_CONFIG)
    except ConfigError as exc:
        return _error(type(exc).__name__, str(exc), EXIT_CONFIG)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_IO)
    except (ArithmeticError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
