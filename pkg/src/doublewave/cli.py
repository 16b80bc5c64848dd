"""Command line entry points.

Exit codes: 0 all good, 1 a verification check failed, 2 the config (or
command line) is invalid, 3 the evolution diverged (the last healthy state
is saved next to the other outputs).
"""
from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import ConfigError, parse_file
from .evolve import NumericalDivergenceError
from .render import QUANTITIES, render_field
from .scenarios import DivergenceAbort, RunContext, simulate_scenario, verify_scenario
from .snapshots import read_snapshot

ENV_THREADS = "DOUBLEWAVE_THREADS"


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("config", help="scenario config file")
    sp.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                    help="worker threads (default: $%s or 1); outputs do not"
                         " depend on this" % ENV_THREADS)
    sp.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                    help="ensemble seed (default: [scenario] seed, else 0)")
    sp.add_argument("--out-dir", default=argparse.SUPPRESS,
                    help="output directory (default: [output] dir, else ./out)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doublewave",
                                 description="guided-wave numerical laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write its outputs")
    _add_run_flags(sim)

    ver = sub.add_parser("verify", help="run a scenario's checks, one line each")
    _add_run_flags(ver)

    ren = sub.add_parser("render", help="rasterize a snapshot to PPM/PGM")
    ren.add_argument("snapshot", help="snapshot file (.dwf)")
    ren.add_argument("--quantity", choices=QUANTITIES, default="amplitude")
    ren.add_argument("--scale", choices=("linear", "log"), default="linear")
    ren.add_argument("--omega0", type=float, default=1.0,
                     help="carrier pulsation for the quantum-potential map")
    ren.add_argument("--out", default=None,
                     help="output image (.ppm or .pgm); default next to input")
    return ap


def _threads_from_env() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _make_context(args: argparse.Namespace) -> RunContext:
    cfg = parse_file(args.config)
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    threads = getattr(args, "threads", None)
    if threads is None:
        threads = _threads_from_env()
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = cfg.get_int("scenario", "seed", 0)
    out_dir = getattr(args, "out_dir", None)
    if out_dir is None:
        out_dir = cfg.get_str("output", "dir", "out")
    return RunContext(cfg=cfg, config_text=text, out_dir=out_dir,
                      seed=seed, threads=threads)


def _cmd_simulate(args: argparse.Namespace) -> int:
    ctx = _make_context(args)
    summary = simulate_scenario(ctx)
    print("wrote %d files to %s" % (len(ctx.outputs) + 1, ctx.out_dir))
    for key in sorted(summary):
        print("  %s: %s" % (key, summary[key]))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    ctx = _make_context(args)
    checks, all_pass = verify_scenario(ctx)
    for c in checks:
        ok = bool(c.get("pass", False))
        print("%s %s" % ("PASS" if ok else "FAIL", c["check_name"]))
    print("%d/%d checks passed; reports in %s"
          % (sum(bool(c.get("pass", False)) for c in checks), len(checks),
             ctx.out_dir))
    return 0 if all_pass else 1


def _cmd_render(args: argparse.Namespace) -> int:
    fld = read_snapshot(args.snapshot)
    out = args.out
    if out is None:
        base, _ = os.path.splitext(args.snapshot)
        out = "%s_%s.ppm" % (base, args.quantity)
    render_field(fld, args.quantity, out, scale=args.scale, omega0=args.omega0)
    print("wrote %s" % out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": _cmd_simulate, "verify": _cmd_verify,
               "render": _cmd_render}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print("invalid config: %s" % exc, file=sys.stderr)
        return 2
    except (DivergenceAbort, NumericalDivergenceError) as exc:
        print("evolution diverged: %s" % exc, file=sys.stderr)
        checkpoint = getattr(exc, "checkpoint", None)
        if checkpoint:
            print("last good state: %s" % checkpoint, file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print("missing file: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
