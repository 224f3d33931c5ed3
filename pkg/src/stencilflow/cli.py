"""Command-line front end.

Exit status: 0 on success, 1 when a run or a check fails, 2 on usage errors
(bad arguments, unreadable or invalid configuration).
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path
from typing import Sequence

from .config import ConfigError, load_config

__all__ = ["main", "run_cli", "build_parser"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"values must be positive, got {text!r}")
    return vals


def _tile(text: str) -> tuple[int, int, int]:
    vals = _int_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"tile needs three sizes tx,ty,tz, got {text!r}")
    return tuple(vals)


def _modes(text: str) -> list[str]:
    vals = [v.strip() for v in text.split(",")]
    bad = [v for v in vals if v not in ("plain", "overlap")]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown mode(s) {', '.join(bad)}; use plain or overlap")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stencilflow", description="Stencil kernels, cavity flow runs and benchmarks.")
    sub = p.add_subparsers(dest="command", metavar="{gen,cavity,validate,bench}", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate kernel headers and plans.txt from a descriptor file")
    g.add_argument("ccl", help="kernel descriptor file")
    g.add_argument("-o", "--output", required=True, help="output directory")

    c = sub.add_parser("cavity", help="run the lid-driven cavity to steady state")
    c.add_argument("--config", required=True)
    c.add_argument("--workers", type=int)
    c.add_argument("--mode", choices=("plain", "overlap"))
    c.add_argument("--tile", type=_tile, help="tile override tx,ty,tz")
    c.add_argument("--output-dir", help="directory for profiles, residuals and field dumps")
    c.add_argument("--quiet", action="store_true")

    v = sub.add_parser("validate", help="compare centreline profiles with a reference table")
    v.add_argument("--profiles", required=True)
    v.add_argument("--reference", required=True)
    v.add_argument("--tol", type=float, required=True)

    b = sub.add_parser("bench", help="time fixed-step runs over worker counts and modes")
    b.add_argument("--config", required=True)
    b.add_argument("--workers", type=_int_list, default=[1])
    b.add_argument("--modes", type=_modes, default=["plain"])
    b.add_argument("--steps", type=int)
    b.add_argument("--csv", help="report path (default bench.csv in the output directory)")
    return p


def _cmd_gen(args) -> int:
    from .codegen import CodegenError, write_generated
    from .descriptor import DescriptorError, load_descriptor, validate_all

    try:
        raws = load_descriptor(args.ccl)
    except OSError as exc:
        print(f"stencilflow gen: cannot read {args.ccl}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except DescriptorError as exc:
        print(f"stencilflow gen: {exc}", file=sys.stderr)
        return EXIT_FAIL
    known = {n for d in raws for n in d.variables}
    try:
        written = write_generated(validate_all(raws, known), args.output)
    except (DescriptorError, CodegenError) as exc:
        print(f"stencilflow gen: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for path in written:
        print(path)
    return EXIT_OK


def _apply_overrides(cfg, args):
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg.workers = args.workers
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    if getattr(args, "tile", None) is not None:
        cfg.tile = args.tile
    if getattr(args, "output_dir", None) is not None:
        cfg.output_dir = Path(args.output_dir)
    return cfg


def _cmd_cavity(args) -> int:
    from .cfd import SolverDiverged, init_cavity, run_to_steady
    from .cfd.validation import centerline_profiles, write_profiles
    from .grid import write_sfg1

    cfg = _apply_overrides(load_config(args.config), args)
    solver = cfg.solver
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    state = init_cavity(
        solver, cfg.fluid, workers=cfg.workers, mode=cfg.mode, tile=cfg.tile,
        backend=cfg.backend, staging=cfg.staging, ghost=cfg.ghost,
    )
    start = time.perf_counter()
    res_path = cfg.output(cfg.residuals)
    try:
        with open(res_path, "w", newline="") as fh:
            log = csv.writer(fh, lineterminator="\n")
            log.writerow(["step", "time", "dt", "max_div", "sweeps", "converged", "change"])

            def record(st, rec):
                log.writerow([rec.step, repr(float(rec.time)), repr(float(rec.dt)), repr(float(rec.residual)),
                              rec.sweeps, int(rec.converged), repr(float(rec.change))])
                if not args.quiet and rec.step % solver.output_every == 0:
                    print(f"step {rec.step:7d}  t={rec.time:.4f}  dt={rec.dt:.3e}  div={rec.residual:.2e}  "
                          f"sweeps={rec.sweeps:4d}  change={rec.change:.3e}  [{time.perf_counter() - start:.0f}s]", flush=True)

            try:
                steady = run_to_steady(state, solver, callback=record)
            except SolverDiverged as exc:
                print(f"stencilflow cavity: {exc}", file=sys.stderr)
                return EXIT_FAIL
        prof = centerline_profiles(state)
        write_profiles(cfg.output(cfg.profiles), prof, header=[
            f"grid {'x'.join(map(str, solver.extents))}, Re {solver.re:g}, t {state.t:.6g}, steps {state.step}",
        ])
        if cfg.dump_fields:
            for name in ("vx", "vy", "vz", "p"):
                write_sfg1(cfg.output(f"{name}.sfg"), state.gathered(name))
        unconverged = sum(1 for r in state.history if not r.converged)
    finally:
        state.close()
    status = "steady" if steady else "stopped before the steady criterion"
    print(f"{status} after {state.step} steps, t={state.t:.6g}, {time.perf_counter() - start:.1f}s wall")
    print(f"wrote {cfg.output(cfg.profiles)} and {res_path}")
    if unconverged:
        print(f"warning: {unconverged} step(s) ended with max|div u| above eps", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .cfd.validation import profile_deviation, read_profiles

    try:
        computed = read_profiles(args.profiles)
        reference = read_profiles(args.reference)
    except OSError as exc:
        print(f"stencilflow validate: cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"stencilflow validate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    du, dv = profile_deviation(computed, reference)
    worst = max(du, dv)
    ok = worst <= args.tol
    print(f"u(y) max deviation: {du:.6f}")
    print(f"v(x) max deviation: {dv:.6f}")
    print(f"max deviation {worst:.6f} {'<=' if ok else '>'} tol {args.tol:g}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_bench(args) -> int:
    from .bench import bench

    cfg = load_config(args.config)
    if args.steps is not None and args.steps < 1:
        raise ConfigError("--steps must be at least 1")
    report = bench(cfg, args.workers, args.modes, args.steps)
    out = Path(args.csv) if args.csv else cfg.output("bench.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv())
    print(report.to_table())
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"gen": _cmd_gen, "cavity": _cmd_cavity, "validate": _cmd_validate, "bench": _cmd_bench}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"stencilflow {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
