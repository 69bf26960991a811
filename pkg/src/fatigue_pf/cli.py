"""Command-line entry point.

    fatigue-pf matpoint --config point.toml [--out DIR]
    fatigue-pf run --config plate.toml [--out DIR] [--snapshots N]
    fatigue-pf check-energy TRACE.csv
    fatigue-pf gen-mesh --config plate.toml --out mesh.txt

Exit codes: 0 success, 1 failed balance check (``check-energy``), 2 input
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

BALANCE_THRESHOLD = 1e-5

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fatigue-pf", description=__doc__.split("\n")[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP threads (default: library default; 1 is bit-reproducible)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matpoint", help="homogeneous material-point run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")

    p = sub.add_parser("run", help="finite-element run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    p.add_argument("--snapshots", type=int, default=None, help="VTK snapshot stride in steps (0: none)")

    p = sub.add_parser("check-energy", help="recompute the power balance of a trace")
    p.add_argument("trace")
    p.add_argument("--threshold", type=float, default=BALANCE_THRESHOLD)

    p = sub.add_parser("gen-mesh", help="write the mesh of a config's [mesh] generator")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="mesh file to write")
    return parser


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _load(args):
    from .io import load_config

    if not os.path.isfile(args.config):
        from .errors import InputError
        raise InputError(f"config file not found: {args.config}")
    return load_config(args.config)


def _out_dir(args, cfg):
    if args.out is not None:
        return args.out
    base = os.path.dirname(os.path.abspath(args.config))
    return cfg.output.dir if os.path.isabs(cfg.output.dir) else os.path.join(base, cfg.output.dir)


def cmd_matpoint(args) -> int:
    from .matpoint import PointDriver

    cfg = _load(args)
    out = _out_dir(args, cfg)
    trace = PointDriver(cfg.material, cfg.point).run(cfg.schedule)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "point_trace.csv")
    trace.to_csv(path)
    first = trace.first_damage_cycle()
    _say(args, f"{len(trace)} rows -> {path}; first damage cycle: {first if first is not None else 'none'}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .errors import InputError
    from .solver import run

    cfg = _load(args)
    if cfg.mesh is None:
        raise InputError("run needs a [mesh] section", key="mesh")
    mesh = cfg.mesh.load(os.path.dirname(os.path.abspath(args.config)))
    out = _out_dir(args, cfg)
    every = cfg.output.snapshot_every if args.snapshots is None else args.snapshots
    if every < 0:
        raise InputError("--snapshots must be non-negative")

    def progress(row, info):
        if not args.quiet and (row["step"] % cfg.schedule.steps_per_cycle == 0):
            print(f"step {row['step']}: reaction {row['reaction_y']:.6g}, alpha_max {row['alpha_max']:.4f}, "
                  f"staggered iterations {info.staggered}", flush=True)

    result = run(mesh, cfg.material, cfg.schedule, cfg.solver, out_dir=out, snapshot_every=every,
                 progress=progress)
    _say(args, f"{len(result.rows) - 1} steps -> {os.path.join(out, 'trace.csv')}")
    return EXIT_OK


def balance_report(cols: dict, threshold: float = BALANCE_THRESHOLD):
    """Per-step balance residuals recomputed from cumulative columns.

    Accepts FE traces (``E, D_cum, W_ext``) and point traces
    (``energy, dissipation, work``). Returns ``(residuals, steps)``.
    """
    from .errors import InputError
    from .solver import balance_ratio

    for names in (("E", "D_cum", "W_ext"), ("energy", "dissipation", "work")):
        if all(n in cols for n in names):
            E, D, W = (cols[n] for n in names)
            break
    else:
        raise InputError("trace has neither E/D_cum/W_ext nor energy/dissipation/work columns")
    steps = cols["step"].astype(int) if "step" in cols else range(len(E))
    res = []
    for i in range(1, len(E)):
        level = max(abs(E[i - 1]), abs(D[i - 1]), abs(W[i - 1]))
        res.append(balance_ratio(E[i] - E[i - 1], D[i] - D[i - 1], W[i] - W[i - 1], level))
    import numpy as np
    return np.array(res), np.asarray(steps)[1:]


def cmd_check_energy(args) -> int:
    import numpy as np

    from .io import read_trace

    res, steps = balance_report(read_trace(args.trace), args.threshold)
    if res.size == 0 or not np.all(np.isfinite(res)):
        bad = steps[~np.isfinite(res)] if res.size else []
        print(f"FAIL: non-finite balance residual at step {bad[0] if len(bad) else '?'}")
        return EXIT_CHECK_FAILED
    worst = int(np.argmax(res))
    if res[worst] <= args.threshold:
        _say(args, f"PASS: max relative balance residual {res[worst]:.3e} <= {args.threshold:g}")
        return EXIT_OK
    first = int(np.flatnonzero(res > args.threshold)[0])
    print(f"FAIL: max relative balance residual {res[worst]:.3e} at step {steps[worst]}; "
          f"first violation at step {steps[first]} ({res[first]:.3e} > {args.threshold:g})")
    return EXIT_CHECK_FAILED


def cmd_gen_mesh(args) -> int:
    from .errors import InputError
    from .io import write_mesh

    cfg = _load(args)
    if cfg.mesh is None or cfg.mesh.generator is None:
        raise InputError("gen-mesh needs [mesh] generator", key="generator")
    mesh = cfg.mesh.load()
    write_mesh(mesh, args.out)
    _say(args, f"{mesh.n_nodes} nodes, {mesh.n_elements} elements -> {args.out}")
    return EXIT_OK


COMMANDS = {"matpoint": cmd_matpoint, "run": cmd_run, "check-energy": cmd_check_energy, "gen-mesh": cmd_gen_mesh}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return EXIT_INPUT
        # only effective before numpy loads its BLAS, i.e. from the console script
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .errors import InputError, SolverError

    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        key = f" [key: {exc.key}]" if exc.key else ""
        print(f"input error: {exc}{key}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
