"""Dissipated energy of the notched specimen on two meshes at a fixed cycle.

    python scripts/mesh_objectivity.py --h 1.0 0.5 --cycles 8
"""

import argparse
import time

from fatigue_pf import io, solver
from fatigue_pf.loading import LoadSchedule

from notched_run import notched_material


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, nargs="+", default=[0.9, 0.45])
    ap.add_argument("--amp", type=float, default=2.0)
    ap.add_argument("--cycles", type=int, default=4)
    ap.add_argument("--spc", type=int, default=16)
    args = ap.parse_args()
    sched = LoadSchedule(vmin=-args.amp, vmax=args.amp, cycles=args.cycles, steps_per_cycle=args.spc,
                         fixed={"bottom": ("x", "y")})
    cfg = solver.SolverConfig(acceleration="anderson", max_stagger=1000)
    out = []
    for h in args.h:
        mesh = io.double_notch(h=h)
        t = time.perf_counter()
        res = solver.run(mesh, notched_material(), sched, cfg)
        d = res.column("D_cum")[-1]
        out.append(d)
        print(f"h = {h}: {mesh.n_elements} elements, D = {d:.3f}, alpha_max = {res.column('alpha_max')[-1]:.3f}, "
              f"{time.perf_counter() - t:.0f}s", flush=True)
    ref = out[-1]
    for h, d in zip(args.h, out):
        print(f"h = {h}: relative difference to finest {abs(d - ref) / abs(ref):.2%}")


if __name__ == "__main__":
    main()
