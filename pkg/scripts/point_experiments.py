"""One-dimensional material-point experiments.

Runs the hardening variants (KH, KH-IH, KH-IS, KH-R) and the fatigue onset
cases, writes each trace to ``<out>/<name>.csv`` and prints a summary line.

    python scripts/point_experiments.py --out out/point
"""

import argparse
import math
import os
import time

import numpy as np

from fatigue_pf import constitutive as C
from fatigue_pf.matpoint import ControlMode, run_point


def disp_material(H_iso=(0.0, 0.0), beta=0.0, w0=1e12, gamma0=math.inf):
    surf = C.linear_surfaces(10, (0.4, 0.7), (8.0, 0.73), H_iso)
    return C.MaterialSpec.from_young(1.0, 0.0, surfaces=surf, w0=w0, damage_model="AT1", beta=beta,
                                     gamma0=gamma0, k=0.7, uniaxial=True)


def force_material(beta):
    surf = C.linear_surfaces(20, (0.6, 1.4), (100.0, 9.09))
    return C.MaterialSpec.from_young(10.0, 0.0, surfaces=surf, w0=1e12, damage_model="AT1", beta=beta,
                                     uniaxial=True)


def kappa_increments(tr, spc):
    return np.diff(tr.kappa().sum(axis=1)[::spc])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/point")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    def save(name, tr):
        tr.to_csv(os.path.join(args.out, f"{name}.csv"))

    tr = run_point(ControlMode("displacement", -1.5, 1.5), disp_material(), 80, 6)
    save("kh", tr)
    ends = tr.eps_p()[80::80]
    print(f"KH: loop gap after cycle 2 {np.abs(np.diff(ends, axis=0))[1:].max():.1e}")

    tr = run_point(ControlMode("displacement", -0.45, 0.45), disp_material(H_iso=(0.02, 0.0018)), 16, 1500)
    save("kh_ih", tr)
    inc = kappa_increments(tr, 16)
    print(f"KH-IH: plastic increment per cycle {inc[0]:.2e} -> {inc[-1]:.2e}, below 1e-6 from cycle "
          f"{int(np.argmax(inc < 1e-6)) + 1}")

    tr = run_point(ControlMode("displacement", -1.0, 2.0), disp_material(H_iso=(-0.018, -0.0016)), 80, 15)
    save("kh_is", tr)
    inc = kappa_increments(tr, 80)
    print(f"KH-IS: increments grow every cycle: {bool(np.all(np.diff(inc) > 0))} ({inc[0]:.3f} -> {inc[-1]:.3f})")

    tr = run_point(ControlMode("force", -0.5, 1.5), force_material(0.5), 80, 10)
    save("kh_r_force", tr)
    mean = tr["strain"][1:].reshape(10, 80).mean(axis=1)
    print("KH-R force: mean strain increment per cycle", np.array2string(np.diff(mean), precision=4))

    spec = C.MaterialSpec.from_young(205e3, 0.0, surfaces=(C.SurfaceParams(100.0, 22777.78),), w0=1e12,
                                     beta=0.4, uniaxial=True)
    tr = run_point(ControlMode("displacement", -0.005, 0.015), spec, 800, 10)
    save("kh_r_disp", tr)
    s = tr["stress"][1:].reshape(10, 800)
    mean = 0.5 * (s.max(axis=1) + s.min(axis=1))
    print(f"KH-R displacement: mean stress {mean[0]:.2f} -> {mean[-1]:.3f}")

    for gamma0 in (math.inf, 1.0):
        t = time.perf_counter()
        tr = run_point(ControlMode("displacement", -1.0, 2.0),
                       disp_material(H_iso=(-0.08, -0.0073), beta=0.2, w0=30.0, gamma0=gamma0), 80, 14)
        save(f"fatigue_gamma0_{gamma0}", tr)
        print(f"fatigue, gamma0 = {gamma0}: first damage in cycle {tr.first_damage_cycle()} "
              f"({time.perf_counter() - t:.1f}s)")


if __name__ == "__main__":
    main()
