"""Per-step power balance residual of point runs under step refinement.

The residual of the trapezoidal work against the incremental dissipation is
first order in the step size; this prints its maximum for a few loading
densities so the rate can be read off.
"""

import numpy as np

from fatigue_pf.matpoint import ControlMode, run_point
from fatigue_pf import solver

from point_experiments import disp_material


def worst_ratio(tr):
    E, D, W = tr["energy"], tr["dissipation"], tr["work"]
    return max(solver.balance_ratio(E[i] - E[i - 1], D[i] - D[i - 1], W[i] - W[i - 1],
                                    max(abs(E[i - 1]), abs(D[i - 1]), abs(W[i - 1])))
               for i in range(1, len(E)))


def main():
    cases = {
        "KH": disp_material(),
        "KH-R": disp_material(beta=0.2),
        "KH-IS-R + damage": disp_material(H_iso=(-0.08, -0.0073), beta=0.2, w0=30.0, gamma0=1.0),
    }
    print("steps/cycle " + " ".join(f"{name:>18s}" for name in cases))
    for spc in (40, 80, 160, 320, 640):
        vals = [worst_ratio(run_point(ControlMode("displacement", -1.0, 2.0), spec, spc, 3)) for spec in cases.values()]
        print(f"{spc:11d} " + " ".join(f"{v:18.2e}" for v in vals))


if __name__ == "__main__":
    main()
