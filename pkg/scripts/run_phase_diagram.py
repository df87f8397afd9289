"""Critical delta versus gamma for the GP model, printed as a table.

    python scripts/run_phase_diagram.py [--n 97] [--kind GP] [--gammas 0.1,0.3,2/3]

Set CISIM_THREADS to run gamma values in parallel.
"""

import argparse
from fractions import Fraction

import numpy as np

from cisim.localization import phase_diagram
from cisim.model import ModelParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=97, help="grid points per axis")
    ap.add_argument("--kind", default="GP", choices=["GP", "FULL"])
    ap.add_argument("--gammas", default="0.1,0.2,0.3,0.4,0.5,2/3")
    ap.add_argument("--step", type=float, default=0.02)
    args = ap.parse_args()

    gammas = [float(Fraction(s)) for s in args.gammas.split(",")]
    deltas = np.round(np.arange(0.0, 2.0 + 1e-9, args.step), 10)
    points = phase_diagram(args.kind, ModelParams(), gammas, deltas, nx=args.n, ny=args.n)
    print(f"{'gamma':>8} {'d_infl':>8} {'d_tan':>8} {'slope':>8}")
    for c in points:
        print(f"{c.gamma:8.4f} {c.delta_inflection:8.4f} {c.delta_tangent:8.4f} {c.slope:8.3f}")


if __name__ == "__main__":
    main()
