"""Step counts of the two-dimensional example as the horizon grows.

The cubic restoring term has Jacobian of size ~3 (x1 - X1)^2 (1 + x2^6) and
x2 reaches e^T, so an explicit method needs roughly e^(9T) steps.
"""
import argparse
import time

import numpy as np

from majorode.errors import StepBudgetExceeded
from majorode.models import example512_rhs
from majorode.solver import StepControl, integrate_truncated

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--horizons", type=float, nargs="+", default=[0.5, 1.0, 1.25, 1.5, 1.75])
    p.add_argument("--x0", type=float, nargs=2, default=[1.0, 1.0])
    p.add_argument("--budget", type=float, default=60.0, help="wall-clock seconds per run")
    args = p.parse_args()
    f = example512_rhs()
    print(f"{'T':>6} {'steps':>9} {'rejected':>9} {'seconds':>8} {'log(steps)/T':>13}")
    for T in args.horizons:
        t0 = time.perf_counter()
        try:
            tr = integrate_truncated(f, 2, np.array(args.x0), T,
                                     StepControl(max_wall_time=args.budget), grid=[0.0, T])
        except StepBudgetExceeded as exc:
            print(f"{T:6.2f}  budget exhausted at t={exc.t:.3f}")
            continue
        s = tr.stats
        dt = time.perf_counter() - t0
        print(f"{T:6.2f} {s['steps']:9d} {s['rejected']:9d} {dt:8.2f} {np.log(s['steps']) / T:13.2f}")
