"""Box excess of penalty trajectories against a constant outward drift.

The penalty adds at most epsilon to the right-hand side, so it contains the
state only when the drift at the face is below epsilon.
"""
import argparse

import numpy as np

from majorode.majorant import SequenceMajorant
from majorode.solver import PenaltyConfig, integrate_truncated, penalty_rhs
from majorode.system import FunctionRhs

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-3])
    p.add_argument("--drifts", type=float, nargs="+", default=[2.0, 2e-2, 5e-4])
    p.add_argument("--T", type=float, default=4.0)
    p.add_argument("--x0", type=float, default=0.999, help="start below the face x = 1")
    args = p.parse_args()
    X = SequenceMajorant(np.ones(1))
    print(f"{'drift':>9} {'eps':>9} {'plain excess':>13} {'penalty excess':>15}")
    for d in args.drifts:
        f = FunctionRhs(lambda t, y, d=d: np.full(y.size, d))
        plain = integrate_truncated(f, 1, [args.x0], args.T, majorant=X).stats["max_box_excess"]
        for eps in args.eps:
            g = penalty_rhs(f, X, PenaltyConfig(eps), 1, args.T)
            pen = integrate_truncated(g, 1, [args.x0], args.T, majorant=X).stats["max_box_excess"]
            print(f"{d:9.1e} {eps:9.1e} {plain:13.3e} {pen:15.3e}")
