"""Level-doubling table for the PDE coefficient system u_j' = -u_j + (j+1) u_{j+1}."""
import argparse

from majorode.majorant import PdeMajorantSpec, build_pde_majorant, pde_weight_profile
from majorode.models import PdeModelSpec, pde_rhs
from majorode.solver import StepControl, solve_adaptive

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=4.0, help="geometric weight ratio")
    p.add_argument("--n-start", type=int, default=4)
    p.add_argument("--n-max", type=int, default=128)
    p.add_argument("--tol", type=float, default=0.0, help="0 runs every level")
    args = p.parse_args()

    U = build_pde_majorant(PdeMajorantSpec(0, 1, 1.0), 2 * args.n_max)
    w = pde_weight_profile(U, args.radius)
    f = pde_rhs(PdeModelSpec(0, 1, a=1.0))
    _, rep = solve_adaptive(f, U, lambda n: 0.5 * U.values(0.0, n), args.T, w, args.tol,
                            args.n_start, args.n_max, StepControl(atol=1e-13, rtol=1e-11))
    print(f"{'n':>5} {'difference':>12} {'tail bound':>12} {'total':>12}")
    for n, d, tb, tot in zip(rep.levels[1:], rep.diffs, rep.tails, rep.totals):
        print(f"{n:5d} {d:12.3e} {tb:12.3e} {tot:12.3e}")
