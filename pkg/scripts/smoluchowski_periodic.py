"""Periodic orbit of the modulated coagulation scenario with residual history."""
import argparse
from pathlib import Path

from majorode.config import build, load_config
from majorode.periodic import find_periodic, orbit

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "smolu_periodic.toml"))
    p.add_argument("--orbit-csv", default=None, help="write one period of the orbit here")
    args = p.parse_args()
    cfg = load_config(args.scenario)
    b = build(cfg)
    res = find_periodic(b.system, b.n, b.majorant, None, cfg.periodic.tol, cfg.periodic.max_iter,
                        b.weights, b.initial[0], b.mode, step_ctrl=cfg.step_control(),
                        nonneg_clip=cfg.run.nonneg_clip)
    for i, r in enumerate(res.history):
        print(f"{i:4d} {r:.3e}")
    print(f"method={res.method} iterations={res.iterations} "
          f"periodicity={res.periodicity_residual:.3e}")
    print("fixed point:", " ".join(f"{v:.6g}" for v in res.fixed_point.coords))
    if args.orbit_csv:
        orbit(b.system, b.n, res.fixed_point, None, cfg.periodic.orbit_points,
              cfg.step_control(), cfg.run.nonneg_clip).to_csv(args.orbit_csv)
