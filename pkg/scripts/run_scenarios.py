"""Run every scenario in scenarios/ through the CLI and summarize exit codes."""
import argparse
import sys
import time
from pathlib import Path

from majorode.cli import main

ROOT = Path(__file__).resolve().parent.parent

COMMANDS = {"linear_periodic": "periodic", "smolu_periodic": "periodic",
            "stability_offdiag": "stability"}


def run(out: Path, names=None):
    rows = []
    for scen in sorted((ROOT / "scenarios").glob("*.toml")):
        if names and scen.stem not in names:
            continue
        cmd = COMMANDS.get(scen.stem, "run")
        t0 = time.perf_counter()
        code = main([cmd, "--scenario", str(scen), "--out", str(out / scen.stem)])
        rows.append((scen.stem, cmd, code, time.perf_counter() - t0))
    return rows


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out", help="parent output directory")
    p.add_argument("names", nargs="*", help="scenario stems to run (default: all)")
    args = p.parse_args()
    rows = run(Path(args.out), set(args.names))
    for name, cmd, code, dt in rows:
        print(f"{name:20s} {cmd:10s} exit={code} {dt:7.2f}s")
    sys.exit(max((r[2] for r in rows), default=0))
