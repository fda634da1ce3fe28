"""Command-line scenario runner.

Subcommands: run, certify-only, periodic, stability, compare, print-defaults.
Exit status is 0 on success, 2 when a certificate is falsified (the run
still completes) and 1 on errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import tomli_w

from . import certify as cert
from .config import ScenarioConfig, StabilityModel, build, defaults, load_config
from .errors import GridMismatch, InapplicablePositivity, MajorodeError, NotConverged
from .models import classify_stability
from .periodic import find_periodic, orbit
from .report import SCHEMA_VERSION, write_json
from .seqspace import NONNEG, TailRule, WeightProfile, weighted_norm
from .solver import PenaltyConfig, Trajectory, integrate_truncated, penalty_rhs, solve_adaptive

log = logging.getLogger("majorode")

EXIT_OK, EXIT_ERROR, EXIT_FALSIFIED = 0, 1, 2


def _certificates(cfg: ScenarioConfig, built, T: float, jobs=None) -> list:
    grid = np.linspace(0.0, T, cfg.certify.grid_points)
    kw = dict(grid=grid, face_samples=cfg.certify.face_samples, rng_seed=cfg.seed, jobs=jobs)
    f, X, n = built.system, built.majorant, built.n
    out = []
    if X is None:
        return out
    checks = [(cert.UPPER_NONNEG, cert.check_upper_nonneg) if built.mode == NONNEG
              else (cert.UPPER_SYMMETRIC, cert.check_upper_symmetric)]
    if cfg.certify.lower:
        checks.append((cert.LOWER, cert.check_lower))
    for theorem, check in checks:
        try:
            out.append(check(f, X, n, **kw))
        except InapplicablePositivity as exc:
            out.append(cert.Certificate.inapplicable(theorem, str(exc), n, cfg.seed))
    for x0 in built.initial:
        out.append(cert.check_initial_inclusion(x0, X, built.mode))
    return out


def _write_certificates(path: Path, certs) -> bool:
    falsified = any(c.falsified for c in certs)
    write_json(path / "certificate.json", {
        "schema_version": SCHEMA_VERSION,
        "falsified": falsified,
        "certificates": [c.to_dict() for c in certs],
    })
    return falsified


def _prepare(args):
    cfg = load_config(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out or cfg.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def run_scenario(cfg: ScenarioConfig, out: Path, jobs=None, certify_only: bool = False) -> int:
    """Certify, then integrate; writes certificate.json, trajectory.csv and stats.json."""
    built = build(cfg)
    T = cfg.run.T
    certs = _certificates(cfg, built, T, jobs)
    falsified = _write_certificates(out, certs)
    for c in certs:
        log.info("%s: %s (min margin %.3e)", c.theorem, c.verdict, c.min_margin)
    if falsified:
        log.warning("a certificate is falsified; integrating in monitor mode")
    if certify_only:
        return EXIT_FALSIFIED if falsified else EXIT_OK
    f = built.system
    if cfg.run.penalty:
        f = penalty_rhs(f, built.majorant, PenaltyConfig(cfg.run.epsilon), built.n, T)
    grid = np.linspace(0.0, T, cfg.run.output_points)
    ctrl = cfg.step_control()
    stats = {"schema_version": SCHEMA_VERSION, "scenario": cfg.name, "seed": cfg.seed,
             "certificate_falsified": falsified,
             "verdicts": {c.theorem: c.verdict for c in certs}, "runs": []}
    stats.update(built.extra)
    status = EXIT_FALSIFIED if falsified else EXIT_OK
    n_max = cfg.run.n_max
    for i, x0 in enumerate(built.initial):
        entry = {"initial": np.asarray(x0).tolist()}
        try:
            if n_max is not None and n_max > cfg.run.n_start:
                traj, rep = solve_adaptive(f, built.majorant, lambda n, x0=x0: x0[:n], T,
                                           built.weights, cfg.run.tol, cfg.run.n_start, n_max,
                                           ctrl, grid, built.mode, cfg.run.nonneg_clip)
                entry["convergence"] = rep.to_dict()
            else:
                traj = integrate_truncated(f, built.n, x0, T, ctrl, grid, built.majorant,
                                           built.mode, cfg.run.nonneg_clip)
        except MajorodeError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            log.error("initial condition %d: %s", i, entry["error"])
            stats["runs"].append(entry)
            status = EXIT_ERROR
            continue
        entry.update(traj.stats)
        stats["runs"].append(entry)
        traj.to_csv(out / ("trajectory.csv" if i == 0 else f"trajectory_{i}.csv"))
    write_json(out / "stats.json", stats)
    return status


def periodic_scenario(cfg: ScenarioConfig, out: Path, jobs=None) -> int:
    built = build(cfg)
    f = built.system
    omega = cfg.periodic.omega or f.period
    if omega is None:
        raise MajorodeError("periodic runs need model.period or periodic.omega")
    certs = _certificates(cfg, built, omega, jobs)
    certs.append(cert.check_periodic_closure(built.majorant, omega, built.n))
    falsified = _write_certificates(out, certs)
    status = EXIT_FALSIFIED if falsified else EXIT_OK
    try:
        res = find_periodic(f, built.n, built.majorant, omega, cfg.periodic.tol,
                            cfg.periodic.max_iter, built.weights, built.initial[0], built.mode,
                            step_ctrl=cfg.step_control(), nonneg_clip=cfg.run.nonneg_clip)
    except NotConverged as exc:
        write_json(out / "poincare.json", {"schema_version": SCHEMA_VERSION,
                                           "error": str(exc), **exc.result.to_dict()})
        log.error("%s", exc)
        return EXIT_ERROR
    write_json(out / "poincare.json", {"schema_version": SCHEMA_VERSION, "omega": omega,
                                       **res.to_dict()})
    orb = orbit(f, built.n, res.fixed_point, omega, cfg.periodic.orbit_points,
                cfg.step_control(), cfg.run.nonneg_clip)
    orb.to_csv(out / "orbit.csv")
    write_json(out / "stats.json", {"schema_version": SCHEMA_VERSION, "scenario": cfg.name,
                                    "seed": cfg.seed, "certificate_falsified": falsified,
                                    "verdicts": {c.theorem: c.verdict for c in certs},
                                    "orbit": orb.stats})
    return status


def stability_scenario(cfg: ScenarioConfig, out: Path, jobs=None) -> int:
    m = cfg.model
    if not isinstance(m, StabilityModel):
        raise MajorodeError("the stability subcommand needs model.kind = 'stability'")
    built = build(cfg)
    rep = classify_stability(built.system, m.horizon, m.quad_tol, m.x_hat, m.asymptotic)
    doc = {"schema_version": SCHEMA_VERSION, "scenario": cfg.name, **rep.to_dict(),
           "perturbation_audit": built.system.audit_perturbation(seed=cfg.seed, T=m.horizon)}
    write_json(out / "stability.json", doc)
    status = EXIT_OK
    if rep.envelope is not None:
        built.majorant = rep.envelope
        T = min(cfg.run.T, m.horizon)
        certs = _certificates(cfg, built, T, jobs)
        if _write_certificates(out, certs):
            status = EXIT_FALSIFIED
    print(f"verdict: {rep.verdict}")
    return status


def _profile(spec: str) -> WeightProfile:
    if spec == "uniform":
        return WeightProfile.uniform()
    if spec == "inverse-square":
        return WeightProfile.inverse_square(tail=TailRule("power", 1.0, 2.0))
    if spec.startswith("geometric:"):
        return WeightProfile.geometric(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown weight profile {spec!r}")


def compare(trajectory, oracle, w: WeightProfile | None = None, interpolate: bool = False) -> float:
    """Max over time of the weighted norm of ``trajectory - oracle``.

    Missing coordinates read as zero.  Time grids must match unless
    ``interpolate`` is set (the oracle is then interpolated linearly).
    """
    a = trajectory if isinstance(trajectory, Trajectory) else Trajectory.from_csv(trajectory)
    b = oracle if isinstance(oracle, Trajectory) else Trajectory.from_csv(oracle)
    w = w or WeightProfile.uniform()
    n = max(a.n, b.n)
    A = np.zeros((a.times.size, n))
    A[:, : a.n] = a.states
    same = a.times.size == b.times.size and np.allclose(a.times, b.times, rtol=0, atol=1e-12)
    if same:
        B = np.zeros_like(A)
        B[:, : b.n] = b.states
    elif interpolate:
        B = np.zeros_like(A)
        for k in range(b.n):
            B[:, k] = np.interp(a.times, b.times, b.states[:, k])
    else:
        raise GridMismatch("time grids differ; pass --interpolate to interpolate the oracle")
    return max(weighted_norm(A[i] - B[i], w) for i in range(A.shape[0]))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="majorode", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "certify, then integrate"),
                        ("certify-only", "write certificate.json without integrating"),
                        ("periodic", "find a periodic orbit via the Poincare map"),
                        ("stability", "classify a time-varying linear system")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", required=True, help="scenario TOML file")
        s.add_argument("--out", help="output directory (overrides outputs.dir)")
        s.add_argument("--seed", type=int, help="sampling seed (overrides the scenario)")
        s.add_argument("--jobs", type=int, default=None, help="worker cap for certification")
    c = sub.add_parser("compare", help="max weighted deviation between two trajectory CSVs")
    c.add_argument("trajectory")
    c.add_argument("oracle")
    c.add_argument("--weights", default="uniform",
                   help="uniform, inverse-square or geometric:<ratio>")
    c.add_argument("--interpolate", action="store_true")
    d = sub.add_parser("print-defaults", help="print a scenario with every default spelled out")
    d.add_argument("--model", default="pde",
                   choices=["pde", "smoluchowski", "stability", "example512", "custom-linear"])
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "print-defaults":
            sys.stdout.write(tomli_w.dumps(defaults(args.model)))
            return EXIT_OK
        if args.command == "compare":
            dev = compare(args.trajectory, args.oracle, _profile(args.weights), args.interpolate)
            print(format(dev, ".17g"))
            return EXIT_OK
        cfg, out = _prepare(args)
        if args.command == "run":
            return run_scenario(cfg, out, args.jobs)
        if args.command == "certify-only":
            return run_scenario(cfg, out, args.jobs, certify_only=True)
        if args.command == "periodic":
            return periodic_scenario(cfg, out, args.jobs)
        return stability_scenario(cfg, out, args.jobs)
    except (MajorodeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
