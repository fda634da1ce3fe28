"""Poincaré map and fixed-point search for periodic solutions."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BoxEscape, DimensionMismatch, NotConverged
from .majorant import MajorantFn
from .seqspace import NONNEG, SYMMETRIC, Box, TruncatedState, WeightProfile, weighted_norm
from .solver import StepControl, Trajectory, integrate_truncated
from .system import RhsSystem

PICARD = "picard-damped"
ANDERSON = "anderson"


@dataclass
class PoincareResult:
    fixed_point: TruncatedState
    residual: float
    iterations: int
    method: str
    converged: bool
    history: list = field(default_factory=list)
    projections: int = 0
    periodicity_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "fixed_point": self.fixed_point.coords.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
            "converged": self.converged,
            "residual_history": list(self.history),
            "projections": self.projections,
            "periodicity_residual": self.periodicity_residual,
        }


def _period(f: RhsSystem, omega):
    omega = f.period if omega is None else omega
    if omega is None or not omega > 0:
        raise ValueError("a positive period is required")
    return float(omega)


def poincare_map(f: RhsSystem, n: int, x_hat, omega: float | None = None,
                 step_ctrl: StepControl | None = None, nonneg_clip: bool = False) -> TruncatedState:
    """Integrate one period from ``x_hat`` at ``t = 0`` and return ``x(omega)``."""
    omega = _period(f, omega)
    x0 = x_hat.coords if isinstance(x_hat, TruncatedState) else np.asarray(x_hat, dtype=float)
    traj = integrate_truncated(f, n, x0, omega, step_ctrl, grid=np.array([0.0, omega]),
                               nonneg_clip=nonneg_clip)
    return TruncatedState(traj.states[-1], omega)


def orbit(f: RhsSystem, n: int, x_hat, omega: float | None = None, points: int = 101,
          step_ctrl: StepControl | None = None, nonneg_clip: bool = False) -> Trajectory:
    """One period of the solution through ``x_hat`` on a uniform grid."""
    omega = _period(f, omega)
    x0 = x_hat.coords if isinstance(x_hat, TruncatedState) else np.asarray(x_hat, dtype=float)
    return integrate_truncated(f, n, x0, omega, step_ctrl, grid=np.linspace(0.0, omega, points),
                               nonneg_clip=nonneg_clip)


def _anderson_step(xs, gs):
    """Type-II Anderson mixing of the last iterates ``xs`` and map values ``gs``."""
    X = np.array(xs)
    G = np.array(gs)
    R = G - X
    if len(xs) < 2:
        return G[-1]
    dR = np.diff(R, axis=0).T
    dG = np.diff(G, axis=0).T
    gamma, *_ = np.linalg.lstsq(dR, R[-1], rcond=None)
    return G[-1] - dG @ gamma


def find_periodic(f: RhsSystem, n: int, X: MajorantFn, omega: float | None = None,
                  tol: float = 1e-8, max_iter: int = 200, w: WeightProfile | None = None,
                  x0=None, mode: str = SYMMETRIC, alpha: float = 0.5, depth: int = 3,
                  switch_after: int = 10, stagnation: float = 0.9,
                  step_ctrl: StepControl | None = None, nonneg_clip: bool = False,
                  escape_fraction: float = 0.5, min_escape_iters: int = 4) -> PoincareResult:
    """Fixed point of the Poincaré map inside the box ``X(0)``.

    Damped Picard ``x <- (1 - alpha) x + alpha P(x)`` with projection onto the
    box, switching to Anderson mixing of depth ``depth`` once ``switch_after``
    iterations have passed and the residual shrinks by less than the factor
    ``stagnation`` per step.  On convergence the point is integrated over two
    periods and ``|x(2 omega) - x(omega)|_w <= 10 tol`` is required.
    """
    omega = _period(f, omega)
    w = w or WeightProfile.uniform()
    box = Box.from_majorant(X, 0.0, n, mode)
    x = np.zeros(n) if x0 is None else np.array(
        x0.coords if isinstance(x0, TruncatedState) else x0, dtype=float).reshape(-1)
    if x.size != n:
        raise DimensionMismatch(f"initial guess has {x.size} coordinates, level is {n}")
    x = box.project(x)
    P = lambda z: poincare_map(f, n, z, omega, step_ctrl, nonneg_clip).coords

    history = []
    method = PICARD
    projections = 0
    xs, gs = [], []
    it = 0
    converged = False
    while it < max_iter:
        px = P(x)
        r = weighted_norm(px - x, w)
        history.append(r)
        if r <= tol:
            converged = True
            break
        it += 1
        g = (1.0 - alpha) * x + alpha * px
        xs.append(x.copy())
        gs.append(g)
        xs, gs = xs[-(depth + 1):], gs[-(depth + 1):]
        if method == PICARD and it >= switch_after and len(history) >= 2 \
                and history[-1] > stagnation * history[-2]:
            method = ANDERSON
        x_new = _anderson_step(xs, gs) if method == ANDERSON else g
        projected = box.project(x_new)
        if not np.array_equal(projected, x_new):
            projections += 1
        x = projected
        if it >= min_escape_iters and projections > escape_fraction * it:
            res = PoincareResult(TruncatedState(x, 0.0), r, it, method, False, history, projections)
            raise BoxEscape(f"projection active in {projections} of {it} iterations; "
                            "the box may not be invariant", res)
    result = PoincareResult(TruncatedState(x, 0.0), history[-1], it, method, converged, history,
                            projections)
    if not converged:
        raise NotConverged(f"residual {history[-1]:.3e} above tol {tol:.1e} after {it} "
                           "iterations", result)
    traj = integrate_truncated(f, n, x, 2 * omega, step_ctrl,
                               grid=np.array([0.0, omega, 2 * omega]), nonneg_clip=nonneg_clip)
    result.periodicity_residual = weighted_norm(traj.states[2] - traj.states[1], w)
    if not result.periodicity_residual <= 10 * tol:
        result.converged = False
        raise NotConverged(f"re-integration over two periods drifts by "
                           f"{result.periodicity_residual:.3e} > {10 * tol:.1e}", result)
    return result


def find_periodic_multistart(f: RhsSystem, n: int, X: MajorantFn, starts, jobs: int | None = None,
                             **kw) -> list:
    """Run :func:`find_periodic` from several initial guesses; each entry of
    the returned list is a :class:`PoincareResult` or the raised exception."""
    def one(x0):
        try:
            return find_periodic(f, n, X, x0=x0, **kw)
        except (NotConverged, BoxEscape) as exc:
            return exc

    starts = list(starts)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(one, starts))
    return [one(s) for s in starts]


__all__ = ["PoincareResult", "poincare_map", "orbit", "find_periodic", "find_periodic_multistart",
           "PICARD", "ANDERSON", "NONNEG", "SYMMETRIC"]
