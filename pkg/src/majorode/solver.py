"""Galerkin-truncated integration: Dormand-Prince 5(4), penalty mode, level doubling."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (DimensionMismatch, EpsilonTooLarge, NonFiniteRhs, StepBudgetExceeded,
                     StepSizeUnderflow)
from .majorant import MajorantFn
from .seqspace import SYMMETRIC, Box, TruncatedState, WeightProfile, tail_norm_bound, \
    weighted_norm
from .system import RhsSystem

# Dormand-Prince 5(4) tableau (Hairer, Norsett & Wanner, vol. I, table 5.2)
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
])
DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
DP_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
DP_E = DP_B - DP_B4
# continuous extension: y(t + th h) = y + h * K^T @ DP_P @ [th, th^2, th^3, th^4]
DP_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

CLIP_BAND = 1e-14


@dataclass
class StepControl:
    atol: float = 1e-10
    rtol: float = 1e-8
    h_fixed: float | None = None
    h_init: float | None = None
    h_max: float = math.inf
    max_steps: int = 2_000_000
    max_wall_time: float | None = None
    safety: float = 0.9


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (len(times), n)
    n: int
    stats: dict = field(default_factory=dict)

    def state(self, i: int) -> TruncatedState:
        return TruncatedState(self.states[i], self.times[i])

    @property
    def final(self) -> TruncatedState:
        return self.state(-1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{k}" for k in range(1, self.n + 1)])
            for t, row in zip(self.times, self.states):
                w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected header starting with 't'")
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), -1)
        return cls(data[:, 0], data[:, 1:], data.shape[1] - 1)


def _rms(v):
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(fun, t0, y0, f0, direction_len, atol, rtol):
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_len)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0 if np.all(np.isfinite(f1)) else math.inf
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, direction_len)


def dopri5(fun: Callable, t0: float, y0, t_end: float, grid=None, ctrl: StepControl | None = None,
           post_step: Callable | None = None, monitor: Callable | None = None):
    """Integrate ``y' = fun(t, y)`` on ``[t0, t_end]``.

    Returns ``(grid, states, stats)`` with states at the requested output
    grid (dense output between steps).  ``post_step(t, y)`` may return a
    modified state after each accepted step; ``monitor(t, y)`` sees every
    accepted step end and every output node.
    """
    ctrl = ctrl or StepControl()
    y = np.array(y0, dtype=float).reshape(-1)
    t = float(t0)
    grid = np.linspace(t0, t_end, 101) if grid is None else np.asarray(grid, dtype=float)
    if grid[0] < t0 - 1e-14 or grid[-1] > t_end + 1e-12 * max(1.0, abs(t_end)):
        raise ValueError("output grid must lie in [t0, t_end]")
    out = np.empty((grid.size, y.size))
    f = np.asarray(fun(t, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteRhs(f"non-finite right-hand side at t={t}", t, y.copy())
    stats = {"steps": 0, "rejected": 0, "rhs_evals": 1}
    gi = 0
    while gi < grid.size and grid[gi] <= t:
        out[gi] = y
        if monitor:
            monitor(grid[gi], y)
        gi += 1
    if ctrl.h_fixed is not None:
        h = ctrl.h_fixed
    elif ctrl.h_init is not None:
        h = ctrl.h_init
    else:
        h = _initial_step(fun, t, y, f, t_end - t, ctrl.atol, ctrl.rtol)
        stats["rhs_evals"] += 1
    h = min(h, ctrl.h_max)
    K = np.empty((7, y.size))
    started = time.perf_counter()
    while t < t_end:
        if stats["steps"] + stats["rejected"] >= ctrl.max_steps:
            raise StepBudgetExceeded(f"step budget {ctrl.max_steps} exhausted at t={t}", t, y.copy())
        if ctrl.max_wall_time is not None and time.perf_counter() - started > ctrl.max_wall_time:
            raise StepBudgetExceeded(f"wall-clock budget {ctrl.max_wall_time}s exhausted at t={t}",
                                     t, y.copy())
        hmin = 16 * np.finfo(float).eps * max(1.0, abs(t))
        last = t + h >= t_end - hmin
        if last:
            h = t_end - t
        K[0] = f
        for s in range(1, 6):
            K[s] = fun(t + DP_C[s] * h, y + h * (DP_A[s, :s] @ K[:s]))
        y_new = y + h * (DP_B[:6] @ K[:6])
        K[6] = fun(t + h, y_new)
        stats["rhs_evals"] += 6
        if ctrl.h_fixed is None:
            scale = ctrl.atol + ctrl.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(h * (DP_E @ K) / scale)
            if not math.isfinite(err) or err > 1.0:
                stats["rejected"] += 1
                h *= 0.2 if not math.isfinite(err) else max(0.2, ctrl.safety * err ** -0.2)
                if h < hmin:
                    raise StepSizeUnderflow(
                        f"step size underflow at t={t} (possible blow-up)", t, y.copy())
                continue
            grow = 10.0 if err == 0 else min(10.0, ctrl.safety * err ** -0.2)
        elif not np.all(np.isfinite(K)):
            raise NonFiniteRhs(f"non-finite right-hand side in step from t={t}", t, y.copy())
        t_new = t_end if last else t + h
        Q = K.T @ DP_P
        while gi < grid.size and grid[gi] < t_new:
            th = (grid[gi] - t) / h
            out[gi] = y + h * (Q @ (th ** np.arange(1, 5)))
            if monitor:
                monitor(grid[gi], out[gi])
            gi += 1
        f_new = K[6]
        if post_step is not None:
            y_mod = post_step(t_new, y_new)
            if y_mod is not y_new and not np.array_equal(y_mod, y_new):
                y_new = y_mod
                f_new = np.asarray(fun(t_new, y_new), dtype=float)
                stats["rhs_evals"] += 1
        if not np.all(np.isfinite(f_new)):
            raise NonFiniteRhs(f"non-finite right-hand side at t={t_new}", t_new, y_new.copy())
        t, y, f = t_new, y_new, f_new.copy()
        stats["steps"] += 1
        if monitor:
            monitor(t, y)
        while gi < grid.size and grid[gi] <= t + hmin:
            out[gi] = y
            if monitor:
                monitor(grid[gi], y)
            gi += 1
        if ctrl.h_fixed is None:
            h = min(h * grow, ctrl.h_max)
    return grid, out, stats


class _BoxMonitor:
    def __init__(self, X: MajorantFn, n: int, mode: str):
        self.X, self.n, self.mode = X, n, mode
        self.max_excess = 0.0
        self.where = None

    def __call__(self, t, y):
        e = Box.from_majorant(self.X, t, self.n, self.mode).excess(y)
        if e > self.max_excess:
            self.max_excess = e
            self.where = float(t)


def _clip_nonneg(t, y):
    band = (y < 0) & (y > -CLIP_BAND)
    if np.any(band):
        y = y.copy()
        y[band] = 0.0
    return y


def integrate_truncated(f: RhsSystem, n: int, x0, T: float, step_ctrl: StepControl | None = None,
                        grid=None, majorant: MajorantFn | None = None, mode: str = SYMMETRIC,
                        nonneg_clip: bool = False, t0: float = 0.0) -> Trajectory:
    """Solve ``y' = P_n f(t, y)``, ``y(t0) = P_n x0`` on ``[t0, T]``.

    With a majorant the box excess is monitored (not enforced).  With
    ``nonneg_clip`` values in ``(-1e-14, 0)`` are set to zero after each
    accepted step; only use it when the zero-face certificate holds.
    """
    x0 = x0.coords if isinstance(x0, TruncatedState) else np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n:
        raise DimensionMismatch(f"initial state has {x0.size} coordinates, level is {n}")
    if not T > t0:
        raise ValueError("T must exceed the start time")
    mon = _BoxMonitor(majorant, n, mode) if majorant is not None else None
    times, states, stats = dopri5(f.rhs, t0, x0, T, grid, step_ctrl,
                                  post_step=_clip_nonneg if nonneg_clip else None, monitor=mon)
    stats.update(n=n, mode=mode, penalty=isinstance(f, PenaltyRhs),
                 max_box_excess=None if mon is None else mon.max_excess,
                 box_excess_time=None if mon is None else mon.where)
    return Trajectory(times, states, n, stats)


def bump(s):
    """``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero elsewhere; ``bump(0) = 1``."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class PenaltyConfig:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def phi(self, s):
        return self.epsilon * bump(np.asarray(s) / self.epsilon)


class PenaltyRhs(RhsSystem):
    """``f_k - phi(y_k - X_k) + phi(y_k + X_k)``: pushes states off the box faces."""

    def __init__(self, base: RhsSystem, X: MajorantFn, cfg: PenaltyConfig):
        self.base, self.X, self.cfg = base, X, cfg
        self.period = base.period
        self.nonneg = base.nonneg
        self.name = f"penalty({base.name})"

    def coupling_reach(self, k):
        return self.base.coupling_reach(k)

    def rhs(self, t, y):
        y = np.asarray(y, dtype=float)
        Xt = self.X.values(t, y.size)
        return self.base.rhs(t, y) - self.cfg.phi(y - Xt) + self.cfg.phi(y + Xt)

    def component(self, k, t, Y):
        Xk = self.X.value(k, t)
        yk = np.atleast_2d(Y)[:, k - 1]
        return self.base.component(k, t, Y) - self.cfg.phi(yk - Xk) + self.cfg.phi(yk + Xk)


def penalty_rhs(f: RhsSystem, X: MajorantFn, cfg: PenaltyConfig, n: int, T: float,
                grid_points: int = 101) -> PenaltyRhs:
    """Wrap ``f`` with the mollified face penalty.

    Requires ``epsilon < 2 min X_k(t)`` over ``k <= n`` and a time grid on
    ``[0, T]`` so the two bumps never overlap.
    """
    lo = min(float(np.min(X.values(t, n))) for t in np.linspace(0.0, T, grid_points))
    if not cfg.epsilon < 2.0 * lo:
        raise EpsilonTooLarge(f"epsilon={cfg.epsilon} must be below 2*min X = {2 * lo}")
    return PenaltyRhs(f, X, cfg)


@dataclass
class ConvergenceReport:
    levels: list
    diffs: list
    tails: list
    totals: list
    converged: bool
    tol: float

    @property
    def level(self) -> int:
        return self.levels[-1]

    def to_dict(self):
        return {"levels": self.levels, "diffs": self.diffs, "tails": self.tails,
                "totals": self.totals, "converged": self.converged, "tol": self.tol}


def solve_adaptive(f: RhsSystem, X: MajorantFn, x0_rule: Callable[[int], np.ndarray], T: float,
                   w: WeightProfile, tol: float, n_start: int, n_max: int,
                   step_ctrl: StepControl | None = None, grid=None, mode: str = SYMMETRIC,
                   nonneg_clip: bool = False, monitor: bool = True):
    """Integrate at levels ``n_start, 2 n_start, ...`` until the weighted
    final-time difference of consecutive levels (on the shared coordinates)
    plus the majorant tail bound beyond the coarser level drops below ``tol``.

    Returns ``(finest trajectory, ConvergenceReport)``; running out of levels
    is reported as ``converged=False``, not raised.
    """
    if n_start < 1 or n_max < n_start:
        raise ValueError("need 1 <= n_start <= n_max")
    tgrid = np.linspace(0.0, T, 101) if grid is None else np.asarray(grid, dtype=float)

    def run(n):
        return integrate_truncated(f, n, x0_rule(n), T, step_ctrl, tgrid,
                                   X if monitor else None, mode, nonneg_clip)

    levels, diffs, tails, totals = [n_start], [], [], []
    prev = run(n_start)
    converged = False
    n = n_start
    while 2 * n <= n_max:
        cur = run(2 * n)
        d = weighted_norm(cur.final.coords[:n] - prev.final.coords, w)
        tb = tail_norm_bound(X, w, n, tgrid)
        levels.append(2 * n)
        diffs.append(d)
        tails.append(tb)
        totals.append(d + tb)
        prev, n = cur, 2 * n
        if d + tb < tol:
            converged = True
            break
    return prev, ConvergenceReport(levels, diffs, tails, totals, converged, tol)


PAPER_FAITHFUL = "paper-faithful"
MASS_CONSERVING = "mass-conserving"


def smoluchowski_truncation_mode(mode: str) -> Callable[[int, int], int]:
    """Upper limit of the loss sum ``x_k sum_j b_kj x_j`` at level ``n``.

    paper-faithful: ``j <= n``; mass-conserving: ``j <= n - k``.
    """
    if mode == PAPER_FAITHFUL:
        return lambda k, n: n
    if mode == MASS_CONSERVING:
        return lambda k, n: max(0, n - k)
    raise ValueError(f"unknown truncation mode {mode!r}")


def write_stats(path, stats: dict):
    from .report import dumps
    with open(path, "w") as fh:
        fh.write(dumps(stats))
