"""Face-inequality certificates for majorant boxes.

Each check evaluates the face inequality of the box ``W_X`` on a time grid:
for every coordinate ``k`` the coordinate is pinned to a face value and the
other coordinates are drawn from the box.  A pass is a *sampling* result
unless the system declares affine structure, in which case the extreme
point of every face is evaluated exactly (``certified-exact``).  Nothing is
claimed about coordinates above the truncation level.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InapplicablePositivity
from .majorant import MajorantFn
from .report import SCHEMA_VERSION
from .seqspace import NONNEG, SYMMETRIC, Box, TruncatedState
from .system import RhsSystem

UPPER_SYMMETRIC = "upper-symmetric"
UPPER_NONNEG = "upper-nonneg"
LOWER = "lower"
PERIODIC_CLOSURE = "periodic-closure"
INITIAL_INCLUSION = "initial-inclusion"

CERTIFIED = "certified-by-sampling"
CERTIFIED_EXACT = "certified-exact"
FALSIFIED = "falsified"
INAPPLICABLE = "inapplicable"

REL_TOL = 1e-12
MAX_VERTEX_DEPS = 12
TRUNCATION_NOTE = "checked for k <= n only; coordinates above the truncation are not covered"


@dataclass
class Certificate:
    theorem: str
    verdict: str
    min_margin: float
    worst_sample: dict | None
    samples_used: int
    seed: int | None = None
    n: int | None = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict in (CERTIFIED, CERTIFIED_EXACT)

    @property
    def falsified(self) -> bool:
        return self.verdict == FALSIFIED

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "theorem": self.theorem,
            "verdict": self.verdict,
            "heuristic": self.verdict == CERTIFIED,
            "min_margin": self.min_margin,
            "worst_sample": self.worst_sample,
            "samples": self.samples_used,
            "seed": self.seed,
            "n": self.n,
            "notes": list(self.notes),
        }
        d.update(self.extra)
        return d

    @classmethod
    def inapplicable(cls, theorem: str, reason: str, n=None, seed=None) -> "Certificate":
        return cls(theorem, INAPPLICABLE, float("nan"), None, 0, seed, n, [reason])


@dataclass(frozen=True)
class _Face:
    """One face family: pin ``x_k = pin * X_k`` and require
    ``want * (dcoef * X_k' - f_k) >= 0``; the free coordinates range over the
    symmetric or non-negative box."""

    label: str
    pin: float
    free: str
    want: float
    dcoef: float

    def margin(self, fk, dk):
        return self.want * (self.dcoef * dk - fk)


_UPPER_FACES = (_Face("+", 1.0, SYMMETRIC, 1.0, 1.0), _Face("-", -1.0, SYMMETRIC, -1.0, -1.0))
_LOWER_FACES = (_Face("+", 1.0, SYMMETRIC, -1.0, 1.0), _Face("-", -1.0, SYMMETRIC, 1.0, -1.0))
_NONNEG_FACES = (_Face("top", 1.0, NONNEG, 1.0, 1.0), _Face("zero", 0.0, NONNEG, -1.0, 0.0))


def _grid(grid, T):
    if grid is None:
        return np.linspace(0.0, T, 101)
    return np.atleast_1d(np.asarray(grid, dtype=float))


def _exact_points(f: RhsSystem, k, t, Xt, face: _Face):
    """Extreme points of the face for affine systems, or None if unavailable."""
    n = Xt.size
    lo = -Xt if face.free == SYMMETRIC else np.zeros(n)
    hi = Xt
    pin = face.pin * Xt[k - 1]
    if hasattr(f, "linear_row"):
        row, _ = f.linear_row(k, t, n)
        x = np.where(face.want * row > 0, hi, lo)
        x[k - 1] = pin
        return x[None, :]
    deps = [d for d in f.dependencies(k, n) if d != k - 1]
    if len(deps) > MAX_VERTEX_DEPS:
        return None
    base = np.zeros(n)
    base[k - 1] = pin
    pts = np.repeat(base[None, :], 2 ** len(deps), axis=0)
    for r, choice in enumerate(itertools.product((0, 1), repeat=len(deps))):
        for d, c in zip(deps, choice):
            pts[r, d] = hi[d] if c else lo[d]
    return pts


def _check_time(f, X, n, t, ti, faces, face_samples, seed):
    Xt = X.values(t, n)
    Dt = X.derivs(t, n)
    bad = np.nonzero(~(Xt > 0))[0]
    if bad.size:
        k = int(bad[0]) + 1
        raise InapplicablePositivity(f"X_{k}({t}) = {Xt[k - 1]} is not positive", t, k,
                                     float(Xt[k - 1]))
    best = (np.inf, None)
    per_face = {face.label: np.inf for face in faces}
    count = 0
    violated = False
    exact = bool(f.affine)
    for k in range(1, n + 1):
        tol = REL_TOL * (1.0 + abs(Dt[k - 1]))
        for fi, face in enumerate(faces):
            lo = -Xt if face.free == SYMMETRIC else np.zeros(n)
            pin = face.pin * Xt[k - 1]
            if face.free == SYMMETRIC:
                corners = np.vstack([face.pin * Xt, -face.pin * Xt])
            else:
                corners = np.vstack([Xt, np.zeros(n)])
            rng = np.random.default_rng([seed, ti, k, fi])
            Y = lo + (Xt - lo) * rng.random((face_samples, n))
            Y = np.vstack([corners, Y])
            if f.affine:
                ex = _exact_points(f, k, t, Xt, face)
                if ex is None:
                    exact = False
                else:
                    Y = np.vstack([Y, ex])
            Y[:, k - 1] = pin
            m = face.margin(f.component(k, t, Y), Dt[k - 1])
            count += Y.shape[0]
            i = int(np.argmin(m))
            per_face[face.label] = min(per_face[face.label], float(m[i]))
            if np.any(m < -tol):
                violated = True
            if m[i] < best[0]:
                best = (float(m[i]), {"t": float(t), "k": k, "sign": face.label,
                                      "x": Y[i].tolist()})
    return best, per_face, count, violated, exact


def _face_certificate(theorem, faces, f, X, n, grid, face_samples, rng_seed, jobs):
    ts = list(enumerate(grid))
    work = lambda item: _check_time(f, X, n, item[1], item[0], faces, face_samples, rng_seed)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, ts))
    else:
        results = [work(item) for item in ts]
    best = (np.inf, None)
    per_face = {face.label: np.inf for face in faces}
    count, violated, exact = 0, False, True
    for (m, s), pf, c, v, e in results:
        if m < best[0]:
            best = (m, s)
        for key, val in pf.items():
            per_face[key] = min(per_face[key], val)
        count += c
        violated |= v
        exact &= e
    if violated:
        verdict = FALSIFIED
    else:
        verdict = CERTIFIED_EXACT if (f.affine and exact) else CERTIFIED
    notes = [TRUNCATION_NOTE if getattr(f, "tail_note", None) is None else f.tail_note]
    if verdict == CERTIFIED_EXACT:
        notes.append("faces exact (affine structure) at each grid time; time is sampled")
    elif verdict == CERTIFIED:
        notes.append("heuristic: face inequality holds on all samples, not proven")
    extra = {"face_margins": per_face, "grid_points": len(grid)}
    return Certificate(theorem, verdict, best[0], best[1], count, rng_seed, n, notes, extra)


def check_upper_symmetric(f: RhsSystem, X: MajorantFn, n: int, grid=None, face_samples: int = 128,
                          rng_seed: int = 0, T: float = 1.0, jobs: int | None = None) -> Certificate:
    """``+-f_k(t, x with x_k = +-X_k(t)) <= X_k'(t)`` on ``|x| <= X(t)``."""
    return _face_certificate(UPPER_SYMMETRIC, _UPPER_FACES, f, X, n, _grid(grid, T),
                             face_samples, rng_seed, jobs)


def check_upper_nonneg(f: RhsSystem, X: MajorantFn, n: int, grid=None, face_samples: int = 128,
                       rng_seed: int = 0, T: float = 1.0, jobs: int | None = None) -> Certificate:
    """Top face ``f_k <= X_k'`` at ``x_k = X_k`` and zero face ``f_k >= 0`` at
    ``x_k = 0``, with the other coordinates in ``[0, X]``."""
    cert = _face_certificate(UPPER_NONNEG, _NONNEG_FACES, f, X, n, _grid(grid, T),
                             face_samples, rng_seed, jobs)
    cert.extra["top_face_margin"] = cert.extra["face_margins"]["top"]
    cert.extra["zero_face_margin"] = cert.extra["face_margins"]["zero"]
    return cert


def check_lower(f: RhsSystem, X: MajorantFn, n: int, grid=None, face_samples: int = 128,
                rng_seed: int = 0, T: float = 1.0, jobs: int | None = None) -> Certificate:
    """Reversed face inequality ``+-f_k(t, x with x_k = +-X_k(t)) >= X_k'(t)``."""
    return _face_certificate(LOWER, _LOWER_FACES, f, X, n, _grid(grid, T),
                             face_samples, rng_seed, jobs)


def check_periodic_closure(X: MajorantFn, omega: float, n: int) -> Certificate:
    """``X_k(omega) <= X_k(0)`` for ``k <= n``."""
    if not omega > 0:
        raise ValueError("period must be positive")
    X0, Xw = X.values(0.0, n), X.values(omega, n)
    m = X0 - Xw
    i = int(np.argmin(m))
    tol = REL_TOL * (1.0 + np.abs(X0))
    verdict = CERTIFIED if np.all(m >= -tol) else FALSIFIED
    worst = {"t": float(omega), "k": i + 1, "sign": "closure", "x": Xw.tolist()}
    return Certificate(PERIODIC_CLOSURE, verdict, float(m[i]), worst, n, None, n,
                       [TRUNCATION_NOTE], {"omega": float(omega)})


def check_initial_inclusion(x0, X: MajorantFn, mode: str = SYMMETRIC) -> Certificate:
    """``|x0_k| <= X_k(0)`` (symmetric) or ``0 <= x0_k <= X_k(0)`` (nonneg)."""
    c = x0.coords if isinstance(x0, TruncatedState) else np.asarray(x0, dtype=float).reshape(-1)
    n = c.size
    if X.size is not None and n > X.size:
        raise DimensionMismatch(f"initial state has {n} coordinates, majorant {X.size}")
    box = Box.from_majorant(X, 0.0, n, mode)
    m = box.margins(c)
    i = int(np.argmin(m))
    tol = REL_TOL * (1.0 + box.upper)
    verdict = CERTIFIED if np.all(m >= -tol) else FALSIFIED
    worst = {"t": 0.0, "k": i + 1, "sign": mode, "x": c.tolist()}
    return Certificate(INITIAL_INCLUSION, verdict, float(m[i]), worst, n, None, n, [],
                       {"mode": mode})
