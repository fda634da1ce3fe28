"""Concrete right-hand sides: PDE coefficient systems, Smoluchowski
coagulation, time-varying stability systems and a two-dimensional example."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import BlowUpBeforeT, DimensionMismatch
from .expr import Expr
from .majorant import (BernoulliMajorant, SmoluchowskiBounds, bernoulli_majorant,
                       cumulative_integral, q_factor)
from .solver import MASS_CONSERVING, PAPER_FAITHFUL, smoluchowski_truncation_mode
from .system import RhsSystem

U_GAUGE = "u"
V_GAUGE = "v"


# ---------------------------------------------------------------------------
# PDE coefficient systems
# ---------------------------------------------------------------------------

def _scalar_fn(v) -> Callable[[float], float]:
    if v is None:
        return lambda t: 0.0
    if callable(v):
        return v
    c = float(v)
    return lambda t: c


@dataclass
class PdeModelSpec:
    """Coefficient system of a first-order PDE in Taylor coordinates.

    Position ``k`` holds the coefficient of ``z^(k-1)`` (``j = k - 1``).
    ``gauge='u'`` integrates ``u_j' = -u_j + q_jmN a(t) u_{j-m+N} + f_j(t)``;
    ``gauge='v'`` integrates ``v = exp(int_0^t b + t) u`` directly.
    """

    m: int
    N: int
    a: Callable | float = 1.0
    b: Callable | float | None = None
    forcing: Sequence[Callable] = ()
    gauge: str = U_GAUGE
    period: float | None = None
    b_integral: Callable | None = None

    def __post_init__(self):
        if not self.N > self.m >= 0:
            raise ValueError(f"need N > m >= 0, got m={self.m}, N={self.N}")
        if self.gauge not in (U_GAUGE, V_GAUGE):
            raise ValueError("gauge must be 'u' or 'v'")


class PdeCoeffSystem(RhsSystem):
    affine = True

    def __init__(self, spec: PdeModelSpec):
        self.spec = spec
        self.m, self.N, self.gauge = spec.m, spec.N, spec.gauge
        self.a = _scalar_fn(spec.a)
        self.b = _scalar_fn(spec.b)
        self.forcing = tuple(_scalar_fn(g) for g in spec.forcing)
        self.period = spec.period
        self.name = f"pde(m={spec.m},N={spec.N},{spec.gauge})"
        self._b_integral = spec.b_integral
        self._tables = {}

    @property
    def tail_note(self) -> str:
        return (f"checked for k <= n only; rows with j > n-1-{self.N - self.m} read coordinates "
                "above the truncation, which are set to 0")

    def coupling_reach(self, k):
        j = k - 1
        return k - self.m + self.N if j >= self.m else k

    def _table(self, n):
        tab = self._tables.get(n)
        if tab is None:
            j = np.arange(n)
            q = np.zeros(n)
            for jj in range(self.m, n):
                try:
                    q[jj] = q_factor(jj, self.m, self.N)
                except OverflowError:
                    q[jj] = math.inf
            tgt = j - self.m + self.N
            valid = (j >= self.m) & (tgt < n)
            tab = (q, tgt, valid)
            self._tables[n] = tab
        return tab

    def b_int(self, t: float) -> float:
        """``int_0^t b``."""
        if self._b_integral is not None:
            return float(self._b_integral(t))
        if self.spec.b is None:
            return 0.0
        return float(quad(self.b, 0.0, t, epsabs=1e-14, epsrel=1e-13, limit=200)[0])

    def gauge_factor(self, t: float) -> float:
        """``exp(int_0^t b + t)``, the factor in ``v = factor * u``."""
        return math.exp(self.b_int(t) + t)

    def _diag(self, t):
        return -1.0 if self.gauge == U_GAUGE else float(self.b(t))

    def _force(self, t, n):
        g = np.zeros(n)
        for j, fn in enumerate(self.forcing[:n]):
            g[j] = fn(t)
        if self.gauge == V_GAUGE and np.any(g):
            g *= self.gauge_factor(t)
        return g

    def rhs(self, t, y):
        y = np.asarray(y, dtype=float)
        n = y.size
        ts = self.phase(t)
        q, tgt, valid = self._table(n)
        out = self._diag(ts) * y
        out[valid] += q[valid] * self.a(ts) * y[tgt[valid]]
        if self.forcing:
            out += self._force(ts, n)
        return out

    def component(self, k, t, Y):
        Y = np.atleast_2d(Y)
        row, off = self.linear_row(k, t, Y.shape[1])
        return Y @ row + off

    def linear_row(self, k, t, n):
        ts = self.phase(t)
        q, tgt, valid = self._table(n)
        row = np.zeros(n)
        row[k - 1] = self._diag(ts)
        if valid[k - 1]:
            row[tgt[k - 1]] += q[k - 1] * self.a(ts)
        off = self._force(ts, n)[k - 1] if self.forcing else 0.0
        return row, off

    def u_to_v(self, t, u):
        return self.gauge_factor(t) * np.asarray(u, dtype=float)


def pde_rhs(spec: PdeModelSpec) -> PdeCoeffSystem:
    return PdeCoeffSystem(spec)


# ---------------------------------------------------------------------------
# Smoluchowski coagulation
# ---------------------------------------------------------------------------

def constant_coefficients(C, B):
    """Time-independent ``c_k = C[k-1]`` and ``b_ij = B[i-1, j-1]`` (zero outside)."""
    Cv = np.asarray(C, dtype=float).reshape(-1)
    Bm = np.asarray(B, dtype=float)

    def c(t, k):
        out = np.zeros(k.shape)
        ok = k <= Cv.size
        out[ok] = Cv[k[ok] - 1]
        return out

    def b(t, i, j):
        out = np.zeros(np.broadcast(i, j).shape)
        ii, jj = np.broadcast_arrays(i, j)
        ok = (ii <= Bm.shape[0]) & (jj <= Bm.shape[1])
        out[ok] = Bm[ii[ok] - 1, jj[ok] - 1]
        return out

    return c, b


def expression_coefficients(c_source, b_source):
    """``c_k(t)`` in variables ``t, k`` and ``b_ij(t)`` in ``t, i, j``."""
    ce = Expr(str(c_source), ("t", "k"))
    be = Expr(str(b_source), ("t", "i", "j"))

    def c(t, k):
        return np.broadcast_to(np.asarray(ce(t=t, k=k.astype(float)), dtype=float), k.shape).copy()

    def b(t, i, j):
        shape = np.broadcast(i, j).shape
        v = be(t=t, i=np.asarray(i, dtype=float), j=np.asarray(j, dtype=float))
        return np.broadcast_to(np.asarray(v, dtype=float), shape).copy()

    return c, b, not (ce.names | be.names) & {"t"}


class SmoluchowskiSystem(RhsSystem):
    """``x_k' = c_k + 1/2 sum_{i+j=k} b_ij x_i x_j - x_k sum_j b_kj x_j``.

    ``c(t, k)`` and ``b(t, i, j)`` take integer arrays of 1-based indices.
    Kernel entries with ``|i - j| > band`` are dropped when a band is set.
    """

    nonneg = True

    def __init__(self, c: Callable, b: Callable, bounds: SmoluchowskiBounds | None = None,
                 truncation: str = PAPER_FAITHFUL, band: int | None = None,
                 period: float | None = None, autonomous: bool = False, name="smoluchowski"):
        self.c, self.b = c, b
        self.bounds = bounds
        self.truncation = truncation
        self._limit = smoluchowski_truncation_mode(truncation)
        self.band = band
        self.period = period
        self.autonomous = autonomous
        self.name = name
        self._index = {}
        self._cache = None

    def coupling_reach(self, k):
        return None if self.band is None else k + self.band

    def _indices(self, n):
        idx = self._index.get(n)
        if idx is None:
            k = np.arange(1, n + 1)
            I, J = np.meshgrid(k, k, indexing="ij")
            S = (I + J - 2).ravel()
            lim = np.array([self._limit(kk, n) for kk in k])
            mask = J <= lim[:, None]
            bandmask = None if self.band is None else np.abs(I - J) <= self.band
            idx = (k, I, J, S, mask, bandmask)
            self._index[n] = idx
        return idx

    def coefficients(self, t, n):
        """``(c, B)`` at time ``t`` for indices ``1..n``."""
        ts = self.phase(t)
        key = (None if self.autonomous else ts, n)
        cache = self._cache
        if cache is not None and cache[0] == key:
            return cache[1], cache[2]
        k, I, J, _, _, bandmask = self._indices(n)
        cv = np.asarray(self.c(ts, k), dtype=float)
        B = np.asarray(self.b(ts, I, J), dtype=float)
        if bandmask is not None:
            B = np.where(bandmask, B, 0.0)
        self._cache = (key, cv, B)
        return cv, B

    def rhs(self, t, y):
        y = np.asarray(y, dtype=float)
        n = y.size
        cv, B = self.coefficients(t, n)
        _, _, _, S, mask, _ = self._indices(n)
        M = B * np.outer(y, y)
        conv = np.bincount(S, weights=M.ravel(), minlength=2 * n - 1)
        gain = np.zeros(n)
        gain[1:] = 0.5 * conv[: n - 1]
        if self.truncation == PAPER_FAITHFUL:
            loss = y * (B @ y)
        else:
            loss = y * ((B * mask) @ y)
        return cv + gain - loss

    def component(self, k, t, Y):
        Y = np.atleast_2d(Y)
        n = Y.shape[1]
        cv, B = self.coefficients(t, n)
        i = np.arange(1, k)
        gain = 0.5 * (Y[:, i - 1] * Y[:, k - i - 1]) @ B[i - 1, k - i - 1] if i.size else 0.0
        lim = self._limit(k, n)
        loss = Y[:, k - 1] * (Y[:, :lim] @ B[k - 1, :lim])
        return cv[k - 1] + gain - loss

    @staticmethod
    def first_moment(y) -> float:
        y = np.asarray(y, dtype=float)
        return float(np.arange(1, y.size + 1) @ y)

    def audit(self, grid, n: int) -> dict:
        """Sampled check of symmetry, signs and the declared bounds on ``grid``."""
        res = {"symmetric": True, "nonneg": True, "ok": True}
        lo_beta = hi_B = hi_C = math.inf
        for t in np.atleast_1d(grid):
            cv, B = self.coefficients(float(t), n)
            if not np.array_equal(B, B.T):
                res["symmetric"] = False
            if np.any(cv < 0) or np.any(B < 0):
                res["nonneg"] = False
            if self.bounds is not None:
                m = min(n, self.bounds.K)
                lo_beta = min(lo_beta, float(np.min(np.diag(B)[:m] - self.bounds.beta[:m])))
                hi_B = min(hi_B, float(np.min(self.bounds.B[:m, :m] - B[:m, :m])))
                hi_C = min(hi_C, float(np.min(self.bounds.C[:m] - cv[:m])))
        if self.bounds is not None:
            res.update(beta_margin=lo_beta, kernel_margin=hi_B, source_margin=hi_C)
            b0 = self.bounds
            res["ok"] = (lo_beta >= -1e-12 * (1.0 + float(np.max(b0.beta)))
                         and hi_B >= -1e-12 * (1.0 + float(np.max(b0.B)))
                         and hi_C >= -1e-12 * (1.0 + float(np.max(b0.C))))
            res["row_sum_tail"] = ("band" if self.bounds.band is not None else "declared decay")
        res["ok"] = res["ok"] and res["symmetric"] and res["nonneg"]
        return res


def smoluchowski_rhs(c, b, bounds: SmoluchowskiBounds | None = None,
                     truncation: str = PAPER_FAITHFUL, band: int | None = None,
                     period: float | None = None, autonomous: bool = False) -> SmoluchowskiSystem:
    """Build the coagulation evaluator; ``c`` and ``b`` are index callables
    (see :func:`constant_coefficients` and :func:`expression_coefficients`)."""
    return SmoluchowskiSystem(c, b, bounds, truncation, band, period, autonomous)


def constant_kernel_solution(t: float, k) -> np.ndarray:
    """Monodisperse solution for ``b = 1``, ``c = 0``, ``x(0) = e_1``."""
    k = np.asarray(k, dtype=float)
    return (t / 2) ** (k - 1) / (1 + t / 2) ** (k + 1)


# ---------------------------------------------------------------------------
# Stability systems
# ---------------------------------------------------------------------------

STABLE = "stable"
UNSTABLE = "unstable"
UNSTABLE_INTEGRAL = "unstable-integral"
INCONCLUSIVE = "inconclusive"


def _matrix_at(A: Callable, t) -> np.ndarray:
    """``A`` at a scalar or array of times; arrays give shape ``t.shape + (m, m)``."""
    if np.ndim(t) == 0:
        M = np.atleast_2d(np.asarray(A(float(t)), dtype=float))
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch("A(t) must be square")
        return M
    t = np.asarray(t, dtype=float)
    mats = [_matrix_at(A, s) for s in t.ravel()]
    return np.array(mats).reshape(t.shape + mats[0].shape)


def _row_bounds(M):
    d = np.diagonal(M, axis1=-2, axis2=-1)
    off = np.sum(np.abs(M), axis=-1) - np.abs(d)
    return d + off, d - off


def stability_functions(A: Callable, grid=None):
    """``p(t) = max_n (a_nn + sum_{j != n} |a_nj|)`` and
    ``q(t) = min_n (a_nn - sum_{j != n} |a_nj|)``, evaluated exactly at each
    query time (scalar or array).  A ``grid`` only validates squareness."""
    if grid is not None:
        for t in np.atleast_1d(grid):
            _matrix_at(A, float(t))

    def p(t):
        v = np.max(_row_bounds(_matrix_at(A, t))[0], axis=-1)
        return float(v) if np.ndim(t) == 0 else v

    def q(t):
        v = np.min(_row_bounds(_matrix_at(A, t))[1], axis=-1)
        return float(v) if np.ndim(t) == 0 else v

    return p, q


class StabilitySystem(RhsSystem):
    """``x' = A(t) x + psi(t, x)`` with ``|psi_k| <= c |x|_inf^lam`` on ``|x|_inf <= r``."""

    def __init__(self, A: Callable, psi: Callable | None = None, c: float = 0.0, lam: float = 2.0,
                 r: float = 1.0, period: float | None = None, name: str = "stability"):
        if c < 0 or lam <= 1 or r <= 0:
            raise ValueError("need c >= 0, lam > 1, r > 0")
        self.A, self.psi = A, psi
        self.c, self.lam, self.r = float(c), float(lam), float(r)
        self.period = period
        self.name = name
        self.dim = _matrix_at(A, 0.0).shape[0]

    def rhs(self, t, y):
        y = np.asarray(y, dtype=float)
        if y.size != self.dim:
            raise DimensionMismatch(f"system has dimension {self.dim}, state {y.size}")
        ts = self.phase(t)
        out = _matrix_at(self.A, ts) @ y
        if self.psi is not None:
            out = out + np.asarray(self.psi(ts, y), dtype=float)
        return out

    def audit_perturbation(self, samples: int = 256, seed: int = 0, T: float = 1.0) -> dict:
        """Check ``|psi_k(t, x)| <= c |x|_inf^lam (1 + 1e-9)`` at random points."""
        if self.psi is None:
            return {"ok": True, "worst_ratio": 0.0, "samples": 0}
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            t = rng.uniform(0.0, T)
            x = rng.uniform(-self.r, self.r, self.dim)
            nx = float(np.max(np.abs(x)))
            lhs = float(np.max(np.abs(self.psi(t, x))))
            bound = self.c * nx ** self.lam
            ratio = lhs / bound if bound > 0 else (math.inf if lhs > 0 else 0.0)
            worst = max(worst, ratio)
        return {"ok": worst <= 1.0 + 1e-9, "worst_ratio": worst, "samples": samples}


@dataclass
class StabilityReport:
    verdict: str
    sup_int_p: float
    sup_j: float
    min_q: float
    envelope: BernoulliMajorant | None
    horizon: float
    asymptotic: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"verdict": self.verdict, "sup_int_p": self.sup_int_p, "sup_j": self.sup_j,
                "min_q": self.min_q, "horizon": self.horizon, "asymptotic": self.asymptotic,
                "envelope_kind": None if self.envelope is None else self.envelope.kind,
                "blowup_time": None if self.envelope is None else self.envelope.blowup_time,
                "notes": list(self.notes)}


def _settles(values, tail, rtol=1e-12):
    """Non-increasing over the ``tail`` nodes, up to rounding."""
    v = values[tail]
    return bool(np.all(np.diff(v) <= rtol * (1.0 + np.abs(v[1:]))))


def classify_stability(sys: StabilitySystem, horizon: float = 10.0, quad_tol: float = 1e-10,
                       x_hat: float = 1.0, asymptotic: bool = False,
                       grid_points: int = 401) -> StabilityReport:
    """Numerical reading of the stability and instability criteria on ``[0, horizon]``.

    ``stable`` needs ``int_0^t p`` and (when ``c > 0``) ``int_0^t exp((lam-1) int p)``
    to settle over the last tenth of the horizon, a positive envelope
    denominator, and ``asymptotic=True`` (the caller vouches for the tail).
    ``unstable`` needs ``min q > 0`` on the grid.  ``unstable-integral``
    needs ``int q`` still growing at the horizon, the ``q``-integral of the
    power term settled, and ``asymptotic=True``.
    """
    p, q = stability_functions(sys.A)
    nodes = np.linspace(0.0, horizon, grid_points)
    tail = nodes >= 0.9 * horizon
    lam, c = sys.lam, sys.c
    notes = []
    pv, qv = p(nodes), q(nodes)
    P = cumulative_integral(p, nodes, quad_tol)
    Q = cumulative_integral(q, nodes, quad_tol)
    p_ok = bool(np.all(pv[tail] <= 0.0)) and _settles(P, tail)
    sup_j = 0.0
    j_ok = True
    if c > 0:
        g = np.exp((lam - 1.0) * P)
        J = cumulative_integral(lambda s: np.exp((lam - 1.0) * np.interp(s, nodes, P)), nodes,
                                quad_tol)
        sup_j = float(J[-1])
        j_ok = _settles(g, tail)
        if j_ok and not 1.0 - c * (lam - 1.0) * x_hat ** (lam - 1.0) * sup_j > 0.0:
            j_ok = False
            notes.append(f"x_hat={x_hat} too large: envelope denominator vanishes")
    min_q = float(np.min(qv))
    q_power_ok = c == 0 or _settles(np.exp((lam - 1.0) * Q), tail)
    q_grows = bool(np.all(np.diff(Q[tail]) > 0.0))

    if min_q > 0.0:
        verdict = UNSTABLE
        notes.append(f"q >= {min_q:.6g} > 0 on the grid")
    elif p_ok and j_ok:
        verdict = STABLE if asymptotic else INCONCLUSIVE
        if not asymptotic:
            notes.append("integrals settle on the horizon; pass asymptotic=True to conclude")
    elif q_grows and q_power_ok:
        verdict = UNSTABLE_INTEGRAL if asymptotic else INCONCLUSIVE
        if not asymptotic:
            notes.append("int q grows on the horizon; pass asymptotic=True to conclude")
    else:
        verdict = INCONCLUSIVE
    env = None
    try:
        if verdict in (UNSTABLE, UNSTABLE_INTEGRAL):
            env = bernoulli_majorant(q, c, lam, x_hat, "decay", horizon, quad_tol)
        else:
            env = bernoulli_majorant(p, c, lam, x_hat, "growth", horizon, quad_tol)
    except BlowUpBeforeT as exc:
        notes.append(str(exc))
    return StabilityReport(verdict, float(np.max(P)), sup_j, min_q, env, float(horizon),
                           asymptotic, notes)


# ---------------------------------------------------------------------------
# Two-dimensional example
# ---------------------------------------------------------------------------

def _x1_bound(t):
    return (math.exp(2 * t) + 1) / 2


class Example512System(RhsSystem):
    """``x1' = (X1(t) - x1)^3 (1 + x2^6) + x2^2``,
    ``x2' = x1^4 (x2 - e^t)(x2 + e^t) + cos(x1) x2`` with ``X1 = (e^{2t}+1)/2``.

    The factored form of ``x2^2 - e^{2t}`` vanishes exactly on the faces.
    """

    name = "example512"

    def rhs(self, t, y):
        return self.component_all(t, np.atleast_2d(np.asarray(y, dtype=float)))[0]

    def component_all(self, t, Y):
        e = math.exp(t)
        x1, x2 = Y[:, 0], Y[:, 1] if Y.shape[1] > 1 else np.zeros(Y.shape[0])
        f1 = (_x1_bound(t) - x1) ** 3 * (1 + x2 ** 6) + x2 ** 2
        f2 = x1 ** 4 * ((x2 - e) * (x2 + e)) + np.cos(x1) * x2
        return np.stack([f1, f2], axis=1)[:, : Y.shape[1]]

    def component(self, k, t, Y):
        return self.component_all(t, np.atleast_2d(Y))[:, k - 1]

    def coupling_reach(self, k):
        return 2


def example512_rhs() -> Example512System:
    return Example512System()


__all__ = [
    "PdeModelSpec", "PdeCoeffSystem", "pde_rhs", "U_GAUGE", "V_GAUGE",
    "SmoluchowskiSystem", "smoluchowski_rhs", "constant_coefficients", "expression_coefficients",
    "constant_kernel_solution", "PAPER_FAITHFUL", "MASS_CONSERVING",
    "StabilitySystem", "StabilityReport", "stability_functions", "classify_stability",
    "STABLE", "UNSTABLE", "UNSTABLE_INTEGRAL", "INCONCLUSIVE",
    "Example512System", "example512_rhs",
]
