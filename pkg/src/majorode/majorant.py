"""Majorant functions X(t) = (X_1(t), X_2(t), ...) and their constructors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .errors import BlowUpBeforeT, DimensionMismatch, DivergentTail
from .seqspace import TailRule, WeightProfile


class MajorantFn:
    """Base class: a positive, time-dependent sequence with derivative access.

    ``size`` is the number of coordinates the majorant defines (None when
    every position is defined).  Positions are 1-based.
    """

    kind = "abstract"
    size: int | None = None

    def values(self, t: float, n: int) -> np.ndarray:
        raise NotImplementedError

    def derivs(self, t: float, n: int) -> np.ndarray:
        raise NotImplementedError

    def value(self, k: int, t: float) -> float:
        return float(self.values(t, k)[k - 1])

    def deriv(self, k: int, t: float) -> float:
        return float(self.derivs(t, k)[k - 1])

    def _check(self, n):
        if n < 1 or (self.size is not None and n > self.size):
            raise DimensionMismatch(f"{self.kind} majorant defines {self.size} coordinates, "
                                    f"{n} requested")


class SequenceMajorant(MajorantFn):
    """``X_k(t) = s(t) * U_k``; constant when no scale is given."""

    def __init__(self, coeffs, scale: Callable | None = None, scale_deriv: Callable | None = None,
                 warnings: Sequence[str] = (), info: dict | None = None):
        self.coeffs = np.array(coeffs, dtype=float)
        self.coeffs.setflags(write=False)
        if (scale is None) != (scale_deriv is None):
            raise ValueError("scale and scale_deriv go together")
        self.scale = scale
        self.scale_deriv = scale_deriv
        self.kind = "constant-seq" if scale is None else "exp-scaled-seq"
        self.size = self.coeffs.size
        self.warnings = list(warnings)
        self.info = dict(info or {})

    @classmethod
    def exp_scaled(cls, coeffs, exponent: Callable, exponent_deriv: Callable, **kw):
        """``X_k(t) = exp(g(t)) U_k`` with ``g`` and ``g'`` supplied."""
        return cls(coeffs, lambda t: math.exp(exponent(t)),
                   lambda t: exponent_deriv(t) * math.exp(exponent(t)), **kw)

    def values(self, t, n):
        self._check(n)
        u = self.coeffs[:n]
        return u.copy() if self.scale is None else self.scale(t) * u

    def derivs(self, t, n):
        self._check(n)
        if self.scale is None:
            return np.zeros(n)
        return self.scale_deriv(t) * self.coeffs[:n]


class ClosedFormMajorant(MajorantFn):
    """One closed-form function (and its exact derivative) per coordinate."""

    kind = "custom-closed-form"

    def __init__(self, funcs: Sequence[Callable], derivs: Sequence[Callable]):
        if len(funcs) != len(derivs):
            raise ValueError("need one derivative per function")
        self.funcs = tuple(funcs)
        self.dfuncs = tuple(derivs)
        self.size = len(funcs)

    def values(self, t, n):
        self._check(n)
        return np.array([f(t) for f in self.funcs[:n]], dtype=float)

    def derivs(self, t, n):
        self._check(n)
        return np.array([f(t) for f in self.dfuncs[:n]], dtype=float)


class TabulatedMajorant(MajorantFn):
    """Samples ``X_k(t_i)`` on a time grid, cubic-spline interpolated."""

    kind = "tabulated"

    def __init__(self, times, table):
        times = np.asarray(times, dtype=float)
        table = np.atleast_2d(np.asarray(table, dtype=float))
        if table.shape[0] != times.size:
            raise DimensionMismatch("table needs one row per time node")
        self.times = times
        self._spline = CubicSpline(times, table, axis=0)
        self._dspline = self._spline.derivative()
        self.size = table.shape[1]

    def values(self, t, n):
        self._check(n)
        return np.asarray(self._spline(t))[:n]

    def derivs(self, t, n):
        self._check(n)
        return np.asarray(self._dspline(t))[:n]


def q_factor_exact(j: int, m: int, N: int) -> int:
    """(j-m+N)!/(j-m)! as an exact integer product of N consecutive integers."""
    if not N > m >= 0:
        raise ValueError(f"need N > m >= 0, got m={m}, N={N}")
    if j < m:
        raise ValueError(f"q_factor needs j >= m, got j={j}, m={m}")
    return math.prod(range(j - m + 1, j - m + N + 1))


def q_factor(j: int, m: int, N: int) -> float:
    """Raises OverflowError when the product leaves the float range."""
    return float(q_factor_exact(j, m, N))


@dataclass(frozen=True)
class PdeMajorantSpec:
    """Inputs of the coefficient recurrence ``U_{j-m+N} = U_j / (a* q_jmN + F_j)``.

    ``forcing_margin`` is ``F_j``: a sequence (indexed by j, zero beyond its
    end) or a callable ``j -> F_j``.
    """

    m: int
    N: int
    a_star: float
    seeds: tuple = (1.0,)
    forcing_margin: Sequence[float] | Callable[[int], float] = ()

    def __post_init__(self):
        if not self.N > self.m >= 0:
            raise ValueError(f"need N > m >= 0, got m={self.m}, N={self.N}")
        if not self.a_star > 0:
            raise ValueError("a* must be positive")
        if any(s <= 0 for s in self.seeds):
            raise ValueError("seeds U_0..U_{N-1} must be positive")

    def F(self, j: int) -> float:
        fm = self.forcing_margin
        if callable(fm):
            v = float(fm(j))
        else:
            v = float(fm[j]) if j < len(fm) else 0.0
        if v < 0:
            raise ValueError(f"F_{j} = {v} is negative")
        return v

    def denominator(self, j: int) -> float:
        return self.a_star * q_factor(j, self.m, self.N) + self.F(j)


def build_pde_majorant(spec: PdeMajorantSpec, cap: int) -> SequenceMajorant:
    """Coefficients ``U_0..U_cap`` (position ``k`` holds ``U_{k-1}``).

    Index ``i >= N`` is reached from ``j = i - N + m >= m``, so every index
    above the seeds is generated.  Seeds missing from ``spec.seeds`` are set
    to 1.0 with a warning.
    """
    if cap < spec.N:
        raise ValueError(f"cap {cap} must be at least N = {spec.N}")
    U = np.zeros(cap + 1)
    warnings = []
    for i in range(spec.N):
        if i < len(spec.seeds):
            U[i] = spec.seeds[i]
        else:
            U[i] = 1.0
            warnings.append(f"U_{i} not seeded; set to 1.0")
    step = spec.N - spec.m
    for i in range(spec.N, cap + 1):
        j = i - step
        try:
            U[i] = U[j] / spec.denominator(j)
        except OverflowError:
            U[i] = 0.0
        if U[i] == 0.0:
            warnings.append(f"U_{i} underflowed to 0 (positivity lost from here on)")
            U[i + 1:] = 0.0
            break
    info = {}
    pos = U[U > 0]
    if pos.size > step:
        # root-test style decay estimate over the generated range
        info["decay_ratio"] = float(pos[-1] / pos[-1 - step])
        info["root_estimate"] = float(pos[-1] ** (1.0 / (pos.size - 1)))
    return SequenceMajorant(U, warnings=warnings, info=info)


def pde_weight_profile(X: SequenceMajorant, radius: float) -> WeightProfile:
    """Weights ``radius**j`` on Taylor coefficients with a ratio tail rule
    derived from the last generated coefficients."""
    U = X.coeffs
    K = U.size
    w = radius ** np.arange(K)
    terms = w * U
    r = float(terms[-1] / terms[-2]) if K >= 2 and terms[-2] > 0 else 1.0
    if not r < 1.0:
        raise DivergentTail(f"weighted coefficients do not decay at the cap (ratio {r})")
    return WeightProfile.geometric(radius, tail=TailRule("ratio", rate=r), cap=K)


@dataclass
class SmoluchowskiBounds:
    """Constant bounds for the coagulation system and the derived sequences."""

    C: np.ndarray
    beta: np.ndarray
    B: np.ndarray          # kernel bound on indices 1..K_ext
    X: np.ndarray
    b: np.ndarray
    A: np.ndarray
    F: np.ndarray
    band: int | None = None
    notes: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.X.size

    def majorant(self) -> SequenceMajorant:
        return SequenceMajorant(self.X)

    def weight_profile(self) -> WeightProfile:
        return WeightProfile.smoluchowski(self.F)


def _seq(v, n, name):
    if callable(v):
        return np.array([float(v(k)) for k in range(1, n + 1)])
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size < n:
        raise DimensionMismatch(f"{name} has {arr.size} entries, {n} needed")
    return arr[:n].copy()


def _kernel_matrix(kernel, n, band):
    if callable(kernel):
        B = np.array([[float(kernel(i, j)) for j in range(1, n + 1)] for i in range(1, n + 1)])
    else:
        K0 = np.asarray(kernel, dtype=float)
        B = np.zeros((n, n))
        m = min(n, K0.shape[0])
        B[:m, :m] = K0[:m, :m]
    if band is not None:
        i = np.arange(n)
        B[np.abs(i[:, None] - i[None, :]) > band] = 0.0
    return B


def gain_sum(B: np.ndarray, X: np.ndarray, k: int) -> float:
    """``1/2 sum_{i+j=k, i,j>=1} B_ij X_i X_j`` (1-based k)."""
    i = np.arange(1, k)
    if i.size == 0:
        return 0.0
    return 0.5 * float(np.sum(B[i - 1, k - i - 1] * X[i - 1] * X[k - i - 1]))


def build_smoluchowski_bounds(C, B, beta, K: int, band: int | None = None,
                              tail_decay: tuple[float, float] | None = None) -> SmoluchowskiBounds:
    """Majorant sequence ``X_k`` and the norm sequences ``b_k, A_k, F_k``.

    ``B`` is a callable ``(i, j) -> B_ij`` or a matrix.  The row sums
    ``b_k = sum_j B_kj X_j`` need a declared tail: either ``band`` (B_ij = 0
    for |i-j| > band, summed exactly) or ``tail_decay = (c, r)`` meaning
    ``sum_{j>K} B_kj X_j <= c r^(K+1)/(1-r)``.
    """
    if band is None and tail_decay is None:
        raise DivergentTail("declare a kernel band or a tail decay to bound b_k")
    K_ext = K + (band or 0)
    Cs = _seq(C, K_ext, "C")
    betas = _seq(beta, K_ext, "beta")
    if np.any(betas <= 0):
        raise ValueError("beta_k must be positive")
    if np.any(Cs < 0):
        raise ValueError("C_k must be non-negative")
    Bm = _kernel_matrix(B, K_ext, band)
    if np.any(Bm < 0) or not np.allclose(Bm, Bm.T, rtol=0, atol=0):
        raise ValueError("kernel bound must be symmetric and non-negative")
    X = np.zeros(K_ext)
    for k in range(1, K_ext + 1):
        X[k - 1] = math.sqrt((Cs[k - 1] + gain_sum(Bm, X, k)) / betas[k - 1])
    notes = []
    rows = Bm[:K] @ X
    if band is None:
        c, r = tail_decay
        if not 0 < r < 1:
            raise DivergentTail(f"tail decay ratio {r} not in (0, 1)")
        rows = rows + c * r ** (K + 1) / (1 - r)
        notes.append(f"b_k includes declared geometric tail c={c}, r={r}")
    Xk = X[:K]
    gains = np.array([gain_sum(Bm, X, k) for k in range(1, K + 1)])
    A = Cs[:K] + gains + Xk * rows
    F = np.maximum(1.0, np.maximum(A, Xk))
    if np.any(Xk == 0):
        notes.append("some X_k vanish; certification will reject them")
    return SmoluchowskiBounds(Cs[:K], betas[:K], Bm, Xk.copy(), rows, A, F, band, notes)


class BernoulliMajorant(MajorantFn):
    """Scalar envelope solving ``X' = p X + c X^lam`` (growth) or
    ``X' = q X - c X^lam`` (decay), broadcast to every coordinate."""

    kind = "bernoulli-scalar-broadcast"
    size = None

    def __init__(self, p, c, lam, x_hat, sign, horizon, P, J, blowup_time):
        self.p = p
        self.c = float(c)
        self.lam = float(lam)
        self.x_hat = float(x_hat)
        self.sign = sign
        self.horizon = float(horizon)
        self._P = P
        self._J = J
        self.blowup_time = blowup_time

    def integral_p(self, t):
        return float(self._P(t))

    def integral_j(self, t):
        return 0.0 if self._J is None else float(self._J(t))

    def denominator(self, t):
        if self.c == 0.0:
            return 1.0
        s = -1.0 if self.sign == "growth" else 1.0
        return 1.0 + s * self.c * (self.lam - 1.0) * self.x_hat ** (self.lam - 1.0) * self.integral_j(t)

    def scalar(self, t: float) -> float:
        if not -1e-12 <= t <= self.horizon * (1 + 1e-12) + 1e-12:
            raise ValueError(f"t={t} outside the envelope domain [0, {self.horizon}]")
        base = math.exp(self.integral_p(t)) * self.x_hat
        if self.c == 0.0:
            return base
        return base / self.denominator(t) ** (1.0 / (self.lam - 1.0))

    def scalar_deriv(self, t: float) -> float:
        X = self.scalar(t)
        s = 1.0 if self.sign == "growth" else -1.0
        return float(self.p(t)) * X + s * self.c * X**self.lam

    def values(self, t, n):
        self._check(n)
        return np.full(n, self.scalar(t))

    def derivs(self, t, n):
        self._check(n)
        return np.full(n, self.scalar_deriv(t))


def _vectorized(fn):
    probe = np.array([0.0, 0.5])
    try:
        out = np.asarray(fn(probe), dtype=float)
        if out.shape == probe.shape:
            return fn
    except Exception:
        pass
    return np.vectorize(lambda s: float(fn(float(s))), otypes=[float])


def cumulative_integral(fn, nodes, tol):
    """``int_0^{t_i} fn`` at every node, via ``t_i * int_0^1 fn(t_i u) du``."""
    nodes = np.asarray(nodes, dtype=float)
    vfn = _vectorized(fn)
    res, err = quad_vec(lambda u: nodes * vfn(nodes * u), 0.0, 1.0,
                        epsabs=tol, epsrel=1e-13, norm="max", limit=2000)
    return np.asarray(res)


def bernoulli_majorant(p: Callable, c: float, lam: float, x_hat: float, sign: str = "growth",
                       horizon: float = 1.0, quad_tol: float = 1e-10, node_spacing: float = 0.01,
                       blowup_search: float = 4.0) -> BernoulliMajorant:
    """Closed-form Bernoulli envelope on ``[0, horizon]``.

    Integrals of ``p`` and of ``exp((lam-1) int p)`` are computed at nodes
    spaced ``node_spacing`` apart and interpolated by cubic Hermite splines
    using the exact integrand as the node derivative.  For the growth sign
    the blow-up time (where the denominator vanishes) is searched up to
    ``blowup_search * horizon``; ``BlowUpBeforeT`` is raised if it falls
    inside the horizon.
    """
    if sign not in ("growth", "decay"):
        raise ValueError("sign must be 'growth' or 'decay'")
    if x_hat <= 0:
        raise ValueError("x_hat must be positive")
    if c < 0:
        raise ValueError("c must be non-negative")
    if c > 0 and lam <= 1:
        raise ValueError("lam must exceed 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    search = sign == "growth" and c > 0
    H = horizon * (blowup_search if search else 1.0)
    M = max(64, int(math.ceil(H / node_spacing)))
    nodes = np.linspace(0.0, H, M + 1)
    vp = _vectorized(p)
    P_nodes = cumulative_integral(vp, nodes, quad_tol)
    P = CubicHermiteSpline(nodes, P_nodes, vp(nodes))
    J = None
    t_star = None
    if c > 0:
        g = lambda s: np.exp((lam - 1.0) * P(s))
        J_nodes = cumulative_integral(g, nodes, quad_tol)
        J = CubicHermiteSpline(nodes, J_nodes, g(nodes))
        if search:
            kappa = c * (lam - 1.0) * x_hat ** (lam - 1.0)
            D = lambda s: 1.0 - kappa * float(J(s))
            bad = np.nonzero(1.0 - kappa * J_nodes <= 0.0)[0]
            if bad.size:
                i = int(bad[0])
                t_star = float(nodes[i]) if D(nodes[i]) == 0.0 else brentq(
                    D, nodes[i - 1], nodes[i], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                if t_star <= horizon:
                    raise BlowUpBeforeT(
                        f"envelope blows up at t*={t_star:.6g} before horizon {horizon}", t_star)
    return BernoulliMajorant(vp, c, lam, x_hat, sign, horizon, P, J, t_star)


def example512_majorant() -> ClosedFormMajorant:
    """``X_1 = (e^{2t}+1)/2``, ``X_2 = e^t`` with exact derivatives."""
    return ClosedFormMajorant(
        [lambda t: (math.exp(2 * t) + 1) / 2, math.exp],
        [lambda t: math.exp(2 * t), math.exp],
    )
