"""Weighted sequence-space arithmetic on finite truncations.

Coordinates are addressed by 1-based position ``k``; arrays hold positions
``1..n`` at offsets ``0..n-1``.  Models whose natural index starts at 0 (the
Taylor coefficients ``u_j``) map ``j -> k = j + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, DivergentTail

if TYPE_CHECKING:
    from .majorant import MajorantFn

EPS = np.finfo(float).eps

SYMMETRIC = "symmetric"
NONNEG = "nonneg"
MODES = (SYMMETRIC, NONNEG)


@dataclass(frozen=True)
class TruncatedState:
    """The projection ``P_n x`` at time ``t``."""

    coords: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        c = np.array(self.coords, dtype=float, copy=True).reshape(-1)
        if c.size < 1:
            raise DimensionMismatch("a truncated state needs n >= 1 coordinates")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.coords.size

    def extend(self, n: int) -> "TruncatedState":
        """Zero-pad or cut to level ``n``."""
        out = np.zeros(n)
        m = min(n, self.n)
        out[:m] = self.coords[:m]
        return TruncatedState(out, self.t)


def _coords(x) -> np.ndarray:
    if isinstance(x, TruncatedState):
        return x.coords
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True)
class TailRule:
    """Analytic bound on ``w_k * sup_t X_k(t)`` beyond the explicitly summed range.

    kind:
      ``zero``      -- nothing beyond the cap.
      ``power``     -- ``w_k X_k <= const * k**(-rate)`` (needs rate > 1).
      ``geometric`` -- ``w_k X_k <= const * rate**k`` (needs 0 < rate < 1).
      ``ratio``     -- consecutive terms shrink by at least ``rate`` (< 1).
      ``none``      -- no bound declared.
    """

    kind: str = "none"
    const: float = 1.0
    rate: float = 2.0

    def __post_init__(self):
        if self.kind not in ("zero", "power", "geometric", "ratio", "none"):
            raise ValueError(f"unknown tail rule {self.kind!r}")

    def remainder(self, K: int, last_term: float | None = None, steps: int = 0) -> float:
        """Bound on ``sum_{k>K} w_k sup X_k``.

        For ``ratio`` the bound is anchored at ``last_term`` (the term at the
        explicit cap) and ``steps`` further indices are skipped.
        """
        if self.kind == "zero":
            return 0.0
        if self.kind == "power":
            if self.rate <= 1.0:
                raise DivergentTail(f"power tail with exponent {self.rate} <= 1 diverges")
            return self.const * float(K) ** (1.0 - self.rate) / (self.rate - 1.0)
        if self.kind == "geometric":
            if not 0.0 < self.rate < 1.0:
                raise DivergentTail(f"geometric tail ratio {self.rate} not in (0, 1)")
            return self.const * self.rate ** (K + 1) / (1.0 - self.rate)
        if self.kind == "ratio":
            if not 0.0 < self.rate < 1.0:
                raise DivergentTail(f"ratio tail {self.rate} not in (0, 1)")
            if last_term is None:
                raise DivergentTail("ratio tail needs an explicit anchor term")
            r = self.rate
            return last_term * r ** (steps + 1) / (1.0 - r)
        raise DivergentTail("no tail rule declared; cannot bound the remainder")


@dataclass(frozen=True)
class WeightProfile:
    """Positive weights ``w_k`` defining ``||x|| = sum_k w_k |x_k|``.

    Use the named constructors; ``rule`` is one of ``uniform``,
    ``inverse_square``, ``geometric``, ``smoluchowski`` or ``explicit``.
    """

    rule: str
    values: tuple = ()
    ratio: float = 1.0
    tail: TailRule = field(default_factory=TailRule)
    cap: int | None = None

    def __post_init__(self):
        if self.rule not in ("uniform", "inverse_square", "geometric", "smoluchowski", "explicit"):
            raise ValueError(f"unknown weight rule {self.rule!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.rule == "explicit" and any(v <= 0 for v in vals):
            raise ValueError("weights must be positive")
        if self.rule == "smoluchowski" and any(v < 1.0 for v in vals):
            raise ValueError("smoluchowski profile needs F_k >= 1")
        if self.rule == "geometric" and self.ratio <= 0:
            raise ValueError("geometric weight ratio must be positive")

    @classmethod
    def uniform(cls, tail: TailRule | None = None, cap=None):
        return cls("uniform", tail=tail or TailRule(), cap=cap)

    @classmethod
    def inverse_square(cls, tail: TailRule | None = None, cap=None):
        return cls("inverse_square", tail=tail or TailRule(), cap=cap)

    @classmethod
    def geometric(cls, ratio: float, tail: TailRule | None = None, cap=None):
        """``w_k = ratio**(k-1)``; for Taylor coefficients this is the sup-norm
        majorant on the disc of radius ``ratio``."""
        return cls("geometric", ratio=ratio, tail=tail or TailRule(), cap=cap)

    @classmethod
    def smoluchowski(cls, F: Sequence[float], tail: TailRule | None = None):
        """``w_k = 1/(k^2 F_k)``.  Since ``F_k >= X_k`` the default tail rule is
        ``w_k X_k <= k^-2``."""
        return cls("smoluchowski", values=tuple(F), tail=tail or TailRule("power", 1.0, 2.0),
                   cap=len(F))

    @classmethod
    def explicit(cls, values: Sequence[float], tail: TailRule | None = None):
        return cls("explicit", values=tuple(values), tail=tail or TailRule(), cap=len(values))

    @property
    def length(self) -> int | None:
        """Number of weights available, or None for rule-generated profiles."""
        if self.rule in ("smoluchowski", "explicit"):
            return len(self.values)
        return None

    def weights(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        if self.rule == "uniform":
            return np.ones(n)
        if self.rule == "inverse_square":
            return 1.0 / k**2
        if self.rule == "geometric":
            return self.ratio ** (k - 1.0)
        if n > len(self.values):
            raise DimensionMismatch(
                f"profile has {len(self.values)} weights, {n} requested")
        v = np.asarray(self.values[:n])
        if self.rule == "smoluchowski":
            return 1.0 / (k**2 * v)
        return v.copy()

    def weight(self, k: int) -> float:
        return float(self.weights(k)[-1])


def weighted_norm(x, w: WeightProfile) -> float:
    c = _coords(x)
    return float(np.sum(w.weights(c.size) * np.abs(c)))


def tail_norm_bound(X: "MajorantFn", w: WeightProfile, n: int, grid, cap: int | None = None,
                    explicit_limit: int = 4096) -> float:
    """Upper bound on ``max_t sum_{k>n} w_k X_k(t)`` over ``grid``.

    Indices ``n < k <= K`` are summed explicitly, where ``K`` is the smallest
    of ``cap``, the profile's cap, the majorant's size and the profile's
    length (``explicit_limit`` if all are unbounded).  The rest is bounded by
    the profile's tail rule.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    limits = [v for v in (cap, w.cap, X.size, w.length) if v is not None]
    K = min(limits) if limits else max(n, explicit_limit)
    if n >= K:
        if w.tail.kind == "ratio":
            last = _term_sup(X, w, K, grid)
            return w.tail.remainder(K, last, steps=n - K)
        if w.tail.kind == "zero":
            return 0.0
        return w.tail.remainder(n)
    vals = np.array([X.values(t, K) for t in grid])  # (len(grid), K)
    ww = w.weights(K)
    head = float(np.max(np.sum(vals[:, n:] * ww[n:], axis=1)))
    last = float(np.max(vals[:, K - 1])) * ww[K - 1]
    return float(head + w.tail.remainder(K, last))


def _term_sup(X, w, k, grid) -> float:
    return w.weight(k) * max(X.value(k, t) for t in grid)


class BoxCheck(NamedTuple):
    inside: bool
    index: int
    margin: float


@dataclass(frozen=True)
class Box:
    """``|x_k| <= upper_k`` (symmetric) or ``0 <= x_k <= upper_k`` (nonneg)."""

    upper: np.ndarray
    mode: str = SYMMETRIC

    def __post_init__(self):
        u = np.array(self.upper, dtype=float).reshape(-1)
        if np.any(u < 0):
            raise ValueError("box upper bounds must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        u.setflags(write=False)
        object.__setattr__(self, "upper", u)

    @classmethod
    def from_majorant(cls, X: "MajorantFn", t: float, n: int, mode: str = SYMMETRIC) -> "Box":
        return cls(X.values(t, n), mode)

    @property
    def n(self) -> int:
        return self.upper.size

    @property
    def lower(self) -> np.ndarray:
        return -self.upper if self.mode == SYMMETRIC else np.zeros_like(self.upper)

    def margins(self, x) -> np.ndarray:
        c = _coords(x)
        if c.size != self.n:
            raise DimensionMismatch(f"state has {c.size} coordinates, box has {self.n}")
        if self.mode == SYMMETRIC:
            return self.upper - np.abs(c)
        return np.minimum(self.upper - c, c)

    def excess(self, x) -> float:
        """Largest amount by which ``x`` leaves the box (0 when inside)."""
        return max(0.0, -float(np.min(self.margins(x))))

    def project(self, x) -> np.ndarray:
        return np.clip(_coords(x), self.lower, self.upper)


def default_slack(upper) -> np.ndarray:
    return 64.0 * EPS * np.maximum(1.0, np.asarray(upper, dtype=float))


def in_box(x, box: Box, slack=None) -> BoxCheck:
    """Check ``x`` against ``box`` with per-coordinate ``slack``.

    ``margin`` is the raw minimum margin (slack not added) and ``index`` the
    1-based coordinate where it is attained.
    """
    m = box.margins(x)
    s = default_slack(box.upper) if slack is None else np.broadcast_to(
        np.asarray(slack, dtype=float), m.shape)
    i = int(np.argmin(m))
    return BoxCheck(bool(np.all(m >= -s)), i + 1, float(m[i]))
