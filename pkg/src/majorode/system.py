"""Right-hand sides ``f(t, x) = (f_1, f_2, ...)`` evaluated on truncations.

Every system evaluates ``P_n f(t, P_n x)``: the level ``n`` is the length of
the state passed in and coordinates above ``n`` read as zero.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np


class RhsSystem:
    """Base class for coordinate evaluators.

    Subclasses implement :meth:`rhs`; :meth:`component` should be overridden
    when a single coordinate is much cheaper than the full vector, since the
    certifier calls it on large sample batches.

    Structure flags used by certification:
      ``affine``   -- every ``f_k`` is affine in each coordinate separately.
      ``nonneg``   -- the system is meant for the non-negative cone.
    """

    name = "rhs"
    period: float | None = None
    nonneg = False
    affine = False

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def component(self, k: int, t: float, Y: np.ndarray) -> np.ndarray:
        """``f_k(t, y)`` for each row ``y`` of ``Y`` (1-based ``k``)."""
        Y = np.atleast_2d(Y)
        return np.array([self.rhs(t, y)[k - 1] for y in Y])

    def dependencies(self, k: int, n: int) -> np.ndarray:
        """0-based positions (below ``n``) that ``f_k`` reads."""
        reach = self.coupling_reach(k)
        top = n if reach is None else min(n, reach)
        return np.arange(top)

    def coupling_reach(self, k: int) -> int | None:
        """Highest 1-based position ``f_k`` reads, None if unbounded."""
        return None

    def phase(self, t: float) -> float:
        """Time reduced modulo the period (identity for aperiodic systems)."""
        if self.period is None:
            return t
        return math.fmod(t, self.period) if t >= 0 else self.period - math.fmod(-t, self.period)

    def __call__(self, t, y):
        return self.rhs(t, y)


class FunctionRhs(RhsSystem):
    """Wrap a plain callable ``func(t, y) -> array``."""

    def __init__(self, func: Callable, period: float | None = None, affine: bool = False,
                 nonneg: bool = False, component: Callable | None = None,
                 reach: Callable[[int], int | None] | None = None, name: str = "custom"):
        self.func = func
        self.period = period
        self.affine = affine
        self.nonneg = nonneg
        self._component = component
        self._reach = reach
        self.name = name

    def rhs(self, t, y):
        return np.asarray(self.func(t, np.asarray(y, dtype=float)), dtype=float)

    def component(self, k, t, Y):
        if self._component is not None:
            return np.asarray(self._component(k, t, np.atleast_2d(Y)), dtype=float)
        return super().component(k, t, Y)

    def coupling_reach(self, k):
        return None if self._reach is None else self._reach(k)


class LinearRhs(RhsSystem):
    """``f(t, x) = A(t) x + g(t)`` with ``A`` and ``g`` callables of ``t``."""

    affine = True

    def __init__(self, A: Callable, forcing: Callable | None = None, period: float | None = None,
                 name: str = "linear"):
        self.A = A
        self.forcing = forcing
        self.period = period
        self.name = name

    def _matrix(self, t, n):
        M = np.atleast_2d(np.asarray(self.A(self.phase(t)), dtype=float))
        out = np.zeros((n, n))
        m = min(n, M.shape[0])
        out[:m, :m] = M[:m, :m]
        return out

    def _force(self, t, n):
        out = np.zeros(n)
        if self.forcing is not None:
            g = np.atleast_1d(np.asarray(self.forcing(self.phase(t)), dtype=float))
            m = min(n, g.size)
            out[:m] = g[:m]
        return out

    def rhs(self, t, y):
        y = np.asarray(y, dtype=float)
        return self._matrix(t, y.size) @ y + self._force(t, y.size)

    def component(self, k, t, Y):
        Y = np.atleast_2d(Y)
        n = Y.shape[1]
        return Y @ self._matrix(t, n)[k - 1] + self._force(t, n)[k - 1]

    def linear_row(self, k, t, n):
        """Coefficients and offset of the affine map ``y -> f_k(t, y)``."""
        return self._matrix(t, n)[k - 1], self._force(t, n)[k - 1]
