import math

import numpy as np
import pytest

from majorode.majorant import MajorantFn


class ScaledMajorant(MajorantFn):
    """``X_k(t) = level * exp(rate * t)`` at every position (unbounded size)."""

    kind = "test-scaled"
    size = None

    def __init__(self, level=1.0, rate=0.0):
        self.level, self.rate = level, rate

    def values(self, t, n):
        return np.full(n, self.level * math.exp(self.rate * t))

    def derivs(self, t, n):
        return np.full(n, self.rate * self.level * math.exp(self.rate * t))


@pytest.fixture
def unit_box():
    return ScaledMajorant(1.0, 0.0)
