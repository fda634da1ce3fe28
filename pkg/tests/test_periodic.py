import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from majorode import certify as cert
from majorode.errors import BoxEscape, NotConverged
from majorode.majorant import SequenceMajorant, build_smoluchowski_bounds
from majorode.models import smoluchowski_rhs
from majorode.periodic import (ANDERSON, PICARD, find_periodic, find_periodic_multistart, orbit,
                               poincare_map)
from majorode.seqspace import NONNEG, Box
from majorode.solver import StepControl, integrate_truncated
from majorode.system import FunctionRhs, LinearRhs

TIGHT = StepControl(atol=1e-13, rtol=1e-12)
FORCED = FunctionRhs(lambda t, y: -y + math.sin(2 * math.pi * t), period=1.0, affine=True)
X_UNIT = SequenceMajorant(np.ones(3))


def test_poincare_examples():
    decay = LinearRhs(lambda t: -np.eye(1), period=1.0)
    assert poincare_map(decay, 1, [1.0], step_ctrl=TIGHT).coords[0] == pytest.approx(
        math.exp(-1), abs=1e-12)
    rest = FunctionRhs(lambda t, y: y * (1 - y), period=2.0)
    assert np.array_equal(poincare_map(rest, 2, [0.0, 1.0]).coords, [0.0, 1.0])
    cos = FunctionRhs(lambda t, y: np.full(1, math.cos(2 * math.pi * t)), period=1.0)
    assert abs(poincare_map(cos, 1, [0.0], step_ctrl=TIGHT).coords[0]) <= 1e-12
    with pytest.raises(ValueError):
        poincare_map(FunctionRhs(lambda t, y: -y), 1, [1.0])


def test_forced_decay_orbit():
    res = find_periodic(FORCED, 3, X_UNIT, tol=1e-10, step_ctrl=TIGHT)
    xp0 = -2 * math.pi / (1 + 4 * math.pi ** 2)
    assert res.converged and res.residual <= 1e-10
    assert np.allclose(res.fixed_point.coords, xp0, atol=1e-9)
    assert res.periodicity_residual <= 1e-9
    assert res.method in (PICARD, ANDERSON)
    orb = orbit(FORCED, 3, res.fixed_point, points=11, step_ctrl=TIGHT)
    t = orb.times
    xp = (np.sin(2 * math.pi * t) - 2 * math.pi * np.cos(2 * math.pi * t)) / (1 + 4 * math.pi ** 2)
    assert np.max(np.abs(orb.states[:, 0] - xp)) <= 1e-9
    d = res.to_dict()
    assert d["residual_history"][-1] == res.residual


def test_decay_fixed_point_zero():
    for omega in (0.5, 2.0):
        res = find_periodic(LinearRhs(lambda t: -np.eye(2)), 2, X_UNIT, omega, tol=1e-9,
                            x0=[0.9, -0.4])
        assert np.max(np.abs(res.fixed_point.coords)) <= 1e-8


def test_anderson_switch_on_slow_map():
    # contraction factor exp(-0.02) per period: Picard stagnates, Anderson finishes
    f = FunctionRhs(lambda t, y: -0.02 * y + 0.01 * math.cos(2 * math.pi * t), period=1.0)
    res = find_periodic(f, 1, SequenceMajorant(np.ones(1)), tol=1e-9, x0=[0.8], step_ctrl=TIGHT)
    assert res.method == ANDERSON and res.converged


def test_smoluchowski_periodic():
    bounds = build_smoluchowski_bounds(lambda k: 1 / k ** 2, lambda i, j: 4 * i * j,
                                       lambda k: 4 * k ** 2 / 3, 8, band=2)
    c = lambda t, k: (0.6 + 0.3 * math.sin(2 * math.pi * t)) / np.asarray(k, float) ** 2
    # diagonal >= 4k^2/3 and every entry <= 4ij
    b = lambda t, i, j: (2.0 + math.cos(2 * math.pi * t)) * np.asarray(i * j, float) \
        * np.where(i == j, 4 / 3, 1.0)
    f = smoluchowski_rhs(c, b, bounds, band=2, period=1.0)
    X = bounds.majorant()
    audit = f.audit(np.linspace(0, 1, 9), 8)
    res = find_periodic(f, 8, X, tol=1e-7, mode=NONNEG, x0=0.5 * X.values(0.0, 8),
                        nonneg_clip=True)
    assert res.converged
    ok = Box.from_majorant(X, 0.0, 8, NONNEG).margins(res.fixed_point.coords)
    assert np.all(ok >= -1e-9) and audit["ok"]


def test_semigroup():
    f = FunctionRhs(lambda t, y: np.sin(t) * y - y ** 3 + np.cos(3 * t), period=2 * math.pi / 3)
    x0 = np.array([0.3, -0.2])
    a = integrate_truncated(f, 2, x0, 1.3, TIGHT, grid=[0.0, 1.3]).final.coords
    b = integrate_truncated(f, 2, a, 2.6, TIGHT, grid=[1.3, 2.6], t0=1.3).final.coords
    c = integrate_truncated(f, 2, x0, 2.6, TIGHT, grid=[0.0, 2.6]).final.coords
    assert np.sum(np.abs(b - c)) <= 1e-8


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_converged_point_in_box(x0):
    res = find_periodic(FORCED, 3, X_UNIT, tol=1e-8, x0=x0)
    assert Box.from_majorant(X_UNIT, 0.0, 3).excess(res.fixed_point.coords) == 0.0


def test_not_converged_reports_history():
    f = FunctionRhs(lambda t, y: -0.001 * y + 0.1 * math.cos(2 * math.pi * t), period=1.0)
    with pytest.raises(NotConverged) as exc:
        find_periodic(f, 1, SequenceMajorant(np.ones(1)), tol=1e-12, max_iter=3, x0=[0.5])
    assert len(exc.value.result.history) == 3 and not exc.value.result.converged


def test_box_escape():
    # strong outward drift: the unit box is not invariant
    f = FunctionRhs(lambda t, y: np.ones_like(y) * 2.0, period=1.0)
    X = SequenceMajorant(np.ones(1))
    assert cert.check_upper_symmetric(f, X, 1, [0.0]).falsified
    with pytest.raises(BoxEscape):
        find_periodic(f, 1, X, tol=1e-8)


def test_multistart():
    out = find_periodic_multistart(FORCED, 3, X_UNIT, [np.zeros(3), np.ones(3), -np.ones(3)],
                                   jobs=2, tol=1e-9)
    pts = [r.fixed_point.coords for r in out]
    assert all(np.max(np.abs(p - pts[0])) <= 1e-8 for p in pts)
