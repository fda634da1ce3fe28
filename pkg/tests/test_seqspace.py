import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from majorode.errors import DimensionMismatch, DivergentTail
from majorode.majorant import SequenceMajorant
from majorode.seqspace import (NONNEG, SYMMETRIC, Box, TailRule, TruncatedState, WeightProfile,
                               in_box, tail_norm_bound, weighted_norm)

from conftest import ScaledMajorant

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_truncated_state_is_read_only_and_extends():
    s = TruncatedState([1.0, 2.0], t=0.5)
    assert s.n == 2
    with pytest.raises(ValueError):
        s.coords[0] = 3.0
    assert s.extend(4).coords.tolist() == [1.0, 2.0, 0.0, 0.0]
    assert s.extend(1).coords.tolist() == [1.0]
    with pytest.raises(DimensionMismatch):
        TruncatedState([])


def test_weighted_norm_examples():
    w1 = WeightProfile.smoluchowski([1.0])
    assert weighted_norm(TruncatedState([1.0]), w1) == 1.0
    assert weighted_norm(np.zeros(7), WeightProfile.inverse_square()) == 0.0
    assert weighted_norm([1.0, 1.0, 1.0], WeightProfile.inverse_square()) == pytest.approx(49 / 36,
                                                                                           rel=1e-15)


def test_weight_profiles():
    assert WeightProfile.geometric(2.0).weights(4).tolist() == [1.0, 2.0, 4.0, 8.0]
    F = [1.0, 3.0, 2.0]
    w = WeightProfile.smoluchowski(F).weights(3)
    assert np.allclose(w, [1.0, 1 / 12, 1 / 18])
    assert np.all(w <= 1.0 / np.arange(1, 4) ** 2)
    with pytest.raises(DimensionMismatch):
        WeightProfile.smoluchowski(F).weights(4)
    with pytest.raises(ValueError):
        WeightProfile.explicit([1.0, 0.0])
    with pytest.raises(ValueError):
        WeightProfile.smoluchowski([0.5])


@given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite), finite)
def test_weighted_norm_is_a_norm(x, y, a):
    w = WeightProfile.inverse_square()
    assert weighted_norm(a * x, w) == pytest.approx(abs(a) * weighted_norm(x, w), rel=1e-12,
                                                    abs=1e-300)
    assert weighted_norm(x + y, w) <= (weighted_norm(x, w) + weighted_norm(y, w)) * (1 + 1e-12)


def test_tail_bound_inverse_square_constant():
    # exact tail sum_{k>1} 1/k^2 = pi^2/6 - 1; the power remainder overestimates by < 1e-7
    exact = math.pi ** 2 / 6 - 1
    w = WeightProfile.inverse_square(tail=TailRule("power", 1.0, 2.0))
    b = tail_norm_bound(ScaledMajorant(), w, 1, [0.0])
    assert exact <= b <= exact + 1e-7


def test_tail_bound_empty_and_divergent():
    X = SequenceMajorant(np.ones(5))
    w = WeightProfile.uniform(tail=TailRule("zero"))
    assert tail_norm_bound(X, w, 5, [0.0]) == 0.0
    assert tail_norm_bound(X, w, 9, [0.0]) == 0.0
    with pytest.raises(DivergentTail):
        tail_norm_bound(X, WeightProfile.uniform(), 2, [0.0])
    with pytest.raises(DivergentTail):
        TailRule("power", 1.0, 1.0).remainder(10)
    with pytest.raises(DivergentTail):
        TailRule("geometric", 1.0, 1.5).remainder(10)


def test_tail_bound_smoluchowski_dominated_by_inverse_squares():
    rng = np.random.default_rng(3)
    X = rng.uniform(0.1, 5.0, 40)
    F = np.maximum(1.0, X * rng.uniform(1.0, 3.0, 40))
    w = WeightProfile.smoluchowski(F)
    for n in (1, 5, 20, 39):
        b = tail_norm_bound(SequenceMajorant(X), w, n, [0.0])
        k = np.arange(n + 1, 41)
        assert b <= np.sum(1.0 / k ** 2) + 1.0 / 40 + 1e-15


@settings(max_examples=40)
@given(st.integers(1, 30), st.integers(0, 30))
def test_tail_bound_monotone_in_n(n, dn):
    X = SequenceMajorant(1.0 / np.arange(1, 51) ** 1.5)
    w = WeightProfile.explicit(np.ones(50), tail=TailRule("power", 1.0, 1.5))
    assert tail_norm_bound(X, w, n + dn, [0.0]) <= tail_norm_bound(X, w, n, [0.0])


def test_tail_bound_geometric_rule():
    X = ScaledMajorant()
    # w_k X_k = 0.5^(k-1) = 2 * 0.5^k
    w = WeightProfile.geometric(0.5, tail=TailRule("geometric", 2.0, 0.5))
    b = tail_norm_bound(X, w, 3, [0.0], cap=10)
    # explicit terms k = 4..10 plus the geometric remainder give sum_{k>=4} 0.5^(k-1) = 0.25
    assert b == pytest.approx(0.25, rel=1e-14)


def test_in_box_examples():
    r = in_box([0.5], Box([1.0], SYMMETRIC), slack=0.0)
    assert r.inside and r.margin == 0.5 and r.index == 1
    r = in_box([-0.1], Box([1.0], NONNEG), slack=0.0)
    assert not r.inside and r.index == 1
    assert in_box([1.0 + 1e-12], Box([1.0]), slack=1e-10).inside
    assert in_box([1.0 + 1e-15], Box([1.0])).inside
    with pytest.raises(DimensionMismatch):
        in_box([1.0, 2.0], Box([1.0]))


@given(arrays(float, 4, elements=st.floats(-3, 3)), st.floats(0, 1), st.floats(0, 1))
def test_in_box_monotone_in_slack(x, s, ds):
    box = Box([1.0, 2.0, 0.5, 1.5], NONNEG)
    if in_box(x, box, slack=s).inside:
        assert in_box(x, box, slack=s + ds).inside


@given(arrays(float, 3, elements=st.floats(-5, 5)))
def test_project_lands_in_box_and_fixes_interior(x):
    for mode in (SYMMETRIC, NONNEG):
        box = Box([1.0, 2.0, 3.0], mode)
        p = box.project(x)
        assert in_box(p, box, slack=0.0).inside
        assert np.array_equal(box.project(p), p)


def test_box_rejects_negative_upper():
    with pytest.raises(ValueError):
        Box([-1.0])
    assert Box([2.0]).excess([3.0]) == 1.0
