import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import RK45

from majorode import certify as cert
from majorode.errors import DimensionMismatch, EpsilonTooLarge, StepSizeUnderflow
from majorode.majorant import SequenceMajorant, build_smoluchowski_bounds
from majorode.models import PdeModelSpec, constant_coefficients, pde_rhs, smoluchowski_rhs
from majorode.seqspace import NONNEG, TailRule, WeightProfile
from majorode.solver import (DP_A, DP_B, DP_C, DP_E, DP_P, MASS_CONSERVING, PAPER_FAITHFUL,
                             PenaltyConfig, StepControl, Trajectory, bump, dopri5,
                             integrate_truncated, penalty_rhs, smoluchowski_truncation_mode,
                             solve_adaptive)
from majorode.system import FunctionRhs, LinearRhs

DECAY = LinearRhs(lambda t: -np.eye(4))


def test_tableau_matches_scipy():
    assert np.allclose(DP_C[:6], RK45.C, rtol=0, atol=1e-16)
    assert np.allclose(DP_A[:, :5], RK45.A, rtol=0, atol=1e-15)
    assert np.allclose(DP_B[:6], RK45.B, rtol=0, atol=1e-16)
    # sign convention differs; only |E| enters the error norm
    assert np.allclose(DP_E, -RK45.E, rtol=0, atol=1e-16)
    assert np.allclose(DP_P, RK45.P, rtol=0, atol=1e-15)


def test_exponential_decay():
    tr = integrate_truncated(DECAY, 4, np.ones(4), 1.0)
    assert np.max(np.abs(tr.final.coords - math.exp(-1))) <= 1e-9
    assert tr.stats["steps"] > 0 and tr.n == 4
    assert np.all(np.diff(tr.times) > 0)


def test_pde_characteristics():
    f = pde_rhs(PdeModelSpec(0, 1, a=1.0, gauge="v"))
    tr = integrate_truncated(f, 4, np.array([0.0, 1.0, 0.0, 0.0]), 1.5,
                             StepControl(atol=1e-13, rtol=1e-12))
    for t, row in zip(tr.times, tr.states):
        assert row[0] == pytest.approx(t, abs=1e-10)
        assert row[1] == pytest.approx(1.0, abs=1e-10)


def test_constant_scalar():
    tr = integrate_truncated(FunctionRhs(lambda t, y: np.zeros(1)), 1, [0.25], 1.0)
    assert np.all(tr.states == 0.25)


def test_dimension_and_time_checks():
    with pytest.raises(DimensionMismatch):
        integrate_truncated(DECAY, 4, np.ones(3), 1.0)
    with pytest.raises(ValueError):
        integrate_truncated(DECAY, 4, np.ones(4), 0.0)


def test_order_five():
    f = lambda t, y: -y
    errs = []
    for h in (0.1, 0.05, 0.025):
        _, ys, _ = dopri5(f, 0.0, [1.0], 1.0, grid=[1.0], ctrl=StepControl(h_fixed=h))
        errs.append(abs(ys[-1, 0] - math.exp(-1)))
    for a, b in zip(errs, errs[1:]):
        assert 24 <= a / b <= 40


def test_dense_output_accuracy():
    grid = np.linspace(0, 2, 37)
    _, ys, _ = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0], 2.0, grid=grid,
                      ctrl=StepControl(atol=1e-12, rtol=1e-12))
    assert np.max(np.abs(ys[:, 0] - np.sin(grid))) < 1e-10


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_underflows():
    with pytest.raises(StepSizeUnderflow) as exc:
        integrate_truncated(FunctionRhs(lambda t, y: y ** 2), 1, [1.0], 2.0)
    assert abs(exc.value.t - 1.0) < 1e-2
    assert np.all(np.isfinite(exc.value.state))


def test_bump_and_phi():
    assert bump(0.0) == 1.0
    assert bump(1.0) == 0.0 and bump(-1.5) == 0.0
    assert PenaltyConfig(1e-3).phi(0.0) == pytest.approx(1e-3, rel=1e-15)
    with pytest.raises(ValueError):
        PenaltyConfig(0.0)


@given(st.floats(-5, 5))
def test_bump_range(s):
    v = float(bump(s))
    assert 0.0 <= v <= 1.0
    assert (v == 0.0) == (abs(s) >= 1.0) or v < 1e-300


def test_penalty_rhs_examples():
    X = SequenceMajorant(np.array([1.0, 2.0]))
    g = penalty_rhs(DECAY, X, PenaltyConfig(0.01), 2, 1.0)
    y = np.array([0.3, -0.5])
    assert np.array_equal(g.rhs(0.2, y), DECAY.rhs(0.2, y))
    y = np.array([1.0, 0.0])
    assert g.rhs(0.0, y)[0] == pytest.approx(DECAY.rhs(0.0, y)[0] - 0.01, rel=1e-15)
    y = np.array([0.0, -2.0])
    assert g.rhs(0.0, y)[1] == pytest.approx(DECAY.rhs(0.0, y)[1] + 0.01, rel=1e-15)
    assert g.component(1, 0.0, np.array([[1.0, 0.0]]))[0] == pytest.approx(-1.01)
    with pytest.raises(EpsilonTooLarge):
        penalty_rhs(DECAY, X, PenaltyConfig(2.5), 2, 1.0)


def test_penalty_containment():
    # drift against a certified box with strict margin: f = 1 - 2x on [-1, 1]
    f = FunctionRhs(lambda t, y: 0.9 - 2.0 * y)
    X = SequenceMajorant(np.ones(1))
    assert cert.check_upper_symmetric(f, X, 1, np.linspace(0, 2, 5)).ok
    for eps in (1e-2, 1e-3):
        g = penalty_rhs(f, X, PenaltyConfig(eps), 1, 2.0)
        tr = integrate_truncated(g, 1, [0.99], 2.0, majorant=X)
        assert tr.stats["max_box_excess"] <= 1e-7


def test_penalty_consistency():
    X = SequenceMajorant(np.full(4, 2.0))
    x0 = np.linspace(0.1, 0.4, 4)
    plain = integrate_truncated(DECAY, 4, x0, 1.0).final.coords
    prev = math.inf
    for eps in (1.0, 0.5, 1e-2):
        g = penalty_rhs(DECAY, X, PenaltyConfig(eps), 4, 1.0)
        d = np.max(np.abs(integrate_truncated(g, 4, x0, 1.0).final.coords - plain))
        assert d <= prev
        prev = d
    assert prev == 0.0


def test_solve_adaptive_decoupled():
    X = SequenceMajorant(2.0 ** -np.arange(1, 65))
    w = WeightProfile.uniform(tail=TailRule("ratio", 1.0, 0.5))
    # fixed steps make every level take identical steps, so shared coordinates agree exactly
    tr, rep = solve_adaptive(DECAY_N, X, lambda n: X.values(0.0, n) / 2, 1.0, w, 1e-2, 8, 64,
                             StepControl(h_fixed=0.01))
    assert rep.diffs[0] == 0.0
    assert rep.converged and rep.levels == [8, 16]
    assert tr.n == 16


DECAY_N = FunctionRhs(lambda t, y: -y, affine=True)


def test_solve_adaptive_reports_nonconvergence():
    X = SequenceMajorant(np.ones(64))
    w = WeightProfile.uniform(tail=TailRule("ratio", 1.0, 0.5))
    _, rep = solve_adaptive(DECAY_N, X, lambda n: np.full(n, 0.5), 0.5, w, 1e-6, 4, 16)
    assert not rep.converged and rep.levels == [4, 8, 16]
    with pytest.raises(ValueError):
        solve_adaptive(DECAY_N, X, lambda n: np.zeros(n), 0.5, w, 1e-6, 8, 4)


def test_truncation_modes():
    pf = smoluchowski_truncation_mode(PAPER_FAITHFUL)
    mc = smoluchowski_truncation_mode(MASS_CONSERVING)
    assert pf(3, 10) == 10 and mc(3, 10) == 7 and mc(1, 1) == 0
    with pytest.raises(ValueError):
        smoluchowski_truncation_mode("other")
    c, b = constant_coefficients([0.5], [[2.0]])
    y = np.array([0.7])
    assert smoluchowski_rhs(c, b).rhs(0.0, y)[0] == pytest.approx(0.5 - 2.0 * 0.49)
    assert smoluchowski_rhs(c, b, truncation=MASS_CONSERVING).rhs(0.0, y)[0] == 0.5


def _unit_kernel(n, mode):
    c, b = constant_coefficients(np.zeros(n), np.ones((n, n)))
    return smoluchowski_rhs(c, b, truncation=mode, autonomous=True)


def test_mass_conserving_moment():
    n = 12
    f = _unit_kernel(n, MASS_CONSERVING)
    x0 = np.zeros(n)
    x0[0] = 1.0
    grid = np.linspace(0, 2, 41)
    tr = integrate_truncated(f, n, x0, 2.0, StepControl(atol=1e-13, rtol=1e-12), grid)
    mom = np.array([f.first_moment(y) for y in tr.states])
    dm = np.gradient(mom, grid)
    assert np.max(np.abs(dm)) <= 1e-8


def test_paper_faithful_moment_decreases():
    n = 12
    f = _unit_kernel(n, PAPER_FAITHFUL)
    x0 = np.zeros(n)
    x0[0] = 1.0
    tr = integrate_truncated(f, n, x0, 2.0)
    mom = np.array([f.first_moment(y) for y in tr.states])
    assert np.all(np.diff(mom) <= 1e-12)


def test_box_invariance_and_nonnegativity():
    bounds = build_smoluchowski_bounds(lambda k: 1 / k ** 2, lambda i, j: 4 * i * j,
                                       lambda k: 4 * k ** 2, 16, band=2)
    X = bounds.majorant()
    k = np.arange(1, 19)
    c, b = constant_coefficients(0.5 / k ** 2, np.outer(k, k) * 2.0 + np.diag(2.0 * k ** 2))
    f = smoluchowski_rhs(c, b, bounds, band=2, autonomous=True)
    certificate = cert.check_upper_nonneg(f, X, 16, np.linspace(0, 3, 4), face_samples=16)
    assert certificate.ok
    tr = integrate_truncated(f, 16, 0.5 * X.values(0.0, 16), 3.0, majorant=X, mode=NONNEG,
                             nonneg_clip=True)
    assert tr.stats["max_box_excess"] <= 1e-7 * float(np.max(X.values(0.0, 16)))
    assert np.min(tr.states) >= -1e-9


def test_csv_roundtrip(tmp_path):
    tr = integrate_truncated(DECAY, 4, np.ones(4), 0.5, grid=np.linspace(0, 0.5, 6))
    tr.to_csv(tmp_path / "t.csv")
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.states, tr.states)
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        Trajectory.from_csv(tmp_path / "bad.csv")
