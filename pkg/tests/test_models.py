import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from majorode import certify as cert
from majorode.errors import DimensionMismatch
from majorode.majorant import (PdeMajorantSpec, build_pde_majorant, build_smoluchowski_bounds,
                               example512_majorant)
from majorode.models import (INCONCLUSIVE, MASS_CONSERVING, STABLE, UNSTABLE, UNSTABLE_INTEGRAL,
                             PdeModelSpec, StabilitySystem, classify_stability,
                             constant_coefficients, constant_kernel_solution, example512_rhs,
                             expression_coefficients, pde_rhs, smoluchowski_rhs,
                             stability_functions)
from majorode.solver import StepControl, integrate_truncated

TIGHT = StepControl(atol=1e-13, rtol=1e-12)


def test_pde_rows():
    f = pde_rhs(PdeModelSpec(2, 3, a=lambda t: 2.0 + t, forcing=[lambda t: 0.5]))
    y = np.arange(1.0, 7.0)
    out = f.rhs(0.0, y)
    assert out[0] == -1.0 + 0.5 and out[1] == -2.0
    # j = 2 reads j - m + N = 3 with q = 3! / 0! = 6
    assert out[2] == -3.0 + 6 * 2.0 * 4.0
    assert f.coupling_reach(1) == 1 and f.coupling_reach(3) == 4


def test_pde_m0_n1():
    f = pde_rhs(PdeModelSpec(0, 1))
    for k in range(1, 6):
        row, off = f.linear_row(k, 0.3, 6)
        expect = np.zeros(6)
        expect[k - 1] = -1.0
        if k < 6:
            expect[k] = k
        assert np.array_equal(row, expect) and off == 0.0


def test_pde_m1_n2_coefficient():
    f = pde_rhs(PdeModelSpec(1, 2, a=math.cos))
    row, _ = f.linear_row(2, 0.4, 4)
    assert row[1] == -1.0
    assert row[2] == pytest.approx(math.factorial(2) / math.factorial(0) * math.cos(0.4), rel=1e-15)
    with pytest.raises(ValueError):
        PdeModelSpec(2, 2)


def test_gauge_consistency():
    n = 16
    U = build_pde_majorant(PdeMajorantSpec(0, 1, 1.0), n).coeffs
    x0 = 0.5 * U[:n]
    fu = pde_rhs(PdeModelSpec(0, 1, a=1.0, b=math.sin, gauge="u"))
    fv = pde_rhs(PdeModelSpec(0, 1, a=1.0, b=math.sin, gauge="v",
                              b_integral=lambda t: 1 - math.cos(t)))
    grid = np.linspace(0, 1, 11)
    tu = integrate_truncated(fu, n, x0, 1.0, TIGHT, grid)
    tv = integrate_truncated(fv, n, x0, 1.0, TIGHT, grid)
    for t, u, v in zip(grid, tu.states, tv.states):
        assert np.max(np.abs(fu.u_to_v(t, u) - v)) <= 1e-8
    assert fu.b_int(1.0) == pytest.approx(1 - math.cos(1.0), rel=1e-13)


def test_pde_box_at_truncation():
    n = 16
    U = build_pde_majorant(PdeMajorantSpec(0, 1, 1.0), n).coeffs[:n]
    f = pde_rhs(PdeModelSpec(0, 1, a=math.cos, b=math.sin, gauge="v"))
    tr = integrate_truncated(f, n, U / 2, 2.0, grid=np.linspace(0, 2, 21))
    for t, v in zip(tr.times, tr.states):
        assert np.all(np.abs(v) <= f.gauge_factor(t) * U + 1e-7)


def test_smoluchowski_low_orders():
    c, b = constant_coefficients([0.3, 0.2, 0.1], [[1.0, 2.0, 0.5], [2.0, 3.0, 1.0],
                                                   [0.5, 1.0, 4.0]])
    f = smoluchowski_rhs(c, b)
    x = np.array([0.4, 0.6, 0.8])
    B = np.array([[1.0, 2.0, 0.5], [2.0, 3.0, 1.0], [0.5, 1.0, 4.0]])
    out = f.rhs(0.0, x)
    assert out[0] == pytest.approx(0.3 - x[0] * (B[0] @ x), rel=1e-15)
    assert out[1] == pytest.approx(0.2 + 0.5 * B[0, 0] * x[0] ** 2 - x[1] * (B[1] @ x), rel=1e-15)
    assert out[2] == pytest.approx(0.1 + B[0, 1] * x[0] * x[1] - x[2] * (B[2] @ x), rel=1e-15)
    for k in (1, 2, 3):
        assert f.component(k, 0.0, x[None, :])[0] == pytest.approx(out[k - 1], rel=1e-15)


def test_constant_kernel_oracle():
    n = 64
    c, b = constant_coefficients(np.zeros(n), np.ones((n, n)))
    f = smoluchowski_rhs(c, b, truncation=MASS_CONSERVING, autonomous=True)
    x0 = np.zeros(n)
    x0[0] = 1.0
    tr = integrate_truncated(f, n, x0, 1.0, TIGHT, grid=[0.0, 1.0])
    k = np.arange(1, 11)
    assert np.max(np.abs(tr.final.coords[:10] - constant_kernel_solution(1.0, k))) <= 1e-6
    assert constant_kernel_solution(1.0, 2) == pytest.approx(0.5 / 1.5 ** 3)


@settings(max_examples=40)
@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_mass_conserving_moment_identity(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.uniform(0, 2, (n, n))
    B = B + B.T
    c, b = constant_coefficients(np.zeros(n), B)
    f = smoluchowski_rhs(c, b, truncation=MASS_CONSERVING)
    x = rng.uniform(0, 1, n)
    dm = np.arange(1, n + 1) @ f.rhs(0.0, x)
    assert abs(dm) <= 1e-12 * (1 + np.sum(B) * np.sum(x) ** 2 * n)


def test_smoluchowski_audit():
    bounds = build_smoluchowski_bounds(lambda k: 1 / k ** 2, lambda i, j: 4 * i * j,
                                       lambda k: 4 * k ** 2, 6, band=2)
    c, b, auto = expression_coefficients("0.5/k**2", "4*i*j*(1 + 0*t)")
    assert not auto
    ok = smoluchowski_rhs(c, b, bounds, band=2).audit(np.linspace(0, 1, 3), 6)
    assert ok["ok"] and ok["beta_margin"] == pytest.approx(0.0, abs=1e-12)
    c2, b2, auto2 = expression_coefficients("2/k**2", "4*i*j")
    bad = smoluchowski_rhs(c2, b2, bounds, band=2).audit([0.0], 6)
    assert auto2 and not bad["ok"] and bad["source_margin"] < 0
    c3, b3, _ = expression_coefficients("1", "i - j")
    asym = smoluchowski_rhs(c3, b3).audit([0.0], 3)
    assert not asym["symmetric"] and not asym["nonneg"]


def test_stability_functions_examples():
    for A, p0, q0 in ((np.diag([-1.0, -2.0]), -1.0, -2.0),
                      (np.array([[-1.0, 0.5], [0.5, -1.0]]), -0.5, -1.5),
                      (np.zeros((2, 2)), 0.0, 0.0)):
        p, q = stability_functions(lambda t, A=A: A)
        assert p(0.7) == p0 and q(0.7) == q0
        assert np.all(p(np.linspace(0, 1, 4)) == p0)


def test_classify_examples():
    rep = classify_stability(StabilitySystem(lambda t: -np.eye(2)), asymptotic=True)
    assert rep.verdict == STABLE
    assert rep.envelope.scalar(2.0) == pytest.approx(math.exp(-2.0), rel=1e-9)
    assert classify_stability(StabilitySystem(lambda t: np.eye(2))).verdict == UNSTABLE
    off = StabilitySystem(lambda t: np.array([[-1.0, 0.5], [0.5, -1.0]]))
    assert classify_stability(off, asymptotic=True).verdict == STABLE
    assert classify_stability(off).verdict == INCONCLUSIVE


def test_classify_nonlinear_threshold():
    sys = StabilitySystem(lambda t: -np.eye(2), c=2.0, lam=2.0)
    assert classify_stability(sys, x_hat=0.4, asymptotic=True).verdict == STABLE
    rep = classify_stability(sys, x_hat=0.6, asymptotic=True)
    assert rep.verdict != STABLE and any("too large" in s for s in rep.notes)


def test_classify_integral_instability():
    # q(t) = sin(t) + 0.2 dips below 0 yet its integral grows; q > 0 on the last tenth of [0, 21]
    sys = StabilitySystem(lambda t: np.diag([math.sin(t) + 0.2, math.sin(t) + 0.4]))
    rep = classify_stability(sys, horizon=21.0, asymptotic=True)
    assert rep.min_q < 0 and rep.verdict == UNSTABLE_INTEGRAL
    assert classify_stability(sys, horizon=21.0).verdict == INCONCLUSIVE


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9), st.permutations([0, 1, 2]))
def test_classification_row_permutation_invariant(entries, perm):
    A = np.array(entries).reshape(3, 3)
    # permute rows together with the matching columns so each row keeps its diagonal
    Pc = A[np.ix_(list(perm), list(perm))]
    a = classify_stability(StabilitySystem(lambda t: A), horizon=2.0, grid_points=41)
    b = classify_stability(StabilitySystem(lambda t: Pc), horizon=2.0, grid_points=41)
    assert a.verdict == b.verdict
    assert a.min_q == pytest.approx(b.min_q, rel=1e-12, abs=1e-12)


def test_perturbation_audit():
    good = StabilitySystem(lambda t: -np.eye(2), psi=lambda t, x: 0.5 * x ** 2, c=0.5)
    assert good.audit_perturbation(samples=64)["ok"]
    bad = StabilitySystem(lambda t: -np.eye(2), psi=lambda t, x: x, c=0.5)
    assert not bad.audit_perturbation(samples=64)["ok"]
    with pytest.raises(DimensionMismatch):
        good.rhs(0.0, np.zeros(3))
    with pytest.raises(ValueError):
        StabilitySystem(lambda t: -np.eye(2), lam=1.0)


def test_example512_values():
    f = example512_rhs()
    assert f.rhs(0.0, np.zeros(2)).tolist() == [1.0, 0.0]
    t = 0.7
    X1, X2 = (math.exp(2 * t) + 1) / 2, math.exp(t)
    assert f.rhs(t, np.array([X1, 0.3]))[0] == 0.3 ** 2
    for s in (1.0, -1.0):
        f2 = f.rhs(t, np.array([0.4, s * X2]))[1]
        assert f2 == pytest.approx(math.cos(0.4) * s * X2, rel=1e-15)
        assert s * f2 <= X2


def test_example512_faces_certified():
    c = cert.check_upper_symmetric(example512_rhs(), example512_majorant(), 2,
                                   np.linspace(0, 2, 9), face_samples=64)
    # the first face holds with equality up to rounding
    assert c.ok and c.min_margin >= -1e-12 * (1 + math.exp(4.0))
