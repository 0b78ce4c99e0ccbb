import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from entropic.core import (
    ExtReal,
    FunctionalKind,
    GeneratingFunction,
    Kind,
    adaptive_quad,
    check_symmetry,
    legendre_conjugate,
    mixed_second_derivative,
    perron_root,
    sym_logdet,
)
from entropic.errors import (
    Asymmetric,
    EmptyDomain,
    GridNotSymmetric,
    NoConvergence,
    NonConvexInput,
    NonPositiveEntry,
    StencilOutsideDomain,
    TailBoundMissing,
)
from entropic.markov import p_alpha, rotor_chain
from entropic.models import BernoulliModel, bernoulli_e, bernoulli_functionals

# Frozen oracles (30-digit mpmath evaluations).
BERNOULLI_SIGMA = 0.338919144154881464   # 0.4 log(7/3)
ROTOR_P_HALF_ROOT = 0.892820323027550935  # Perron root of sqrt(p_ij p_ji) for the rotor


def tent(sp):
    return lambda a: -sp * (0.5 - abs(a - 0.5))


# ---------------------------------------------------------------------------
# Extended reals and tables


def test_ext_real_states():
    assert ExtReal.finite(2.0).is_finite
    assert float(ExtReal.pos_inf()) == math.inf
    assert (-ExtReal.pos_inf()).kind == Kind.NEG_INF
    assert ExtReal.finite(3.0).scale(-2).value == -6.0


def test_generating_function_csv_round_trip(tmp_path):
    gf = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, [0.0, 0.5, 1.0], lambda a: -a * (1 - a) / 3,
                                     meta={"model": "toy"})
    path = tmp_path / "e.csv"
    gf.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    row = lines[3].split(",")
    assert float(row[1]) == gf.values[1]
    assert row[-1] == "1"


# ---------------------------------------------------------------------------
# Legendre conjugation


def test_legendre_tent_function():
    grid = np.linspace(-1, 2, 61)
    gf = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, grid, tent(1.5))
    s = np.array([-1.5, -0.5, 0.0, 0.7, 1.5, 1.6, -1.6])
    rate = legendre_conjugate(gf, s)
    inside = np.abs(s) <= 1.5
    np.testing.assert_allclose(rate.values[inside], (s[inside] - 1.5) / 2, atol=1e-9)
    assert np.all(rate.states[~inside] == Kind.NEG_INF)


def test_legendre_zero_function():
    gf = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, np.linspace(-1, 2, 31), lambda a: 0.0)
    rate = legendre_conjugate(gf, [-0.2, 0.0, 0.3])
    assert rate.values[1] == 0.0
    assert list(rate.states) == [Kind.NEG_INF, Kind.FINITE, Kind.NEG_INF]


def test_legendre_bernoulli_mean_and_peak():
    model = BernoulliModel(0.3, 0.7)
    e, _, sp = bernoulli_functionals(model, np.linspace(-1, 2, 401))
    assert sp == pytest.approx(BERNOULLI_SIGMA, abs=1e-15)
    rate = legendre_conjugate(e, [BERNOULLI_SIGMA])
    assert rate.values[0] == pytest.approx(0.0, abs=1e-10)
    assert rate.mean == pytest.approx(BERNOULLI_SIGMA, abs=1e-8)
    # A ten times finer grid reaches the same infimum.
    fine, _, _ = bernoulli_functionals(model, np.linspace(-1, 2, 4001))
    assert legendre_conjugate(fine, [0.1]).values[0] == pytest.approx(
        legendre_conjugate(e, [0.1]).values[0], abs=1e-10)


def test_legendre_fluctuation_relation_on_symmetric_functional():
    e, _, _ = bernoulli_functionals(BernoulliModel(0.3, 0.7), np.linspace(-1, 2, 301))
    s = np.linspace(-0.5, 0.5, 21)
    rate = legendre_conjugate(e, s)
    resid = rate.values - s - rate.values[::-1]
    assert np.max(np.abs(resid)) < 1e-9
    assert np.all(rate.values <= 1e-12)


def test_legendre_rejects_non_convex_and_empty():
    gf = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, np.linspace(0, 1, 11), lambda a: a * (1 - a))
    with pytest.raises(NonConvexInput):
        legendre_conjugate(gf, [0.0])
    empty = GeneratingFunction.from_values(FunctionalKind.ES_LIMIT, [0, 1, 2], [math.inf] * 3)
    with pytest.raises(EmptyDomain):
        legendre_conjugate(empty, [0.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_legendre_rate_is_nonpositive_with_zero_max(p, q):
    e, _, _ = bernoulli_functionals(BernoulliModel(p, q), np.linspace(-1, 2, 121))
    mean = -(bernoulli_e(BernoulliModel(p, q), 1e-6) - bernoulli_e(BernoulliModel(p, q), -1e-6)) / 2e-6
    rate = legendre_conjugate(e, np.linspace(mean - 0.2, mean + 0.2, 9))
    fin = rate.finite
    assert np.all(rate.values[fin] <= 1e-9)
    assert legendre_conjugate(e, [mean]).values[0] == pytest.approx(0.0, abs=1e-7)


# ---------------------------------------------------------------------------
# Symmetry audits


def test_check_symmetry_scalar_pass_and_fail():
    grid = np.linspace(-1, 2, 61)
    ok = check_symmetry(GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, grid, tent(2.0)), tol=1e-12)
    assert ok.passed and ok.max_residual < 1e-15
    bad = check_symmetry(GeneratingFunction.tabulate(FunctionalKind.GC_LIMIT, grid, lambda a: -2 * a))
    assert not bad.passed
    assert bad.max_residual == pytest.approx(np.max(np.abs(2 * (1 - 2 * grid))), abs=1e-12)


def test_check_symmetry_zero_function_and_vector_involution():
    zero = GeneratingFunction.from_values(FunctionalKind.ES_LIMIT, [0.0, 0.5, 1.0], [0.0, 0.0, 0.0])
    assert check_symmetry(zero).max_residual == 0.0
    X = np.array([0.4, -0.2])
    Ys = np.array([[0, 0], [0.4, -0.2], [0.1, 0.1], [0.3, -0.3], [0.2, -0.1]])
    f = GeneratingFunction.from_values(FunctionalKind.GES_LIMIT, Ys, [(y @ (X - y)) for y in Ys])
    assert check_symmetry(f, X, tol=1e-14).passed


def test_check_symmetry_grid_not_closed():
    f = GeneratingFunction.from_values(FunctionalKind.ES_LIMIT, [0.0, 0.2, 0.4], [0.0, -0.1, -0.15])
    with pytest.raises(GridNotSymmetric):
        check_symmetry(f)


# ---------------------------------------------------------------------------
# Perron roots and log-determinants


def test_perron_root_circulant():
    value, left, right = perron_root([[2, 1], [1, 2]])
    assert value == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(left, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(right, [0.5, 0.5], atol=1e-12)


def test_perron_root_rotor():
    P = rotor_chain().P
    value, left, _ = perron_root(P)
    assert value == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(left, np.full(3, 1 / 3), atol=1e-12)
    half = p_alpha(P, 0.5)
    assert perron_root(half)[0] == pytest.approx(ROTOR_P_HALF_ROOT, abs=1e-12)
    assert perron_root(half)[0] == pytest.approx(perron_root(half.T)[0], abs=1e-13)


def test_perron_root_rejects_zero_entries():
    with pytest.raises(NonPositiveEntry):
        perron_root(np.eye(3))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(0.05, 5.0)))
def test_perron_root_eigen_equations(A):
    value, left, right = perron_root(A)
    assert value == pytest.approx(np.max(np.abs(np.linalg.eigvals(A))), rel=1e-11)
    np.testing.assert_allclose(A @ right, value * right, rtol=1e-11)
    np.testing.assert_allclose(left @ A, value * left, rtol=1e-11)
    assert perron_root(A.T)[0] == pytest.approx(value, rel=1e-12)


def test_sym_logdet_examples():
    assert sym_logdet(np.eye(7)).value == 0.0
    assert sym_logdet(np.diag([2.0, 0.5])).value == pytest.approx(0.0, abs=1e-15)
    assert sym_logdet(np.diag([1.0, -1.0])).kind == Kind.NEG_INF
    with pytest.raises(Asymmetric):
        sym_logdet([[1.0, 0.5], [0.0, 1.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(float, (5, 5), elements=st.floats(-1, 1)))
def test_sym_logdet_inverse_cancels(B):
    A = B @ B.T + np.eye(5)
    Ainv = np.linalg.inv(A)
    Ainv = 0.5 * (Ainv + Ainv.T)
    assert sym_logdet(A).value + sym_logdet(Ainv).value == pytest.approx(0.0, abs=1e-9)
    assert sym_logdet(A).value == pytest.approx(np.linalg.slogdet(A)[1], abs=1e-10)


# ---------------------------------------------------------------------------
# Quadrature and finite differences


def test_adaptive_quad_finite_interval():
    assert adaptive_quad(lambda x: x, 0.0, 1.0, 1e-12) == pytest.approx(0.5, abs=1e-12)


def test_adaptive_quad_sech_cubed():
    def tail(lo, hi):      # (ch x)^-3 <= 8 e^{-3|x|}
        return 8 / 3 * (math.exp(3 * lo) + math.exp(-3 * hi))
    val = adaptive_quad(lambda x: 1 / math.cosh(x) ** 3, -math.inf, math.inf, 1e-12, tail=tail)
    assert val == pytest.approx(math.pi / 2, abs=1e-11)


def test_adaptive_quad_needs_tail_bound():
    with pytest.raises(TailBoundMissing):
        adaptive_quad(lambda x: math.exp(-x * x), -math.inf, math.inf)


def test_adaptive_quad_detects_bad_tail_bound():
    # A tail bound that lies (claims no mass) lets a heavy integrand through;
    # the window-doubling self-check catches the discrepancy.
    with pytest.raises(NoConvergence):
        adaptive_quad(lambda x: 1 / (1 + x * x), -math.inf, math.inf, 1e-8, tail=lambda lo, hi: 0.0)


def test_mixed_derivative_bilinear():
    sd = mixed_second_derivative(lambda X, Y: float(X @ Y), np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(sd.mixed, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(sd.yy, 0.0, atol=1e-10)


def test_mixed_derivative_stencil_outside_domain():
    def f(X, Y):
        return ExtReal.pos_inf() if Y[0] > 0 else ExtReal.finite(0.0)
    with pytest.raises(StencilOutsideDomain):
        mixed_second_derivative(f, np.zeros(1), np.zeros(1))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (2, 2), elements=st.floats(-2, 2)), arrays(float, (2, 2), elements=st.floats(-2, 2)))
def test_mixed_derivative_quadratic_forms_exact(A, B):
    B = B + B.T
    sd = mixed_second_derivative(lambda X, Y: float(Y @ A @ X + 0.5 * Y @ B @ Y), np.ones(2), -np.ones(2))
    np.testing.assert_allclose(sd.mixed, A, atol=1e-8)
    np.testing.assert_allclose(sd.yy, B, atol=1e-8)
