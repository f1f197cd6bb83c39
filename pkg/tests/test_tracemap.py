import random
from fractions import Fraction

import pytest
import sympy
from gmpy2 import mpfr
from hypothesis import given, settings, strategies as st

from gtmlab.errors import ConfigError, OracleCapExceeded
from gtmlab.precision import tolerance, working_context, working_precision
from gtmlab.tracemap import (
    ModelParams,
    TraceJet,
    initial_jet,
    matrix_oracle,
    step_jet,
    substitution_word,
    trace_eval,
    word_oracle,
)


def rel(a, b):
    return abs(a - b) / max(1, abs(a), abs(b))


def test_params_validation():
    assert ModelParams(2, "0.1").lam == Fraction(1, 10)
    for m, lam in [(0, 1), (1.5, 1), (2, 0), (2, "-1"), (2, "abc")]:
        with pytest.raises(ConfigError):
            ModelParams(m, lam)


def test_initial_jet_examples(ctx128):
    # traces of the literal products M_0 N_0 at these points
    jet = initial_jet(ModelParams(2, 1), 1)
    assert (jet.x, jet.y, jet.dx, jet.dy) == (0, -2, 1, 2)
    jet = initial_jet(ModelParams(3, "0.5"), 0)
    assert jet.x == mpfr("-0.5") and jet.y == mpfr("-2.25")
    M, N = matrix_oracle(ModelParams(3, "0.5"), 0, 0)
    assert (N @ M).trace == jet.y
    assert initial_jet(ModelParams(4, "0.3"), mpfr(3) / 10).x == 0


def test_step_jet_m2_closed_form(ctx128):
    p = ModelParams(2, 1)
    out = step_jet(p, TraceJet(mpfr(1), mpfr(0), mpfr(1), mpfr(0), 1))
    # x^2 (y-2) + 2 and (x^3 - 2x)^2 (y-2) + 2, with the chain rule by hand
    assert (out.x, out.y, out.dx, out.dy, out.level) == (0, 0, -4, 4, 2)


@pytest.mark.parametrize("m", [2, 3, 5])
def test_step_jet_at_chebyshev_zero(ctx128, m):
    import gmpy2

    p = ModelParams(m, "0.7")
    for j in range(1, m):
        x = 2 * gmpy2.cos(j * gmpy2.const_pi() / m)
        out = step_jet(p, TraceJet(x, mpfr("-1.3"), mpfr(2), mpfr(5), 3))
        assert abs(out.x - 2) <= tolerance(128)
        assert abs(out.dx) <= tolerance(128) * 100


def test_step_jet_fixed_y(ctx128):
    out = step_jet(ModelParams(3, 1), TraceJet(mpfr("0.4"), mpfr(2), mpfr(1), mpfr(0), 2))
    assert out.x == 2 and out.y == 2


def test_trace_eval_level0(ctx128):
    p = ModelParams(2, "0.1")
    assert trace_eval(p, 0, mpfr("0.5")) == initial_jet(p, mpfr("0.5"))


def test_words():
    assert substitution_word(ModelParams(2, 1), 1) == "aabb"
    assert substitution_word(ModelParams(2, 1), 2) == "aabbaabbbbaabbaa"
    assert substitution_word(ModelParams(5, 1), 0, "b") == "b"
    assert len(substitution_word(ModelParams(3, 1), 3)) == 216
    with pytest.raises(OracleCapExceeded):
        substitution_word(ModelParams(3, 1), 3, cap=100)
    with pytest.raises(ConfigError):
        substitution_word(ModelParams(3, 1), 1, seed="c")


def test_word_oracle_small(ctx128):
    p = ModelParams(2, 1)
    assert word_oracle(p, 0, mpfr("0.25")) == mpfr("0.25") - 1
    # N_0^2 M_0^2 at t=0 by four explicit products
    M, N = matrix_oracle(p, 0, 0)
    direct = (N @ N @ M @ M).trace
    assert word_oracle(p, 1, 0) == direct
    assert abs(trace_eval(p, 1, 0).x - direct) <= tolerance(128)
    assert abs(trace_eval(p, 1, 1).x - matrix_oracle(p, 1, 1)[0].trace) <= tolerance(128)


def test_matrix_oracle_example():
    p = ModelParams(2, "0.1")
    with working_context(working_precision(128, 2, 2)):
        M, N = matrix_oracle(p, 2, mpfr("0.5"), precision=128)
        assert rel(M.trace, trace_eval(p, 2, mpfr("0.5")).x) <= tolerance(128, 32)
        assert rel(M.trace, N.trace) <= tolerance(128, 32)
        assert M.det_defect() <= tolerance(128, 8)


@pytest.mark.parametrize("m,lam,n", [(3, "0.2", 2), (1, "1", 4), (2, "0.1", 3), (4, "2.5", 2)])
def test_three_way_oracle(m, lam, n):
    p = ModelParams(m, lam)
    rng = random.Random(7)
    with working_context(working_precision(128, m, n)):
        for _ in range(20):
            t = mpfr(rng.uniform(-3 - float(p.lam), 3 + float(p.lam)))
            x = trace_eval(p, n, t).x
            assert rel(x, word_oracle(p, n, t)) <= tolerance(128, 32)
            assert rel(x, matrix_oracle(p, n, t, precision=128)[0].trace) <= tolerance(128, 32)


def _symbolic_trace(m, lam, n):
    t = sympy.Symbol("t")
    M = sympy.Matrix([[t - lam, -1], [1, 0]])
    N = sympy.Matrix([[t + lam, -1], [1, 0]])
    for _ in range(n):
        Mm, Nm = (M ** m).expand(), (N ** m).expand()
        M, N = (Nm * Mm).expand(), (Mm * Nm).expand()
    return sympy.Poly(M.trace(), t), sympy.Poly(N.trace(), t)


@pytest.mark.parametrize("m,n", [(1, 1), (1, 3), (1, 6), (2, 1), (2, 3), (3, 2), (4, 2)])
def test_degree_growth_exact(m, n):
    lam = sympy.Rational(3, 10)
    px, py = _symbolic_trace(m, lam, n)
    assert px.degree() == (2 * m) ** n
    assert px.LC() == 1
    p = ModelParams(m, "0.3")
    with working_context(working_precision(128, m, n)):
        for num in range(-25, 26, 5):
            t = sympy.Rational(num, 10)
            exact = px.eval(t)
            got = trace_eval(p, n, mpfr(num) / 10).x
            assert rel(got, mpfr(sympy.Rational(exact).p) / sympy.Rational(exact).q) <= tolerance(128, 32)


def test_y_is_trace_of_mn():
    # y_n = Tr(M_n N_n); check against the symbolic product at level 1
    t = sympy.Symbol("t")
    lam = sympy.Rational(1, 2)
    M = sympy.Matrix([[t - lam, -1], [1, 0]])
    N = sympy.Matrix([[t + lam, -1], [1, 0]])
    M1, N1 = N ** 3 * M ** 3, M ** 3 * N ** 3
    py = sympy.Poly((M1 * N1).trace(), t)
    p = ModelParams(3, "0.5")
    with working_context(200):
        for num in (-2, -1, 0, 1, 3):
            v = py.eval(sympy.Rational(num, 3))
            got = trace_eval(p, 1, mpfr(num) / 3).y
            assert rel(got, mpfr(v.p) / v.q) <= tolerance(128, 32)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(-2.4, 2.4), m=st.integers(1, 4), n=st.integers(1, 3))
def test_derivatives_finite_difference(t, m, n):
    p = ModelParams(m, "0.4")
    with working_context(256):
        h = mpfr(2) ** -60
        t = mpfr(t)
        jet = trace_eval(p, n, t)
        up, dn = trace_eval(p, n, t + h), trace_eval(p, n, t - h)
        fdx = (up.x - dn.x) / (2 * h)
        fdy = (up.y - dn.y) / (2 * h)
        assert abs(fdx - jet.dx) <= 1e-20 * max(1, abs(jet.dx))
        assert abs(fdy - jet.dy) <= 1e-20 * max(1, abs(jet.dy))


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-3, 3), n=st.integers(1, 5))
def test_m2_identities(t, n):
    p = ModelParams(2, 1)
    with working_context(working_precision(128, 2, n + 2)):
        a, b, c = (trace_eval(p, k, mpfr(t)) for k in (n, n + 1, n + 2))
        lhs = b.y - 2
        rhs = (b.x - 2) * (a.x ** 2 - 2) ** 2
        assert abs(lhs - rhs) <= tolerance(128, 24) * max(1, abs(lhs), abs(rhs))
        rhs2 = b.x ** 2 * (b.x - 2) * (a.x ** 2 - 2) ** 2 + 2
        assert abs(c.x - rhs2) <= tolerance(128, 24) * max(1, abs(c.x), abs(rhs2))


def test_trace_m_equals_trace_n():
    p = ModelParams(3, "0.6")
    with working_context(working_precision(128, 3, 3)):
        for t in ("-1.9", "0.05", "2.2"):
            M, N = matrix_oracle(p, 3, mpfr(t), precision=128)
            assert rel(M.trace, N.trace) <= tolerance(128, 32)


def test_matrix_oracle_det_drift():
    from gtmlab.errors import PrecisionExhaustedError

    p = ModelParams(5, "1.0")
    with working_context(64):
        with pytest.raises(PrecisionExhaustedError):
            matrix_oracle(p, 3, mpfr("3.7"), det_slack=0)
