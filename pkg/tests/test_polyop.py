from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from htype.algebra import build_clifford, build_complex_heisenberg, build_heisenberg
from htype.polyop import (
    Polynomial,
    apply_l,
    apply_l_three_term,
    apply_xi,
    apply_xi_right,
    carre_du_champ,
    format_polynomial,
    grad_sq,
    heat_poly,
    heat_series,
    k2_closed_form,
    k2_maximize,
    k2_maximum_closed,
    k2_polynomials,
    k2_ratio,
    parse_polynomial,
)

H1 = build_heisenberg(1)
H2 = build_heisenberg(2)
CH = build_complex_heisenberg()


# ----------------------------------------------------------- sympy oracle


def _symbols(n, m):
    xs = sp.symbols(f"x1:{2 * n + 1}")
    zs = sp.symbols(f"z1:{m + 1}")
    return xs, zs


def _to_sympy(p: Polynomial):
    xs, zs = _symbols(p.n, p.m)
    vs = list(xs) + list(zs)
    expr = 0
    for e, c in p.terms().items():
        term = sp.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else sp.Float(c)
        for v, k in zip(vs, e):
            term *= v**k
        expr += term
    return sp.expand(expr)


def _sym_x(s, expr, i):
    """X_i = d/dx_i + 1/2 sum_j (J_j x)_i d/dz_j, written from the definition."""
    xs, zs = _symbols(s.n, s.m)
    out = sp.diff(expr, xs[i - 1])
    for j in range(s.m):
        Jx_i = sum(sp.nsimplify(s.J[j][i - 1][b]) * xs[b] for b in range(2 * s.n))
        out += sp.Rational(1, 2) * Jx_i * sp.diff(expr, zs[j])
    return sp.expand(out)


def _sym_l(s, expr):
    return sp.expand(sum(_sym_x(s, _sym_x(s, expr, i), i) for i in range(1, 2 * s.n + 1)))


exponents = st.lists(st.integers(0, 2), min_size=5, max_size=5)
monomial_terms = st.lists(st.tuples(exponents, st.integers(-3, 3)), min_size=1, max_size=4)


@given(monomial_terms)
def test_xi_matches_sympy(terms):
    p = Polynomial(2, 1, [(tuple(e), c) for e, c in terms])
    ref = _to_sympy(p)
    for i in range(1, 5):
        assert sp.expand(_to_sympy(apply_xi(H2, p, i)) - _sym_x(H2, ref, i)) == 0


@given(st.lists(st.tuples(st.lists(st.integers(0, 2), min_size=6, max_size=6), st.integers(-3, 3)), min_size=1, max_size=3))
def test_l_matches_sympy_complex_heisenberg(terms):
    p = Polynomial(2, 2, [(tuple(e), c) for e, c in terms])
    assert sp.expand(_to_sympy(apply_l(CH, p)) - _sym_l(CH, _to_sympy(p))) == 0


@given(monomial_terms)
def test_three_term_form_agrees(terms):
    p = Polynomial(2, 1, [(tuple(e), c) for e, c in terms])
    assert apply_l(H2, p) == apply_l_three_term(H2, p)


def test_xi_examples():
    z1 = parse_polynomial("z1", 1, 1)
    assert apply_xi(H1, z1, 1) == parse_polynomial("-1/2 x2", 1, 1)
    assert apply_xi(H1, z1, 2) == parse_polynomial("1/2 x1", 1, 1)
    assert apply_l(H1, parse_polynomial("z1^2", 1, 1)) == parse_polynomial("1/2 x1^2 + 1/2 x2^2", 1, 1)
    assert apply_l(H1, parse_polynomial("x1 + z1*x2", 1, 1)) == parse_polynomial("x1", 1, 1)
    with pytest.raises(IndexError):
        apply_xi(H1, z1, 3)


def test_right_invariant_fields_commute_with_left():
    p = parse_polynomial("x1^2*z1 + x2*z1^2 - 3*x1*x2", 1, 1)
    for i in (1, 2):
        for k in (1, 2):
            a = apply_xi(H1, apply_xi_right(H1, p, k), i)
            b = apply_xi_right(H1, apply_xi(H1, p, i), k)
            assert a == b


def test_heat_poly_examples():
    xsq = parse_polynomial("x1^2 + x2^2", 1, 1)
    assert heat_poly(H1, xsq, Fraction(1, 3)) == xsq + Polynomial.constant(1, 1, Fraction(4, 3))
    assert grad_sq(H1, parse_polynomial("z1", 1, 1)) == parse_polynomial("1/4 x1^2 + 1/4 x2^2", 1, 1)


@given(monomial_terms)
def test_heat_series_terminates_and_solves_heat_equation(terms):
    p = Polynomial(2, 1, [(tuple(e), c) for e, c in terms])
    series = heat_series(H2, p)
    assert len(series) <= p.weight // 2 + 1
    # d/dt P_t p = L P_t p, coefficientwise: (k+1) c_{k+1} = L c_k
    for k in range(len(series)):
        nxt = series[k + 1] * (k + 1) if k + 1 < len(series) else Polynomial.zero(2, 1)
        assert apply_l(H2, series[k]) == nxt


@given(monomial_terms, st.fractions(0, 3, max_denominator=7), st.fractions(0, 3, max_denominator=7))
def test_heat_semigroup_property(terms, t, u):
    p = Polynomial(2, 1, [(tuple(e), c) for e, c in terms])
    assert heat_poly(H2, heat_poly(H2, p, t), u) == heat_poly(H2, p, t + u)


@given(monomial_terms)
def test_carre_du_champ_route(terms):
    p = Polynomial(2, 1, [(tuple(e), c) for e, c in terms])
    assert grad_sq(H2, p) == carre_du_champ(H2, p)


def test_weights():
    p = parse_polynomial("x1*z1 + x2^3", 1, 1)
    assert p.weight == 3
    assert p.weights() == {3}
    assert parse_polynomial("z1^2", 1, 1).weight == 4


def test_parse_format_round_trip():
    p = parse_polynomial("3/2 x1^2*z1 - x2 + 7 - 2*z1", 1, 1)
    assert parse_polynomial(format_polynomial(p), 1, 1) == p
    with pytest.raises(ValueError):
        parse_polynomial("x3", 1, 1)
    with pytest.raises(ValueError):
        parse_polynomial("x1 +", 1, 1)


def test_float_structure_evaluation():
    s = build_clifford(3)
    p = Polynomial.for_structure(s, {(1, 0, 0, 0, 1, 0, 0): 1.0})
    q = apply_l(s, p * p)
    x = np.array([[0.3, -0.2, 0.5, 1.0]])
    z = np.array([[0.1, 0.2, -0.4]])
    assert np.isfinite(q.evaluate_many(x, z)).all()


# ----------------------------------------------------------- k2 ratio


@pytest.mark.parametrize("n", [1, 2, 3])
def test_k2_exact_rational(n):
    for t in [Fraction(0), Fraction(1, 7), Fraction(2, 3), Fraction(5, 2)]:
        r = k2_ratio(n, t)
        assert isinstance(r, Fraction)
        assert r == (1 + t) ** 2 / (1 - 2 * t + (3 * n + 2) * t**2)
        assert r == k2_closed_form(n, t)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_k2_polynomials(n):
    num, den = k2_polynomials(n)
    assert num == [1, 2, 1]
    assert den == [1, -2, 3 * n + 2]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_k2_maximum(n):
    t, v = k2_maximize(n)
    t_ref, v_ref = k2_maximum_closed(n)
    assert t_ref == Fraction(2, 3 * n + 3)
    assert abs(t - float(t_ref)) < 1e-8
    assert abs(v - float(v_ref)) < 1e-8
    assert k2_ratio(n, t_ref) == v_ref


def test_k2_n1_gives_sqrt2_constant():
    t, v = k2_maximize(1)
    assert abs(v - 2) < 1e-12
    assert abs(np.sqrt(v) - np.sqrt(2)) < 1e-12


# ----------------------------------------------------------- further examples


def P1(text):
    return parse_polynomial(text, 1, 1)


def test_small_examples():
    assert apply_xi(H1, P1("x1"), 1) == P1("1")
    assert apply_xi(H1, P1("7"), 2).is_zero()
    assert apply_l(H1, P1("x1^2")) == P1("2")
    assert heat_poly(H1, P1("x1"), Fraction(5, 2)) == P1("x1")
    assert grad_sq(H1, P1("x1")) == P1("1")
    f = P1("x1 + z1*x2")
    assert heat_poly(H1, f, Fraction(1, 10)) == f + P1("1/10 x1")
    assert k2_ratio(1, Fraction(0)) == 1
    assert k2_ratio(1, Fraction(1, 3)) == 2


def test_heat_poly_norm_squared():
    for n, s in [(1, H1), (2, H2)]:
        xsq = Polynomial(n, 1, [(tuple(2 if k == i else 0 for k in range(2 * n + 1)), 1) for i in range(2 * n)])
        t = Fraction(3, 7)
        assert heat_poly(s, xsq, t) == xsq + Polynomial.constant(n, 1, 4 * n * t)


homogeneous = st.lists(
    st.tuples(st.lists(st.integers(0, 4), min_size=5, max_size=5), st.integers(-3, 3).filter(bool)), min_size=1, max_size=3
)


@given(st.integers(1, 8), homogeneous)
def test_weight_grading(w, terms):
    # project random monomials onto weight w by keeping only matching exponents
    terms = [(tuple(e), c) for e, c in terms if sum(e[:4]) + 2 * e[4] == w]
    if not terms:
        terms = [((w, 0, 0, 0, 0), 1)]
    p = Polynomial(2, 1, terms)
    for i in range(1, 5):
        assert apply_xi(H2, p, i).weights() <= {w - 1}
    assert apply_l(H2, p).weights() <= {w - 2}
    q = p
    for _ in range(w // 2 + 1):
        q = apply_l(H2, q)
    assert q.is_zero()


def test_heat_poly_matches_monte_carlo():
    from htype.simulate import SimConfig, poly_expectation, simulate

    f = P1("x1 + z1*x2 + x1^2*z1")
    t = 0.1
    batch = simulate(SimConfig(H1, t=t, steps=100, n_paths=50_000, seed=13))
    exact = float(heat_poly(H1, f, Fraction(1, 10)).at_origin())
    mean, err = poly_expectation(batch, f)
    assert abs(mean - exact) <= 4 * err
