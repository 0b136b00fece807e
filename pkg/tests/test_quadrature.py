import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from htype.quadrature import NODES, WG7, WK15, integrate, uniform_breakpoints


def test_rule_weights():
    assert WK15.sum() == pytest.approx(2.0, abs=1e-15)
    assert WG7.sum() == pytest.approx(2.0, abs=1e-15)
    # Kronrod is exact to degree 22, Gauss to degree 13
    for k in range(0, 23, 2):
        assert NODES**k @ WK15 == pytest.approx(2 / (k + 1), abs=1e-14)
    for k in range(0, 14, 2):
        assert NODES**k @ WG7 == pytest.approx(2 / (k + 1), abs=1e-14)


@pytest.mark.parametrize(
    "f,lo,hi",
    [
        (np.exp, 0.0, 3.0),
        (lambda x: np.cos(40 * x) * np.exp(-x), 0.0, 10.0),
        (lambda x: np.sqrt(x), 0.0, 1.0),
        (lambda x: 1 / (1 + 100 * x * x), -5.0, 5.0),
    ],
    ids=["exp", "oscillatory", "sqrt", "runge"],
)
def test_integrate_vs_scipy(f, lo, hi):
    ref = quad(lambda x: float(f(np.array([x]))[0]), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=500)[0]
    res = integrate(f, [lo, hi], rel_tol=1e-12)
    assert res.converged
    assert res.value == pytest.approx(ref, rel=1e-11)
    assert abs(res.value - ref) <= max(10 * res.abs_err, 1e-14)


def test_complex_integrand():
    res = integrate(lambda x: np.exp(1j * x), [0, math.pi], rel_tol=1e-13)
    assert res.value == pytest.approx(2j, abs=1e-13)


def test_fixed_mode_does_not_refine():
    res = integrate(lambda x: np.sqrt(x), [0, 0.5, 1], fixed=True)
    assert res.panels == 2


def test_panel_cap_reports_failure():
    res = integrate(lambda x: np.abs(x - 0.3) ** -0.9, [0, 1], rel_tol=1e-14, max_panels=20)
    assert not res.converged


@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(0.05, 3))
def test_uniform_breakpoints(lo, length, width):
    bp = uniform_breakpoints(lo, lo + length, width, extra=[lo + 0.5 * length])
    assert bp[0] == lo and bp[-1] == pytest.approx(lo + length)
    assert np.all(np.diff(bp) > 0)
    assert np.max(np.diff(bp)) <= width * (1 + 1e-12)


def test_polynomial_exact_on_one_panel():
    res = integrate(lambda x: x**9 - 3 * x**4, [-1, 2], fixed=True)
    assert res.value == pytest.approx((2**10 - 1) / 10 - 3 * (2**5 + 1) / 5, rel=1e-14)
