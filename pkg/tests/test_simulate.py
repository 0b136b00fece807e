import math

import numpy as np
import pytest

from htype.algebra import build_complex_heisenberg, build_heisenberg
from htype.polyop import heat_poly, parse_polynomial
from htype.simulate import (
    BLOCK,
    SimConfig,
    char_z,
    char_z_exact,
    kde_compare,
    mc_mean,
    poly_expectation,
    simulate,
    thread_count,
)

H1 = build_heisenberg(1)
H2 = build_heisenberg(2)


@pytest.fixture(scope="module")
def batch_h1():
    return simulate(SimConfig(H1, t=1.0, steps=200, n_paths=40_000, seed=11))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(H1, t=0)
    with pytest.raises(ValueError):
        SimConfig(H1, steps=0)
    with pytest.raises(ValueError):
        SimConfig(H1, n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(H1, seed=-1)


def test_shapes_and_access(batch_h1):
    assert batch_h1.x.shape == (40_000, 2)
    assert batch_h1.z.shape == (40_000, 1)
    assert len(batch_h1) == 40_000
    g = batch_h1[3]
    np.testing.assert_array_equal(g.x, batch_h1.x[3])
    r, s = batch_h1.radial()
    assert r.shape == s.shape == (40_000,)


def test_seed_determinism():
    cfg = SimConfig(H2, t=0.5, steps=30, n_paths=BLOCK + 100, seed=3)
    a, b = simulate(cfg), simulate(cfg)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.z, b.z)
    c = simulate(SimConfig(H2, t=0.5, steps=30, n_paths=BLOCK + 100, seed=4))
    assert not np.array_equal(a.x, c.x)


def test_thread_schedule_does_not_change_output(monkeypatch):
    cfg = SimConfig(H1, t=1.0, steps=20, n_paths=3 * BLOCK + 7, seed=9)
    monkeypatch.setenv("HTYPE_THREADS", "1")
    assert thread_count() == 1
    a = simulate(cfg)
    monkeypatch.setenv("HTYPE_THREADS", "3")
    b = simulate(cfg)
    np.testing.assert_array_equal(a.z, b.z)


def test_prefix_stability():
    # block b uses its own stream, so a longer run extends a shorter one
    a = simulate(SimConfig(H1, 1.0, 10, BLOCK, 5))
    b = simulate(SimConfig(H1, 1.0, 10, 2 * BLOCK, 5))
    np.testing.assert_array_equal(a.x, b.x[:BLOCK])


def test_moments(batch_h1):
    n, t = 1, 1.0
    for k in range(2):
        mean, err = mc_mean(batch_h1.x[:, k])
        assert abs(mean) <= 4 * err
    mean, err = mc_mean(np.sum(batch_h1.x**2, axis=1))
    assert abs(mean - 4 * n * t) <= 4 * err
    mean, err = mc_mean(batch_h1.z[:, 0] ** 2)
    assert abs(mean - n * t * t) <= 4 * err


def test_characteristic_function(batch_h1):
    for lam in (0.5, 1.0, 2.0):
        val, err = char_z(batch_h1, [lam], with_error=True)
        assert abs(val - char_z_exact(1, 1.0, [lam])) <= 4 * err


def test_characteristic_function_complex_heisenberg():
    s = build_complex_heisenberg()
    b = simulate(SimConfig(s, t=0.7, steps=100, n_paths=20_000, seed=2))
    lam = np.array([0.6, -0.8])
    val, err = char_z(b, lam, with_error=True)
    assert abs(val - char_z_exact(2, 0.7, lam)) <= 4 * err


def test_polynomial_expectations(batch_h1):
    for expr in ["x1^2", "z1^2", "x1^2*x2^2", "x1^4 + 2*z1*x1*x2"]:
        p = parse_polynomial(expr, 1, 1)
        exact = float(heat_poly(H1, p, 1).at_origin())
        mean, err = poly_expectation(batch_h1, p)
        assert abs(mean - exact) <= 4 * err + 0.02 * abs(exact), expr


def test_weak_order():
    # bias of the characteristic function shrinks about linearly in dt
    lam = 1.5
    exact = char_z_exact(1, 1.0, [lam])
    steps = [1, 2, 4, 8]
    bias = []
    for k in steps:
        b = simulate(SimConfig(H1, 1.0, k, 200_000, seed=21))
        bias.append(abs(char_z(b, [lam]).real - exact))
    slope = -np.polyfit(np.log(steps), np.log(bias), 1)[0]
    assert slope >= 0.8


def test_kde_is_reported_as_diagnostic(batch_h1):
    rep = kde_compare(batch_h1, H1, [(0.0, 0.0), (1.0, 0.5)], bandwidth=0.25)
    assert rep.n_points == 2
    assert 0.5 < rep.min_ratio <= rep.max_ratio < 1.5
    assert "max_z_score" in rep.extra
    with pytest.raises(ValueError):
        kde_compare(batch_h1, H1, [(0.0, 0.0)], bandwidth=0)
    with pytest.raises(ValueError):
        kde_compare(batch_h1, build_complex_heisenberg(), [(0.0, 0.0)], bandwidth=0.3)


def test_char_z_exact_values():
    assert char_z_exact(2, 1.0, [0.0, 0.0]) == 1.0
    assert char_z_exact(1, 2.0, [0.5]) == pytest.approx(1 / math.cosh(1.0))


def test_midpoint_rule_coincides_with_left_point(rng):
    from htype.algebra import bracket

    s = build_complex_heisenberg()
    x = rng.normal(size=(500, 4))
    dx = rng.normal(size=(500, 4))
    left = 0.5 * bracket(s, x, dx)
    mid = 0.5 * bracket(s, x + 0.5 * dx, dx)
    np.testing.assert_allclose(left, mid, atol=1e-14)
    np.testing.assert_allclose(bracket(s, dx, dx), 0.0, atol=1e-14)


def test_char_fn_at_zero_is_one(batch_h1):
    assert char_z(batch_h1, [0.0]) == 1.0


def test_dilated_samples_match_unit_time():
    b = simulate(SimConfig(H1, t=4.0, steps=200, n_paths=40_000, seed=8))
    z = b.z / 4.0  # dilation by 1/sqrt(t) scales z by 1/t
    for lam in (0.5, 1.5):
        vals = np.exp(1j * lam * z[:, 0])
        mean, err = mc_mean(vals)
        assert abs(mean - char_z_exact(1, 1.0, [lam])) <= 4 * err
    mean, err = mc_mean(np.sum((b.x / 2.0) ** 2, axis=1))
    assert abs(mean - 4.0) <= 4 * err
