import numpy as np
import pytest

from fermat_morse.charts import ChartPoint
from fermat_morse.randers import (F2_derivatives, alpha_eta, covariant_eta, fermat_F,
                                  fermat_F_g0tilde, fermat_F_minus, fundamental_tensor,
                                  omega_tensor)
from fermat_morse.scenario import flat, flat_bump_drift, lens, sphere

SCENARIOS = [flat(delta=(0.3, -0.2), beta=2.0), sphere(eps=0.2, beta_tilt=0.2),
             flat_bump_drift(), lens(A=2.0, swirl=(0.3, 1.0, 1.0))]


def test_flat_closed_form():
    sc = flat(delta=(0.3, 0.0), beta=2.0)
    x = sc.point([0.0, 0.0])
    # g0~ = I/2, omega = g0~ delta = (0.15, 0), alpha = I/2 + omega omega^T
    y = np.array([1.0, 0.0])
    expected = np.sqrt(0.5 + 0.15**2) + 0.15
    assert fermat_F(sc, x, y) == pytest.approx(expected, rel=1e-15)
    d = alpha_eta(sc, x)
    # alpha eta = omega gives eta = delta / (1 + g0~[delta, delta])
    np.testing.assert_allclose(d.eta, [0.3 / 1.045, 0.0], rtol=1e-15)


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_presentations_agree(sc):
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = sc.point(rng.uniform(-1.2, 1.2, 2))
        y = rng.standard_normal(2)
        assert fermat_F(sc, x, y) == pytest.approx(fermat_F_g0tilde(sc, x, y), rel=1e-12)


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_strong_convexity_bound(sc):
    rng = np.random.default_rng(4)
    for _ in range(50):
        d = alpha_eta(sc, sc.point(rng.uniform(-1.5, 1.5, 2)))
        assert d.eta_norm2 < 1.0


def test_reverse_metric_and_fundamental_tensor():
    sc = sphere(eps=0.2)
    x = sc.point([0.5, -0.3])
    y = np.array([0.4, 1.1])
    assert fermat_F_minus(sc, x, y) == pytest.approx(fermat_F(sc, x, -y), rel=1e-14)
    g = fundamental_tensor(sc, x, y).matrix
    # Hessian of F^2 / 2 by finite differences
    h = 1e-4
    fd = np.zeros((2, 2))
    for i, ei in enumerate(np.eye(2)):
        for j, ej in enumerate(np.eye(2)):
            f = lambda a, b: 0.5 * fermat_F(sc, x, y + a * ei + b * ej) ** 2  # noqa: E731
            fd[i, j] = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    np.testing.assert_allclose(g, fd, atol=1e-7)
    with pytest.raises(ValueError):
        fundamental_tensor(sc, x, np.zeros(2))


def test_F2_derivatives_against_finite_differences():
    rng = np.random.default_rng(5)
    n = 2
    A = rng.standard_normal((n, n))
    x0 = rng.standard_normal(n)
    y0 = rng.standard_normal(n)

    def coeffs(x):
        al = np.eye(n) * (2 + np.sin(x[0])) + 0.3 * np.outer(np.cos(x), np.cos(x))
        om = 0.2 * np.tanh(A @ x)
        return al, om

    def jets(x, h=1e-4):
        al, om = coeffs(x)
        dal = np.array([(coeffs(x + h * e)[0] - coeffs(x - h * e)[0]) / (2 * h) for e in np.eye(n)])
        dom = np.array([(coeffs(x + h * e)[1] - coeffs(x - h * e)[1]) / (2 * h) for e in np.eye(n)])
        ddal = np.array([[(coeffs(x + h * a + h * b)[0] - coeffs(x + h * a - h * b)[0]
                           - coeffs(x - h * a + h * b)[0] + coeffs(x - h * a - h * b)[0])
                          / (4 * h * h) for b in np.eye(n)] for a in np.eye(n)])
        ddom = np.array([[(coeffs(x + h * a + h * b)[1] - coeffs(x + h * a - h * b)[1]
                           - coeffs(x - h * a + h * b)[1] + coeffs(x - h * a - h * b)[1])
                          / (4 * h * h) for b in np.eye(n)] for a in np.eye(n)])
        return al, dal, ddal, om, dom, ddom

    def F2(x, y):
        al, om = coeffs(x)
        return (np.sqrt(y @ al @ y) + om @ y) ** 2

    out = F2_derivatives(*jets(x0), y0)
    h = 1e-5
    E = np.eye(n)
    fx = [(F2(x0 + h * e, y0) - F2(x0 - h * e, y0)) / (2 * h) for e in E]
    fy = [(F2(x0, y0 + h * e) - F2(x0, y0 - h * e)) / (2 * h) for e in E]
    np.testing.assert_allclose(out[0], F2(x0, y0), rtol=1e-14)
    np.testing.assert_allclose(out[1], fx, rtol=1e-6)
    np.testing.assert_allclose(out[2], fy, rtol=1e-6)
    h = 1e-4
    fxy = [[(F2(x0 + h * a, y0 + h * b) - F2(x0 + h * a, y0 - h * b)
             - F2(x0 - h * a, y0 + h * b) + F2(x0 - h * a, y0 - h * b)) / (4 * h * h)
            for b in E] for a in E]
    np.testing.assert_allclose(out[4], fxy, rtol=1e-5, atol=1e-6)


def test_omega_tensor_vanishes_for_constant_drift_and_is_skew():
    sc = flat(delta=(0.3, 0.1))
    np.testing.assert_allclose(omega_tensor(sc, sc.point([0.2, 0.4])), 0.0, atol=1e-14)
    sc = sphere(eps=0.2)
    x = sc.point([0.3, -0.4])
    Om = omega_tensor(sc, x)
    al = alpha_eta(sc, x).alpha
    # alpha-skew: alpha Om is antisymmetric
    np.testing.assert_allclose(al @ Om, -(al @ Om).T, atol=1e-12)
    assert np.abs(Om).max() > 1e-3
    assert covariant_eta(sc, x).shape == (2, 2)


def test_points_outside_the_chart_are_refused():
    sc = sphere()
    with pytest.raises(ValueError):
        fermat_F(sc, ChartPoint(0, [5e3, 0.0]), [1.0, 0.0])
