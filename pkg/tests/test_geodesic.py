import numpy as np
import pytest

from fermat_morse.charts import ChartPoint
from fermat_morse.geodesic import (CurveQuadrature, ShootingProblem, connect, integrate_geodesic,
                                   integration_tolerances, reparametrize_finsler_speed,
                                   seed_directions, seed_velocities, shoot)
from fermat_morse.randers import fermat_F
from fermat_morse.scenario import flat, flat_bump_drift, sphere, torus


def to_sphere(p: ChartPoint):
    """Embedding of the unit sphere; chart 0 maps the origin to the south pole."""
    x = p.coords
    r2 = float(x @ x)
    if p.chart_id == 0:
        return np.array([2 * x[0], 2 * x[1], r2 - 1]) / (1 + r2)
    return np.array([2 * x[0], 2 * x[1], 1 - r2]) / (1 + r2)


def test_flat_geodesics_are_straight_lines():
    sc = flat(delta=(0.3, -0.2), beta=2.0)
    g = integrate_geodesic(sc, sc.point([0.5, 1.0]), np.array([1.5, -0.7]))
    np.testing.assert_allclose(g.endpoint().coords, [2.0, 0.3], atol=1e-12)
    v = np.array([1.5, -0.7])
    assert g.fermat_length() == pytest.approx(fermat_F(sc, g.x0, v), rel=1e-12)
    assert g.speed_drift < 1e-12


def test_great_circle_oracle_across_charts():
    sc = sphere()
    p = sc.point([0.3, 0.1])
    v = np.array([3.0, 6.0])
    g = integrate_geodesic(sc, p, v, tol=1e-11)
    L = g.alpha_length()
    P0 = to_sphere(p)
    h = 1e-7
    T0 = (to_sphere(ChartPoint(0, p.coords + h * v)) - to_sphere(ChartPoint(0, p.coords - h * v))) / (2 * h)
    T0 /= np.linalg.norm(T0)
    expected = np.cos(L) * P0 + np.sin(L) * T0
    assert L > 2 * np.pi
    assert g.chart_switches, "a long great circle must change chart"
    np.testing.assert_allclose(to_sphere(g.endpoint()), expected, atol=1e-8)
    assert g.speed_drift < 1e-9
    assert g.fermat_length() == pytest.approx(L, rel=1e-10)


def test_sample_lands_on_the_solution():
    sc = sphere(eps=0.1)
    g = integrate_geodesic(sc, sc.point([0.3, 0.1]), np.array([1.0, 0.5]))
    X, V, C = g.sample(np.array([0.0, 0.37, 1.0]))
    np.testing.assert_allclose(X[-1], g.coords[-1], atol=1e-10)
    np.testing.assert_allclose(X[0], g.x0.coords)


def test_clock_inverse_round_trip():
    sc = flat_bump_drift()
    g = integrate_geodesic(sc, sc.point([-2.0, 0.3]), np.array([4.0, 0.0]))
    ck = g.clock()
    assert isinstance(ck, CurveQuadrature)
    s = np.array([0.1, 0.5, 0.93])
    np.testing.assert_allclose(ck.inverse(ck(s)), s, atol=1e-12)
    assert ck(np.array([1.0]))[0] == pytest.approx(ck.total, rel=1e-14)


def test_finsler_reparametrization_has_constant_F_speed():
    sc = sphere(eps=0.2)
    g = integrate_geodesic(sc, sc.point([0.3, 0.1]), np.array([1.0, 0.5]))
    f = reparametrize_finsler_speed(g)
    X, V, C = f.sample(np.linspace(0, 1, 21))
    speeds = [fermat_F(sc, ChartPoint(int(c), x), v) for x, v, c in zip(X, V, C)]
    np.testing.assert_allclose(speeds, g.fermat_length(), rtol=1e-8)


def test_shooting_jacobian_matches_finite_differences():
    sc = sphere(eps=0.1)
    p = sc.point([0.3, 0.1])
    v = np.array([0.8, 0.4])
    end, J, _ = shoot(sc, p, v)
    h = 1e-6
    cols = []
    for e in np.eye(2):
        a, _, _ = shoot(sc, p, v + h * e)
        b, _, _ = shoot(sc, p, v - h * e)
        cols.append((a.coords - b.coords) / (2 * h))
    np.testing.assert_allclose(J, np.column_stack(cols), rtol=1e-6, atol=1e-7)


def test_connect_flat_gives_one_geodesic():
    sc = flat(delta=(0.2, 0.1))
    p, q = sc.point([0.0, 0.0]), sc.point([1.0, 0.5])
    res = connect(sc, ShootingProblem(p, q, seed_velocities(sc, p, 4.0)))
    assert len(res) == 1
    np.testing.assert_allclose(res[0].v0, [1.0, 0.5], atol=1e-9)
    assert res.diagnostics["geodesics"] == 1


def test_connect_sphere_finds_short_and_long_arcs():
    sc = sphere()
    p, q = sc.point([0.3, 0.1]), sc.point([-0.2, 0.5])
    res = connect(sc, ShootingProblem(p, q, seed_velocities(sc, p, 1.5 * np.pi)))
    lengths = sorted(g.alpha_length() for g in res)
    assert len(lengths) == 2
    assert lengths[0] + lengths[1] == pytest.approx(2 * np.pi, abs=1e-8)


def test_connect_torus_reaches_lattice_translates():
    sc = torus()
    p, q = sc.point([0.1, 0.2]), sc.point([0.45, 0.55])
    res = connect(sc, ShootingProblem(p, q, seed_velocities(sc, p, 1.2)))
    ends = {tuple(np.round(g.endpoint().coords - q.coords).astype(int)) for g in res}
    assert (0, 0) in ends and len(ends) == len(res) >= 5


def test_input_validation():
    sc = flat()
    with pytest.raises(ValueError):
        integrate_geodesic(sc, sc.point([0, 0]), np.zeros(2))
    with pytest.raises(ValueError):
        integrate_geodesic(sc, sc.point([0, 0]), np.ones(2), tol=1e-2)
    with pytest.raises(ValueError):
        ShootingProblem(sc.point([0, 0]), sc.point([1, 0]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        connect(sc, ShootingProblem(sc.point([0, 0]), sc.point([0, 0]), np.ones((1, 2))))


def test_seed_grids_are_deterministic():
    a = seed_directions(3, 16, seed=4)
    b = seed_directions(3, 16, seed=4)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
    assert not np.allclose(seed_directions(2, 8, 0), seed_directions(2, 8, 1))
    assert integration_tolerances(1e-10) == pytest.approx((1e-11, 1e-12))
