import numpy as np
import pytest

from fermat_morse.errors import DegenerateHypothesis
from fermat_morse.geodesic import integrate_geodesic
from fermat_morse.jacobi import (JacobiPropagator, alpha_to_fermat_parameter, conjugate_instants,
                                 detect_rank_drops, fermat_speed_conjugates, morse_index)
from fermat_morse.scenario import flat, flat_bump_drift, sphere

from suites import alpha_velocity


def round_geodesic(L, beta=1.0):
    sc = sphere(beta=beta)
    p = sc.point([0.3, 0.1])
    return integrate_geodesic(sc, p, alpha_velocity(sc, p, L, 0.7), tol=1e-11)


@pytest.mark.parametrize("k", [1.5, 2.5, 3.5])
def test_round_sphere_instants(k):
    g = round_geodesic(k * np.pi)
    rep = conjugate_instants(g)
    expected = [j / k for j in range(1, int(k) + 1)]
    np.testing.assert_allclose(rep.times, expected, atol=1e-8)
    assert rep.multiplicities == [1] * int(k)
    assert rep.mu == int(k) and not rep.endpoint_conjugate


def test_radius_scaling():
    # beta = 4 gives alpha-radius 1/2, so conjugate points come every pi/2
    g = round_geodesic(1.3 * np.pi / 2, beta=4.0)
    np.testing.assert_allclose(conjugate_instants(g).times, [1 / 1.3], atol=1e-8)


def test_flat_has_no_conjugate_points():
    sc = flat_bump_drift(A=0.1)
    g = integrate_geodesic(sc, sc.point([-3.0, 0.2]), np.array([6.0, 0.3]))
    assert conjugate_instants(g).instants == []
    sc = flat(delta=(0.4, 0.1))
    assert morse_index(integrate_geodesic(sc, sc.point([0, 0]), np.array([5.0, 1.0]))) == 0


def test_endpoint_conjugate_is_flagged_and_strict_raises():
    g = round_geodesic(2 * np.pi)
    rep = conjugate_instants(g)
    assert rep.endpoint_conjugate and rep.endpoint_multiplicity == 1
    assert rep.mu == 1
    with pytest.raises(DegenerateHypothesis):
        morse_index(g, strict=True)


def test_propagator_wronskian_is_conserved():
    sc = sphere(eps=0.1, beta_tilt=0.2)
    p = sc.point([0.3, 0.1])
    prop = JacobiPropagator(integrate_geodesic(sc, p, alpha_velocity(sc, p, 2.2 * np.pi, 0.3)))
    assert prop.constant_drift() < 1e-7


@pytest.mark.parametrize("eps,tilt,L", [(0.1, 0.0, 2.3), (0.05, 0.2, 1.7), (0.2, 0.0, 3.2)])
def test_constant_fermat_speed_cross_check(eps, tilt, L):
    """Conjugate points are parametrization independent: compare via the Fermat clock."""
    sc = sphere(eps=eps, beta_tilt=tilt)
    p = sc.point([0.3, 0.1])
    g = integrate_geodesic(sc, p, alpha_velocity(sc, p, L * np.pi, 0.5), tol=1e-11)
    rep = conjugate_instants(g)
    sig = fermat_speed_conjugates(g)
    assert len(sig) == rep.mu > 0
    np.testing.assert_allclose(alpha_to_fermat_parameter(g, rep.times), sig, atol=1e-6)


def test_detect_rank_drops_synthetic():
    roots = [0.2, 0.55]

    def matfun(ts):
        ts = np.asarray(ts)
        M = np.zeros((len(ts), 2, 2))
        M[:, 0, 0] = (ts - roots[0]) * (ts - roots[1])
        M[:, 1, 1] = 1.0 + ts
        return M, np.ones(len(ts)), np.zeros(0)

    inst, end, notes = detect_rank_drops(matfun)
    np.testing.assert_allclose([s for s, _ in inst], roots, atol=1e-12)
    assert end == 0 and notes == []


def test_detect_rank_drops_double_root_and_endpoint():
    def matfun(ts):
        ts = np.asarray(ts)
        M = np.zeros((len(ts), 2, 2))
        M[:, 0, 0] = (ts - 0.4) ** 2
        M[:, 1, 1] = 1.0 - ts
        return M, np.ones(len(ts)), np.zeros(0)

    inst, end, _ = detect_rank_drops(matfun)
    assert len(inst) == 1 and abs(inst[0][0] - 0.4) < 1e-3
    assert end == 1
