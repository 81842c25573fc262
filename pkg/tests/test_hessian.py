import numpy as np
import pytest
from scipy.linalg import eigh

from fermat_morse.geodesic import integrate_geodesic
from fermat_morse.hessian import (H1Basis, LocalizedLagrangian, discrete_index, gradient_residual,
                                  h1_gram, hessian_report, operator_K_columns,
                                  second_variation_matrix)
from fermat_morse.jacobi import morse_index
from fermat_morse.scenario import flat, lens, sphere

from suites import alpha_velocity


def sphere_geodesic(L, eps=0.0, tilt=0.0, angle=0.6):
    sc = sphere(eps=eps, beta_tilt=tilt)
    p = sc.point([0.3, 0.1])
    return integrate_geodesic(sc, p, alpha_velocity(sc, p, L * np.pi, angle), tol=1e-11)


def antipodal():
    sc = sphere()
    return integrate_geodesic(sc, sc.point([1.0, 0.0]), np.array([0.0, np.pi]), tol=1e-11)


def test_basis_shapes_and_evaluation():
    b = H1Basis(4, 2)
    assert b.size == 8 and b.h == pytest.approx(0.2)
    c = np.zeros(8)
    c[2:4] = [1.0, -1.0]          # node 2 at s = 0.4
    val, der = b.evaluate(c, np.array([0.4, 0.3, 0.0]))
    np.testing.assert_allclose(val, [[1, -1], [0.5, -0.5], [0, 0]])
    np.testing.assert_allclose(der[1], [5.0, -5.0])
    assert b.refined().m == 9
    with pytest.raises(ValueError):
        H1Basis(0, 2)


def test_flat_index_zero():
    sc = flat(delta=(0.2, 0.1))
    g = integrate_geodesic(sc, sc.point([0, 0]), np.array([3.0, 1.0]))
    res = discrete_index(LocalizedLagrangian(g), H1Basis(50, 2))
    assert res.index == 0 and res.kernel_dim == 0
    assert res.eigenvalues[0] > 0.1


def test_round_sphere_spectrum():
    """On the round sphere the normal pencil eigenvalues are 1 - L^2 / (k pi)^2."""
    L = 2.6
    g = sphere_geodesic(L)
    res = discrete_index(LocalizedLagrangian(g), H1Basis(200, 2))
    assert res.index == 2 == morse_index(g)
    expected = sorted(1 - (L / k) ** 2 for k in (1, 2, 3))
    # hat elements converge like h^2 on the raw spectrum
    np.testing.assert_allclose(res.eigenvalues[:3], expected, atol=5e-4)


@pytest.mark.parametrize("L,eps,tilt", [(1.4, 0.1, 0.0), (2.6, 0.2, 0.0), (3.4, 0.05, 0.2)])
def test_index_matches_conjugate_count(L, eps, tilt):
    g = sphere_geodesic(L, eps, tilt)
    rec = hessian_report(g, m=150)
    assert rec["index"] == morse_index(g)
    assert rec["kernel_dim"] == 0
    assert rec["gradient_residual"] < 1e-5


def test_tubes_agree_on_index():
    g = sphere_geodesic(2.6, eps=0.1)
    idx = {tube: discrete_index(LocalizedLagrangian(g, tube=tube), H1Basis(120, 2)).index
           for tube in ("normal", "parallel", "affine")}
    assert set(idx.values()) == {2}
    with pytest.raises(ValueError):
        LocalizedLagrangian(g, tube="helical")


def test_antipodal_kernel_is_the_sine_field():
    g = antipodal()
    lagr = LocalizedLagrangian(g)
    basis = H1Basis(400, 2)
    res = discrete_index(lagr, basis)
    assert res.kernel_dim == 1 and res.index == 0
    scale = np.max(np.abs(res.eigenvalues))
    assert abs(res.eigenvalues[0]) < 1e-6 * scale
    w, V = eigh(second_variation_matrix(lagr, basis), h1_gram(lagr, basis))
    v = V[:, 0].reshape(basis.m, 2)
    u = v[:, np.argmax(np.abs(v).max(axis=0))]
    s = np.arange(1, basis.m + 1) * basis.h
    f = np.sin(np.pi * s)
    assert abs(u @ f) / (np.linalg.norm(u) * np.linalg.norm(f)) > 1 - 1e-8


def test_energy_second_derivative_matches_matrix():
    g = sphere_geodesic(1.7, eps=0.1, tilt=0.2)
    lagr = LocalizedLagrangian(g)
    basis = H1Basis(40, 2)
    B = second_variation_matrix(lagr, basis)
    c = np.random.default_rng(2).standard_normal(basis.size) * 0.05
    h = 1e-3
    e = [lagr.energy(basis, coeffs=k * h * c) for k in (-1, 0, 1)]
    fd = (e[0] - 2 * e[1] + e[2]) / h**2
    assert fd == pytest.approx(c @ B @ c, rel=1e-5)


def test_center_curve_is_critical():
    g = sphere_geodesic(2.3, eps=0.2)
    lagr = LocalizedLagrangian(g)
    basis = H1Basis(100, 2)
    assert gradient_residual(lagr, basis) < 1e-6
    bump = lambda s: (0.05 * np.outer(np.sin(np.pi * s), [1.0, 0.5]),  # noqa: E731
                      0.05 * np.pi * np.outer(np.cos(np.pi * s), [1.0, 0.5]))
    assert gradient_residual(lagr, basis, offset=bump) > 1e-3


def test_K_operator_consistency_and_regularity():
    g = sphere_geodesic(2.3, eps=0.1)
    lagr = LocalizedLagrangian(g)
    jumps = []
    for m in (40, 80):
        basis = H1Basis(m, 2)
        K = operator_K_columns(lagr, basis)
        B, G = second_variation_matrix(lagr, basis), h1_gram(lagr, basis)
        assert K.consistency(B, G) < 1e-10
        jumps.append(np.max(K.derivative_jumps()))
    # K xi is C^1 in the limit: the derivative jumps shrink with the mesh
    assert jumps[1] < 0.6 * jumps[0]


def test_flat_lens_index():
    sc = lens(A=2.0)
    p = sc.point([-3.0, 0.1])
    g = integrate_geodesic(sc, p, alpha_velocity(sc, p, 6.5, -0.02))
    assert hessian_report(g, m=150)["index"] == morse_index(g)
