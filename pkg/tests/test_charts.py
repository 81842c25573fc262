import numpy as np
import pytest

from fermat_morse.charts import Atlas, ChartError, ChartPoint


def test_sphere_transition_is_an_involution():
    atlas = Atlas("sphere", 2)
    p = ChartPoint(0, [0.7, -1.9])
    q = atlas.transition(p, 1)
    assert q.chart_id == 1
    np.testing.assert_allclose(q.coords * (p.coords @ p.coords), p.coords)
    np.testing.assert_allclose(atlas.transition(q, 0).coords, p.coords, rtol=1e-15)


def test_transition_jacobian_matches_finite_differences():
    atlas = Atlas("sphere", 2)
    p = ChartPoint(0, [0.4, 1.3])
    J = atlas.transition_jacobian(p, 1)
    h = 1e-6
    fd = np.column_stack([
        (atlas.transition(ChartPoint(0, p.coords + h * e), 1).coords
         - atlas.transition(ChartPoint(0, p.coords - h * e), 1).coords) / (2 * h)
        for e in np.eye(2)
    ])
    np.testing.assert_allclose(J, fd, atol=1e-8)


def test_pole_is_outside_the_overlap():
    atlas = Atlas("sphere", 2)
    with pytest.raises(ChartError):
        atlas.transition(ChartPoint(0, [0.0, 0.0]), 1)
    with pytest.raises(ChartError):
        atlas.check(ChartPoint(0, [2e3, 0.0]))


def test_torus_displacement_reduces_modulo_lattice():
    atlas = Atlas("torus", 2, periods=(1.0, 2.0))
    a = ChartPoint(0, [0.1, 0.1])
    b = ChartPoint(0, [3.05, -3.8])
    np.testing.assert_allclose(atlas.displacement(a, b), [-0.05, 0.1], atol=1e-12)
    assert not atlas.contractible


def test_extension_coordinates_pass_through_transitions():
    atlas = Atlas("sphere", 3, n_extra=1)
    p = ChartPoint(0, [0.5, 0.5, 7.0])
    q = atlas.transition(p, 1)
    assert q.coords[2] == 7.0
    np.testing.assert_allclose(q.coords[:2], [1.0, 1.0])


@pytest.mark.parametrize("kind,dim", [("klein", 2), ("sphere", 3)])
def test_bad_atlases(kind, dim):
    with pytest.raises(ValueError):
        Atlas(kind, dim)


def test_preferred_chart_switches_far_points():
    atlas = Atlas("sphere", 2)
    far = atlas.preferred_chart(ChartPoint(0, [3.0, 0.0]))
    assert far.chart_id == 1
    near = atlas.preferred_chart(ChartPoint(0, [0.3, 0.0]))
    assert near.chart_id == 0
