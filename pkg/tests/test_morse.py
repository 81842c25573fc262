import numpy as np
import pytest

from fermat_morse.errors import DegenerateHypothesis
from fermat_morse.fields import ScenarioError
from fermat_morse.morse import (MorseSeries, PoincareProfile, check_morse_relations,
                                enumerate_geodesics, lensing_count, morse_report, morse_series,
                                profile_for, reliable_degree)
from fermat_morse.scenario import flat, lens, sphere, torus


@pytest.fixture(scope="module")
def sphere_enum():
    sc = sphere()
    return enumerate_geodesics(sc, sc.point([0.3, 0.1]), sc.point([-0.2, 0.5]), 4.5 * np.pi)


def test_flat_single_geodesic():
    sc = flat(delta=(0.2, 0.0))
    enum = enumerate_geodesics(sc, sc.point([0, 0]), sc.point([1.0, 0.5]), 10.0)
    assert len(enum) == 1 and enum.indices == [0]
    series = morse_series(enum)
    assert series.counts == {0: 1} and series.budget_complete
    rel = check_morse_relations(series, PoincareProfile.contractible())
    assert rel["valid"] and rel["Q_coeffs"] == [0]


def test_sphere_ladder(sphere_enum):
    lengths = [g.fermat_length() for g in sphere_enum.geodesics]
    d = lengths[0]
    np.testing.assert_allclose(lengths, [d, 2 * np.pi - d, 2 * np.pi + d, 4 * np.pi - d,
                                         4 * np.pi + d], atol=1e-8)
    assert sphere_enum.indices == [0, 1, 2, 3, 4]
    series = morse_series(sphere_enum)
    # an index-4 representative was found, but a second one could lie beyond 4.5 pi
    assert series.truncation_degree == 3 and series.partial
    rel = check_morse_relations(series, profile_for(sphere_enum.scenario))
    assert rel["valid"] and rel["Q_coeffs"] == [0, 0, 0]


def test_adversarial_series_violates_relations():
    series = MorseSeries({0: 1, 2: 1, 3: 1, 4: 1}, truncation_degree=4, L_max=4.5 * np.pi)
    rel = check_morse_relations(series, PoincareProfile.sphere_path_space(2))
    assert rel["Q_coeffs"][:2] == [0, -1]
    assert not rel["valid"]


def test_torus_classwise():
    sc = torus()
    enum = enumerate_geodesics(sc, sc.point([0.1, 0.2]), sc.point([0.45, 0.55]), 2.2)
    assert set(enum.indices) == {0}
    series = morse_series(enum)
    assert len(series.classes) == len(enum) >= 9
    assert all(cnt == {0: 1} for cnt in series.classes.values())
    rel = check_morse_relations(series, profile_for(sc))
    assert rel["valid"] and rel["Q_coeffs"] == [0]
    with pytest.raises(ValueError):
        check_morse_relations(MorseSeries({0: 3}, 1, 2.0), profile_for(sc))


def test_partial_series_when_budget_is_short():
    sc = sphere()
    rep = morse_report(sc, sc.point([0.3, 0.1]), sc.point([-0.2, 0.5]), 1.2 * np.pi)
    assert rep["counts"] == {"0": 1}
    assert rep["reliable_degree"] == 0 and rep["partial"] and not rep["budget_complete"]
    assert rep["Q_coeffs"] == [] and rep["valid"]


def test_reliable_degree_rules():
    assert reliable_degree(sphere(), 6.5 * np.pi) == 5
    assert reliable_degree(sphere(beta=4.0), 6.5 * np.pi / 2) == 5
    assert reliable_degree(flat(), 3.0) == 1
    assert reliable_degree(sphere(eps=0.1), 6.5 * np.pi) == -1


def test_antipodal_endpoints_are_degenerate():
    sc = sphere()
    with pytest.raises(DegenerateHypothesis):
        enumerate_geodesics(sc, sc.point([1.0, 0.0]), sc.point([-1.0, 0.0]), 1.5 * np.pi)


def test_lensing_flat_single_image():
    sc = flat()
    out = lensing_count(sc, sc.point([0, 0]), sc.point([3.0, 4.0]), 10.0, t0=1.0)
    assert out["count"] == 1 and out["parity"] == "odd"
    assert out["arrival_times"] == pytest.approx([6.0], rel=1e-12)
    sc = flat(delta=(0.2, 0.1))
    assert lensing_count(sc, sc.point([0, 0]), sc.point([1.0, -2.0]), 10.0)["count"] == 1


def test_lensing_multi_image_is_odd():
    sc = lens()
    out = lensing_count(sc, sc.point([-3.0, 0.1]), sc.point([3.0, 0.0]), 12.0)
    assert out["budget_complete"]
    assert out["count"] == 3 and out["parity"] == "odd"
    assert sorted(out["indices"]) == [0, 0, 1]
    assert out["max_causal_residual"] < 1e-8
    assert out["arrival_times"] == sorted(out["arrival_times"])


def test_lensing_refuses_non_contractible():
    sc = sphere()
    with pytest.raises(ScenarioError):
        lensing_count(sc, sc.point([0.3, 0.1]), sc.point([-0.2, 0.5]), 5.0)
