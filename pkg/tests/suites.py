"""Scenario and geodesic suites shared by the acceptance tests and the module tests."""

from __future__ import annotations

from dataclasses import replace
from functools import lru_cache

import numpy as np

from fermat_morse.geodesic import integrate_geodesic
from fermat_morse.randers import alpha_eta
from fermat_morse.scenario import flat, flat_bump_drift, lens, sphere

# (beta0, tilt) pairs for the sphere family; alpha-radius is 1 / sqrt(beta0) when untilted
SPHERE_BETAS = [(1.0, 0.0), (1.0, 0.2), (2.0, 0.0), (1.5, -0.3)]
SPHERE_EPS = [0.0, 0.05, 0.1, 0.2]
# alpha-lengths in units of pi * rho, chosen away from the round-sphere conjugate values
SPHERE_LENGTHS = [1.4, 2.6]


def alpha_velocity(scenario, p, length, angle):
    """Initial velocity of alpha-length ``length`` at ``p`` in direction ``angle``."""
    d = np.array([np.cos(angle), np.sin(angle)])
    al = alpha_eta(scenario, p).alpha
    return length * d / np.sqrt(d @ al @ d)


def _flat_cases():
    out = []
    specs = [
        ("bump-drift-swirl", flat_bump_drift(A=0.4, swirl=1.0)),
        ("bump-drift-radial", flat_bump_drift(A=0.6, swirl=0.0)),
        ("bump-drift-counter", flat_bump_drift(A=0.3, swirl=-1.5, beta=2.0)),
        ("lens-A1", lens(A=1.0)),
        ("lens-A2", lens(A=2.0)),
        ("lens-swirl", lens(A=2.0, swirl=(0.3, 1.0, 1.0))),
        ("flat-drift-beta", flat(delta=(0.2, -0.1), beta=1.7)),
    ]
    for name, sc in specs:
        sc = replace(sc, name=name)
        p = sc.point([-3.0, 0.1])
        for k, (length, angle) in enumerate([(6.5, -0.02), (5.0, 0.25)]):
            out.append((name, sc, p, alpha_velocity(sc, p, length, angle)))
    return out


@lru_cache(maxsize=None)
def index_suite():
    """``(label, scenario, geodesic)`` triples over 16 sphere and 7 flat scenarios."""
    cases = []
    for i, eps in enumerate(SPHERE_EPS):
        for j, (b0, tilt) in enumerate(SPHERE_BETAS):
            sc = sphere(eps=eps, beta=b0, beta_tilt=tilt, name=f"sphere-e{eps}-b{b0}-t{tilt}")
            rho = 1.0 / np.sqrt(b0)
            p = sc.point([0.3, 0.1])
            lengths = SPHERE_LENGTHS + ([3.4] if j == 0 else [])
            for k, L in enumerate(lengths):
                v = alpha_velocity(sc, p, L * np.pi * rho, 0.4 + 0.7 * i + 0.3 * j + 1.1 * k)
                cases.append((f"{sc.name}-L{L}", sc, p, v))
    cases += [(f"{name}-{k}", sc, p, v) for k, (name, sc, p, v) in enumerate(_flat_cases())]
    out = []
    for label, sc, p, v in cases:
        g = integrate_geodesic(sc, p, v)
        g.geodesic_id = len(out)
        out.append((label, sc, g))
    return tuple(out)


def suite_scenarios():
    return {sc.name for _, sc, _ in index_suite()}


@lru_cache(maxsize=None)
def timelike_cases():
    """Five ``(label, scenario, p0, q0, s_bar, L_max)`` cases."""
    out = []
    sc = flat()
    out.append(("flat-rest", sc, sc.point([0.0, 0.0]), sc.point([0.0, 0.0]), 1.0, None))
    sc = flat(delta=(0.3, 0.1))
    out.append(("flat-drift", sc, sc.point([0.0, 0.0]), sc.point([0.5, 0.2]), 1.0, None))
    sc = flat_bump_drift()
    out.append(("bump-drift", sc, sc.point([-2.0, 0.3]), sc.point([2.0, 0.0]), 2.0, None))
    sc = lens()
    out.append(("lens", sc, sc.point([-3.0, 0.1]), sc.point([3.0, 0.0]), 1.5, None))
    sc = sphere(eps=0.05, beta_tilt=0.2)
    out.append(("sphere-tilted", sc, sc.point([0.3, 0.1]), sc.point([-0.2, 0.5]), 2.0,
                3.5 * np.pi))
    return tuple(out)


@lru_cache(maxsize=None)
def appendix_cases():
    """Five ``(label, scenario, geodesic)`` cases for the second-variation identity."""
    specs = [
        ("sphere", sphere(), [0.3, 0.1], 1.3 * np.pi, 0.5),
        ("sphere-rotating", sphere(eps=0.1), [0.3, 0.1], 2.3 * np.pi, 1.0),
        ("sphere-tilted", sphere(eps=0.05, beta_tilt=0.2), [0.2, -0.1], 1.7 * np.pi, 2.0),
        ("bump-drift", flat_bump_drift(), [-2.0, 0.3], 4.0, 0.0),
        ("lens-swirl", lens(A=2.0, swirl=(0.3, 1.0, 1.0)), [-3.0, 0.1], 6.0, -0.05),
    ]
    out = []
    for label, sc, p, L, angle in specs:
        p = sc.point(p)
        out.append((label, sc, integrate_geodesic(sc, p, alpha_velocity(sc, p, L, angle))))
    return tuple(out)


# one "criterion N: PASS|FAIL ..." line per acceptance criterion, printed by conftest
ACCEPTANCE_LINES: dict = {}
