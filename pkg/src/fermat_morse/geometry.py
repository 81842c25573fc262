"""Pointwise geometry of the auxiliary Riemannian metric alpha."""

from __future__ import annotations

import numpy as np

from . import kernel
from .charts import ChartPoint
from .fields import ScenarioError
from .scenario import StationaryScenario


def program_args(scenario: StationaryScenario):
    pr = scenario.program
    return pr.iprog, pr.g0p, pr.dp, pr.bp


def _checked(scenario: StationaryScenario, x: ChartPoint) -> ChartPoint:
    if not isinstance(x, ChartPoint):
        x = ChartPoint(0, x)
    return scenario.atlas.check(x)


def eval_g0tilde(scenario: StationaryScenario, x: ChartPoint) -> np.ndarray:
    """The conformal metric ``g0 / beta`` at ``x``."""
    x = _checked(scenario, x)
    G, *_rest = kernel.field_jets(*program_args(scenario), x.chart_id, x.coords)
    b = _rest[5]
    if not b > 0:
        raise ScenarioError(f"beta = {b} is not positive at {x!r}")
    return G / b


def local(scenario: StationaryScenario, x: ChartPoint) -> dict:
    """All connection data of alpha at ``x`` (see :func:`kernel.local_geometry`)."""
    x = _checked(scenario, x)
    return kernel.local_geometry(*program_args(scenario), x.chart_id, x.coords)


def christoffel_alpha(scenario: StationaryScenario, x: ChartPoint) -> np.ndarray:
    """Christoffel symbols ``Gamma[k, i, j]`` of alpha."""
    return local(scenario, x)["gamma"]


def curvature_alpha(scenario: StationaryScenario, x: ChartPoint) -> np.ndarray:
    """Riemann tensor ``R[l, k, i, j]`` of alpha.

    Convention: ``R(u, v) w = R[l, k, i, j] w^k u^i v^j``, so that the Jacobi
    term ``R(J, v) v`` reads ``R[l, k, i, j] v^k J^i v^j``.
    """
    return local(scenario, x)["riemann"]


def riemann_apply(R: np.ndarray, u, v, w) -> np.ndarray:
    return np.einsum("lkij,k,i,j->l", R, w, u, v)


def sectional_curvature(scenario: StationaryScenario, x: ChartPoint, u, v) -> float:
    geo = local(scenario, x)
    al = geo["alpha"]
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    num = float(riemann_apply(geo["riemann"], u, v, v) @ al @ u)
    den = float((u @ al @ u) * (v @ al @ v) - (u @ al @ v) ** 2)
    return num / den


def transition(scenario: StationaryScenario, point: ChartPoint, target_chart: int) -> ChartPoint:
    return scenario.atlas.transition(point, target_chart)


def fields_along(scenario: StationaryScenario, charts, X):
    """``(g0, delta, beta)`` sampled at the rows of ``X`` (no derivatives)."""
    args = program_args(scenario)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    G = np.empty((len(X), n, n))
    D = np.empty((len(X), n))
    b = np.empty(len(X))
    for k, (c, x) in enumerate(zip(np.broadcast_to(charts, (len(X),)), X)):
        jets = kernel.field_jets(*args, int(c), x)
        G[k], D[k], b[k] = jets[0], jets[3], jets[6]
    return G, D, b


def levi_civita(g, dg, ddg):
    """Christoffel symbols of a (possibly indefinite) metric and their derivatives.

    ``dg[l, i, j]`` and ``ddg[l, m, i, j]`` are coordinate partials of
    ``g[i, j]``.  Returns ``(gamma, dgamma)`` with ``dgamma[m, k, i, j]`` the
    partial of ``gamma[k, i, j]`` along ``x^m``.
    """
    ginv = np.linalg.inv(g)
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    gam = np.einsum("kl,lij->kij", ginv, low)
    dlow = 0.5 * (np.einsum("milj->mlij", ddg) + np.einsum("mjli->mlij", ddg) - ddg)
    dgam = np.einsum("kl,mlij->mkij", ginv, dlow - np.einsum("mlp,pij->mlij", dg, gam))
    return gam, dgam
