"""Fermat (Randers) data of a stationary scenario.

The Fermat metric is ``F(x, v) = sqrt(alpha[v, v]) + alpha[v, eta]`` with

    alpha = g0t + (g0t delta)(g0t delta)^T,   alpha eta = g0t delta,

where ``g0t = g0 / beta``.  The equivalent presentation
``F = sqrt(g0t[v, v] + g0t[delta, v]^2) + g0t[delta, v]`` is available as
:func:`fermat_F_g0tilde` and is used as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .charts import ChartPoint
from .geometry import _checked, eval_g0tilde, local, program_args
from .scenario import StationaryScenario


@dataclass(frozen=True)
class RandersPointData:
    alpha: np.ndarray
    eta: np.ndarray
    omega_form: np.ndarray
    at: ChartPoint

    @property
    def eta_norm2(self) -> float:
        return float(self.eta @ self.alpha @ self.eta)


@dataclass(frozen=True)
class FundamentalTensor:
    matrix: np.ndarray
    base: ChartPoint
    direction: np.ndarray


def alpha_eta(scenario: StationaryScenario, x: ChartPoint) -> RandersPointData:
    x = _checked(scenario, x)
    al, _, _, om, _, _ = kernel.metric_jet(*program_args(scenario), x.chart_id, x.coords)
    eta = np.linalg.solve(al, om)
    return RandersPointData(al, eta, om, x)


def _F(al, om, y) -> float:
    a2 = float(y @ al @ y)
    return float(np.sqrt(max(a2, 0.0)) + om @ y)


def fermat_F(scenario: StationaryScenario, x: ChartPoint, y) -> float:
    d = alpha_eta(scenario, x)
    return _F(d.alpha, d.omega_form, np.asarray(y, dtype=float))


def fermat_F_minus(scenario: StationaryScenario, x: ChartPoint, y) -> float:
    """The reverse Fermat metric ``F_-(x, y) = F(x, -y)``."""
    d = alpha_eta(scenario, x)
    y = np.asarray(y, dtype=float)
    return float(np.sqrt(max(float(y @ d.alpha @ y), 0.0)) - d.omega_form @ y)


def fermat_F_g0tilde(scenario: StationaryScenario, x: ChartPoint, y) -> float:
    x = _checked(scenario, x)
    gt = eval_g0tilde(scenario, x)
    D = kernel.field_jets(*program_args(scenario), x.chart_id, x.coords)[3]
    y = np.asarray(y, dtype=float)
    lin = float(D @ gt @ y)
    return float(np.sqrt(y @ gt @ y + lin * lin) + lin)


def randers_g(al: np.ndarray, om: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fundamental tensor of ``sqrt(al[y,y]) + om(y)`` in closed form."""
    a = float(np.sqrt(y @ al @ y))
    yl = al @ y
    F = a + float(om @ y)
    ell = yl / a
    return (F / a) * (al - np.outer(yl, yl) / a**2) + np.outer(om + ell, om + ell)


def fundamental_tensor(scenario: StationaryScenario, x: ChartPoint, y) -> FundamentalTensor:
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("the fundamental tensor is undefined on the zero section")
    d = alpha_eta(scenario, x)
    return FundamentalTensor(randers_g(d.alpha, d.omega_form, y), d.at, y.copy())


def omega_tensor(scenario: StationaryScenario, x: ChartPoint) -> np.ndarray:
    """The alpha-skew (1,1) tensor ``Omega = nabla eta - (nabla eta)^*``."""
    return local(scenario, x)["big_omega"]


def covariant_eta(scenario: StationaryScenario, x: ChartPoint) -> np.ndarray:
    """``(nabla eta)[k, l] = (nabla_{e_l} eta)^k``."""
    geo = local(scenario, x)
    return geo["deta"].T + np.einsum("klq,q->kl", geo["gamma"], geo["eta"])


def F2_derivatives(al, dal, ddal, om, dom, ddom, y):
    """Value and first and second partials of ``F^2`` in ``(x, y)``.

    Returns ``(F2, F2_x, F2_y, F2_xx, F2_xy, F2_yy)`` with ``F2_xy[l, i]``
    the mixed derivative in ``x^l`` and ``y^i``.
    """
    yl = al @ y
    A = float(y @ yl)
    a = np.sqrt(A)
    b = float(om @ y)
    F = a + b
    A_x = np.einsum("lij,i,j->l", dal, y, y)
    a_x = A_x / (2 * a)
    a_y = yl / a
    F_x = a_x + dom @ y
    F_y = a_y + om
    a_xx = np.einsum("lmij,i,j->lm", ddal, y, y) / (2 * a) - np.outer(A_x, A_x) / (4 * a**3)
    F_xx = a_xx + np.einsum("lmk,k->lm", ddom, y)
    dyl = np.einsum("lij,j->li", dal, y)
    a_xy = dyl / a - np.outer(a_x, yl) / a**2
    F_xy = a_xy + dom
    F_yy = al / a - np.outer(yl, yl) / a**3
    return (
        F * F,
        2 * F * F_x,
        2 * F * F_y,
        2 * (np.outer(F_x, F_x) + F * F_xx),
        2 * (np.outer(F_x, F_y) + F * F_xy),
        2 * (np.outer(F_y, F_y) + F * F_yy),
    )
