"""Discrete second variation of the energy at a geodesic.

The geodesic ``xb`` (constant Fermat speed) is localized in one chart by the
tube

    phi(s, q) = xb(s) + E(s) q - 1/2 Gamma(xb(s))(E q, E q)

where ``E`` is an alpha-orthonormal frame parallel along ``xb`` and
``Gamma`` the alpha Christoffel symbols.  The quadratic term bends the lines
``q -> phi(s, q)`` into alpha-geodesics to second order, so the second
derivatives of the Lagrangian

    G(s, q, y) = F^2(phi, d/ds phi)    (q = q(s), y = q'(s))

at ``q = 0`` only involve intrinsic, bounded quantities.  Without it the
tube lines near a stereographic pole are tiny circles and the pointwise
coefficients become huge and cancel only after integration.
``tube="parallel"`` drops the quadratic term, ``tube="affine"`` also uses
``E = I``.  The energy is ``E(xi) = 1/2 int G(s, xi, xi') ds`` on
``H^1_0([0, 1], R^n)``.  Variations are discretized with
vector-valued piecewise-linear hat functions and 3-point Gauss quadrature per
element.  The Morse index is the number of negative eigenvalues of the pencil
``B v = lambda G v`` where ``B`` is the second variation and ``G`` the scalar
product ``1/2 int G_yy[xi', zeta']``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import solve_ivp
from scipy.linalg import eigh

from . import kernel
from .charts import ChartPoint
from .errors import NumericalFailure
from .geodesic import GeodesicSolution, reparametrize_finsler_speed
from .geometry import program_args
from .jacobi import FermatSpeedFlow, alpha_frames, single_chart_samples
from .randers import F2_derivatives

QUAD_ORDER = 3
TUBES = ("normal", "parallel", "affine")


def _to_chart(scenario, geod, ts, chart):
    X, V, C = geod.sample(ts)
    atlas = scenario.atlas
    for k in range(len(C)):
        if C[k] != chart:
            p = ChartPoint(int(C[k]), X[k])
            X[k] = atlas.transition(p, chart).coords
            V[k] = atlas.push_vector(p, V[k], chart)
    return X, V

#: eigenvalues below this fraction of the largest are refined by extrapolation
NEAR_ZERO = 1e-3


@dataclass(frozen=True)
class H1Basis:
    """Hat functions on the uniform grid with ``m`` interior nodes, times ``R^n``.

    Coefficient ``(k - 1) * n + a`` multiplies ``hat_k e_a`` for ``k = 1..m``.
    """

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("need at least one interior node and one dimension")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def size(self) -> int:
        return self.m * self.n

    @cached_property
    def quadrature(self):
        """``(points (E, Q), weights (E, Q), t (Q,))``; ``t`` is the local coordinate in [0, 1]."""
        u, w = legendre.leggauss(QUAD_ORDER)
        t = 0.5 * (u + 1)
        left = np.arange(self.m + 1) * self.h
        pts = left[:, None] + self.h * t[None, :]
        return pts, np.broadcast_to(0.5 * self.h * w, pts.shape).copy(), t

    def refined(self) -> "H1Basis":
        """Basis on the grid of half the spacing."""
        return H1Basis(2 * self.m + 1, self.n)

    def evaluate(self, coeffs, s):
        """Value and derivative of the field with the given coefficients at ``s``."""
        c = np.asarray(coeffs, float).reshape(self.m, self.n)
        nodes = np.vstack([np.zeros(self.n), c, np.zeros(self.n)])
        s = np.asarray(s, float)
        e = np.clip(np.floor(s / self.h).astype(int), 0, self.m)
        t = (s - e * self.h) / self.h
        val = nodes[e] * (1 - t)[:, None] + nodes[e + 1] * t[:, None]
        der = (nodes[e + 1] - nodes[e]) / self.h
        return val, der


class LocalizedLagrangian:
    """The localized Lagrangian ``G(s, q, y)`` in a single chart.

    ``along`` may be given in either parametrization.  The center curve is
    its constant Fermat-speed version, re-integrated in one chart together
    with the frame ``E`` (Euler-Lagrange flow of ``F^2 / 2`` plus parallel
    transport for alpha).
    """

    def __init__(self, along: GeodesicSolution, chart: int | None = None, tube: str = "normal",
                 rtol: float = 1e-12):
        if tube not in TUBES:
            raise ValueError(f"tube must be one of {TUBES}")
        self.geod = along
        self.scenario = along.scenario
        self.n = along.n
        self.tube = tube
        self._cache = {}
        fgeo = reparametrize_finsler_speed(along)
        probe = np.linspace(0.0, 1.0, 129)
        best, Xc, Vc = single_chart_samples(fgeo, probe)
        self.chart = best if chart is None else chart
        if chart is not None and chart != best:
            Xc, Vc = _to_chart(self.scenario, fgeo, probe, chart)
        self.args = program_args(self.scenario)
        self.flow = FermatSpeedFlow(self.scenario, self.chart)
        n = self.n
        if tube == "parallel":
            E0 = np.linalg.inv(alpha_frames(self.scenario, [self.chart], Xc[:1])[0])
        else:
            E0 = np.eye(n)
        z0 = np.concatenate([Xc[0], Vc[0], E0.ravel()])
        self.sol = solve_ivp(self._rhs, (0.0, 1.0), z0, method="DOP853", rtol=rtol,
                             atol=1e-13, dense_output=True)
        if not self.sol.success:
            raise NumericalFailure(f"center curve integration failed: {self.sol.message}")
        self.endpoint_error = float(np.linalg.norm(self.sol.y[:n, -1] - Xc[-1]))

    def _rhs(self, t, z):
        n = self.n
        xy = self.flow.rhs(t, z[:2 * n])
        if self.tube == "affine":
            return np.concatenate([xy, np.zeros(n * n)])
        gam = kernel.local_geometry(*self.args, self.chart, z[:n])["gamma"]
        E = z[2 * n:].reshape(n, n)
        dE = -np.einsum("kij,i,jc->kc", gam, z[n:2 * n], E)
        return np.concatenate([xy, dE.ravel()])

    def center(self, s):
        """``(xb, xb', E, E')`` at ``s`` in :attr:`chart`."""
        return self._tube_data(s)[:4]

    def _tube_data(self, s):
        """Center data plus ``Gamma`` and ``d/ds Gamma`` along the curve."""
        s = np.asarray(s, float).ravel()
        n = self.n
        Z = self.sol.sol(s).T
        X, V = Z[:, :n], Z[:, n:2 * n]
        E = Z[:, 2 * n:].reshape(-1, n, n)
        gam = np.zeros((len(s), n, n, n))
        dgam = np.zeros_like(gam)
        if self.tube == "affine":
            return X, V, E, np.zeros_like(E), gam, dgam
        for k in range(len(s)):
            geo = kernel.local_geometry(*self.args, self.chart, X[k])
            gam[k] = geo["gamma"]
            dgam[k] = np.einsum("m,mkij->kij", V[k], geo["dgamma"])
        dE = -np.einsum("skij,si,sjc->skc", gam, V, E)
        if self.tube == "parallel":
            gam[:] = 0.0
            dgam[:] = 0.0
        return X, V, E, dE, gam, dgam

    def _metric(self, X):
        charts = np.full(len(X), self.chart)
        return kernel.metric_jet_many(*self.args, charts, X, 2)

    def jets(self, s, q=None, y=None):
        """``(G, G_q, G_y, G_qq, G_qy, G_yy)`` at ``(s, q, y)``, stacked over ``s``.

        ``G_qy[l, i]`` is the mixed derivative in ``q^l`` and ``y^i``.  With
        an offset ``q`` and the normal tube, the second derivatives are not
        computed and returned as ``None``.
        """
        X0, V0, E, dE, gam, dgam = self._tube_data(s)
        if q is None:
            X, V = X0, V0
            Pq, Pdq, Pdy = E, dE, E
        else:
            u = np.einsum("kij,kj->ki", E, q)
            du = np.einsum("kij,kj->ki", dE, q) + np.einsum("kij,kj->ki", E, y)
            X = X0 + u - 0.5 * np.einsum("kaij,ki,kj->ka", gam, u, u)
            V = (V0 + du - 0.5 * np.einsum("kaij,ki,kj->ka", dgam, u, u)
                 - np.einsum("kaij,ki,kj->ka", gam, u, du))
            # first derivatives of phi and phi' in q and y
            gu = np.einsum("kaij,ki->kaj", gam, u)
            Pq = E - gu @ E
            Pdy = E - gu @ E
            Pdq = (dE - np.einsum("kaij,ki->kaj", dgam, u) @ E
                   - np.einsum("kaij,kj->kai", gam, du) @ E - gu @ dE)
        al, dal, ddal, om, dom, ddom = self._metric(X)
        raw = [F2_derivatives(al[k], dal[k], ddal[k], om[k], dom[k], ddom[k], V[k])
               for k in range(len(X))]
        F2, Fx, Fy, Fxx, Fxy, Fyy = (np.array(col) for col in zip(*raw))
        Gq = np.einsum("kia,ki->ka", Pq, Fx) + np.einsum("kia,ki->ka", Pdq, Fy)
        Gy = np.einsum("kia,ki->ka", Pdy, Fy)
        if q is not None and self.tube == "normal":
            return F2, Gq, Gy, None, None, None
        Et = np.transpose(E, (0, 2, 1))
        dEt = np.transpose(dE, (0, 2, 1))
        Gqq = (Et @ Fxx @ E + Et @ Fxy @ dE + dEt @ np.transpose(Fxy, (0, 2, 1)) @ E
               + dEt @ Fyy @ dE)
        Gqy = Et @ Fxy @ E + dEt @ Fyy @ E
        Gyy = Et @ Fyy @ E
        if self.tube == "normal":
            # second derivatives of the tube: phi_qq = -C, phi'_qq = -C', phi'_qy = -C
            C = np.einsum("kcij,kia,kjb->kcab", gam, E, E)
            dC = (np.einsum("kcij,kia,kjb->kcab", dgam, E, E)
                  + np.einsum("kcij,kia,kjb->kcab", gam, dE, E)
                  + np.einsum("kcij,kia,kjb->kcab", gam, E, dE))
            Gqq = Gqq - np.einsum("kc,kcab->kab", Fx, C) - np.einsum("kc,kcab->kab", Fy, dC)
            Gqy = Gqy - np.einsum("kc,kcab->kab", Fy, C)
        return F2, Gq, Gy, Gqq, Gqy, Gyy

    def at_basis(self, basis: H1Basis):
        """Jets at the quadrature points of ``basis`` with zero offset (cached)."""
        key = basis.m
        if key not in self._cache:
            pts, _, _ = basis.quadrature
            self._cache[key] = tuple(a.reshape(pts.shape + a.shape[1:])
                                     for a in self.jets(pts.ravel()))
        return self._cache[key]

    def energy(self, basis: H1Basis, field_fn=None, coeffs=None) -> float:
        """``1/2 int G(s, xi, xi') ds`` by the quadrature of ``basis``.

        ``xi`` is either ``field_fn(s) -> (values, derivatives)`` or the
        basis combination with coefficients ``coeffs``.
        """
        pts, w, _ = basis.quadrature
        s = pts.ravel()
        if coeffs is not None:
            q, y = basis.evaluate(coeffs, s)
        elif field_fn is not None:
            q, y = field_fn(s)
        else:
            q = y = np.zeros((len(s), self.n))
        F2 = self.jets(s, q, y)[0]
        return 0.5 * float(w.ravel() @ F2)


# -- assembly -------------------------------------------------------------------------


def _scatter(basis: H1Basis, local: np.ndarray) -> np.ndarray:
    """Sum element matrices ``local[e, p, a, r, b]`` (p, r in {left, right}) into a dense matrix."""
    m, n = basis.m, basis.n
    full = np.zeros((m + 2, n, m + 2, n))
    e = np.arange(m + 1)
    for p in (0, 1):
        for r in (0, 1):
            np.add.at(full, (e + p, slice(None), e + r), local[:, p, :, r, :])
    return full[1:-1, :, 1:-1, :].reshape(m * n, m * n)


def _hat_tables(basis: H1Basis):
    _, _, t = basis.quadrature
    phi = np.stack([1 - t, t])                       # (2, Q)
    dphi = np.array([-1.0, 1.0]) / basis.h           # (2,)
    return phi, dphi


def second_variation_matrix(lagr: LocalizedLagrangian, basis: H1Basis) -> np.ndarray:
    """``B[i, j] = 1/2 int (G_qq[xi_i, xi_j] + G_qy[xi_i, xi_j'] + G_qy[xi_j, xi_i'] + G_yy[xi_i', xi_j'])``."""
    _, _, _, Fxx, Fxy, Fyy = lagr.at_basis(basis)
    _, w, _ = basis.quadrature
    phi, dphi = _hat_tables(basis)
    half_w = 0.5 * w
    loc = (
        np.einsum("eq,pq,rq,eqab->eparb", half_w, phi, phi, Fxx)
        + np.einsum("eq,pq,r,eqab->eparb", half_w, phi, dphi, Fxy)
        + np.einsum("eq,p,rq,eqba->eparb", half_w, dphi, phi, Fxy)
        + np.einsum("eq,p,r,eqab->eparb", half_w, dphi, dphi, Fyy)
    )
    B = _scatter(basis, loc)
    return 0.5 * (B + B.T)


def h1_gram(lagr: LocalizedLagrangian, basis: H1Basis) -> np.ndarray:
    Fyy = lagr.at_basis(basis)[5]
    _, w, _ = basis.quadrature
    _, dphi = _hat_tables(basis)
    loc = np.einsum("eq,p,r,eqab->eparb", 0.5 * w, dphi, dphi, Fyy)
    G = _scatter(basis, loc)
    return 0.5 * (G + G.T)


def pencil_eigenvalues(lagr: LocalizedLagrangian, basis: H1Basis):
    B = second_variation_matrix(lagr, basis)
    G = h1_gram(lagr, basis)
    return eigh(B, G, eigvals_only=True)


@dataclass
class DiscreteIndex:
    index: int
    kernel_dim: int
    eigenvalues: np.ndarray          # ascending, with extrapolated entries substituted
    raw_eigenvalues: np.ndarray
    extrapolated: list = field(default_factory=list)   # positions refined by extrapolation
    kernel_tol: float = 1e-8
    m: int = 0

    def to_record(self) -> dict:
        return {
            "index": int(self.index),
            "kernel_dim": int(self.kernel_dim),
            "m": int(self.m),
            "smallest_eigenvalues": [float(v) for v in self.eigenvalues[:6]],
            "extrapolated": [int(i) for i in self.extrapolated],
        }


def discrete_index(lagr: LocalizedLagrangian, basis: H1Basis, kernel_tol: float = 1e-8,
                   extrapolate: bool = True) -> DiscreteIndex:
    """Index and kernel dimension of the pencil ``(B, G)``.

    Eigenvalues of hat-function discretizations carry an ``O(h^2)`` error,
    which is far above any useful kernel threshold.  Eigenvalues within
    ``NEAR_ZERO`` of zero (relative) are therefore replaced by the Richardson
    extrapolation ``(4 lambda_{h/2} - lambda_h) / 3`` from the refined grid.
    """
    lam = pencil_eigenvalues(lagr, basis)
    scale = float(np.max(np.abs(lam)))
    corrected = lam.copy()
    near = np.nonzero(np.abs(lam) <= NEAR_ZERO * scale)[0]
    if extrapolate and near.size:
        fine = pencil_eigenvalues(lagr, basis.refined())
        corrected[near] = (4 * fine[near] - lam[near]) / 3
    thr = kernel_tol * scale
    return DiscreteIndex(
        index=int(np.count_nonzero(corrected < -thr)),
        kernel_dim=int(np.count_nonzero(np.abs(corrected) <= thr)),
        eigenvalues=corrected,
        raw_eigenvalues=lam,
        extrapolated=[int(i) for i in near] if extrapolate else [],
        kernel_tol=kernel_tol,
        m=basis.m,
    )


# -- the operator K -------------------------------------------------------------------


class _Cumulative:
    """Exact cumulative integrals of quadratics given at the Gauss points of each element."""

    def __init__(self, basis: H1Basis):
        _, _, t = basis.quadrature
        self.h = basis.h
        V = np.vander(t, QUAD_ORDER, increasing=True)            # (Q, Q)
        self.inv = np.linalg.inv(V)
        # antiderivative of the monomials from 0 to t_j (scaled by h)
        self.P = np.array([[tj ** (k + 1) / (k + 1) for k in range(QUAD_ORDER)] for tj in t])
        self.full = np.array([1.0 / (k + 1) for k in range(QUAD_ORDER)])

    def __call__(self, f: np.ndarray) -> np.ndarray:
        """``f`` has shape (E, Q, ...); returns ``int_0^s f`` at the same points."""
        coef = np.einsum("kq,eq...->ek...", self.inv, f)
        partial = self.h * np.einsum("jk,ek...->ej...", self.P, coef)
        whole = self.h * np.einsum("k,ek...->e...", self.full, coef)
        start = np.concatenate([np.zeros((1,) + whole.shape[1:]), np.cumsum(whole, axis=0)[:-1]])
        return start[:, None] + partial


@dataclass
class KOperator:
    matrix: np.ndarray        # coefficients of K xi_j in the basis (column j)
    cross_gram: np.ndarray    # (K xi_j, xi_i)
    Wdot: np.ndarray          # (E, Q, n, M) derivatives of the columns at the quadrature points
    basis: H1Basis

    def consistency(self, B: np.ndarray, G: np.ndarray) -> float:
        """Relative size of ``G (I + K) - B`` as bilinear forms."""
        return float(np.linalg.norm(G + self.cross_gram - B) / np.linalg.norm(B))

    def derivative_jumps(self) -> np.ndarray:
        """Largest jump of ``d/ds K xi_j`` across interior nodes, per column.

        The endpoint values are extrapolated from each side with the
        quadratic through the three Gauss values.
        """
        _, _, t = self.basis.quadrature
        V = np.vander(t, QUAD_ORDER, increasing=True)
        inv = np.linalg.inv(V)
        at0 = inv[0]                                   # value at t = 0
        at1 = inv.sum(axis=0)                          # value at t = 1
        left_end = np.einsum("q,eq...->e...", at1, self.Wdot)[:-1]
        right_start = np.einsum("q,eq...->e...", at0, self.Wdot)[1:]
        return np.max(np.abs(left_end - right_start), axis=(0, 1))


def operator_K_columns(lagr: LocalizedLagrangian, basis: H1Basis) -> KOperator:
    """Apply the explicit ``K = K1 + K2 + K3`` formulas to every basis field.

    With ``g = G_yy(s, 0, 0)``, ``Cm = (int g^-1)^-1`` and ``I(f) = int_0^s f``:

    * ``K1 xi``: ``W' = g^-1 (-I(G_qq xi) + C1)``
    * ``K2 xi``: ``W' = g^-1 (G_yq xi + C2)``
    * ``K3 xi``: ``W' = g^-1 (-I(G_qy xi') + C3)``

    each constant chosen so that ``W(1) = 0``.  The columns are projected on
    the basis with the Gram matrix.
    """
    _, _, _, Fxx, Fxy, Fyy = lagr.at_basis(basis)
    pts, w, _ = basis.quadrature
    E, Q = pts.shape
    n, m = basis.n, basis.m
    M = basis.size
    phi, dphi = _hat_tables(basis)
    # basis fields and derivatives at quadrature points: (E, Q, n, M)
    xi = np.zeros((E, Q, n, m + 2, n))
    dxi = np.zeros((E, Q, n, m + 2, n))
    e = np.arange(E)
    eye = np.eye(n)
    for p in (0, 1):
        xi[e, :, :, e + p, :] += phi[p][None, :, None, None] * eye
        dxi[e, :, :, e + p, :] += dphi[p] * eye
    xi = xi[:, :, :, 1:-1, :].reshape(E, Q, n, M)
    dxi = dxi[:, :, :, 1:-1, :].reshape(E, Q, n, M)
    cum = _Cumulative(basis)
    ginv = np.linalg.inv(Fyy)
    inner = (-cum(np.einsum("eqab,eqbj->eqaj", Fxx, xi))
             + np.einsum("eqba,eqbj->eqaj", Fxy, xi)
             - cum(np.einsum("eqab,eqbj->eqaj", Fxy, dxi)))
    Cm = np.linalg.inv(np.einsum("eq,eqab->ab", w, ginv))
    # W(1) = int g^-1 (inner + C) = 0
    C = -Cm @ np.einsum("eq,eqab,eqbj->aj", w, ginv, inner)
    rhs = inner + C[None, None]
    Wdot = np.einsum("eqab,eqbj->eqaj", ginv, rhs)
    # (K xi_j, xi_i) = 1/2 int g Wdot_j . xi_i' = 1/2 int rhs_j . xi_i'
    cross = 0.5 * np.einsum("eq,eqai,eqaj->ij", w, dxi, rhs)
    G = h1_gram(lagr, basis)
    return KOperator(np.linalg.solve(G, cross), cross, Wdot, basis)


def gradient_residual(lagr: LocalizedLagrangian, basis: H1Basis, offset=None) -> float:
    """H^1 norm of the energy gradient at ``xi = offset`` (zero: the center curve).

    ``W' = g^-1 (-int_0^s G_q + G_y + C)`` with ``g = G_yy(s, 0, 0)`` and
    ``C`` fixed by ``W(1) = 0``; the norm is ``sqrt(1/2 int g[W', W'])``.
    """
    pts, w, _ = basis.quadrature
    s = pts.ravel()
    if offset is None:
        jets = lagr.at_basis(basis)
        Fx, Fy = jets[1], jets[2]
    else:
        q, y = offset(s)
        _, Fx, Fy, *_ = lagr.jets(s, q, y)
        Fx = Fx.reshape(pts.shape + (-1,))
        Fy = Fy.reshape(pts.shape + (-1,))
    g = lagr.at_basis(basis)[5]
    ginv = np.linalg.inv(g)
    inner = -_Cumulative(basis)(Fx) + Fy
    Cm = np.linalg.inv(np.einsum("eq,eqab->ab", w, ginv))
    C = -Cm @ np.einsum("eq,eqab,eqb->a", w, ginv, inner)
    Wdot = np.einsum("eqab,eqb->eqa", ginv, inner + C)
    return float(np.sqrt(0.5 * np.einsum("eq,eqa,eqab,eqb->", w, Wdot, g, Wdot)))


def hessian_report(geod: GeodesicSolution, m: int = 400, kernel_tol: float = 1e-8) -> dict:
    lagr = LocalizedLagrangian(geod)
    basis = H1Basis(m, geod.n)
    res = discrete_index(lagr, basis, kernel_tol)
    rec = res.to_record()
    rec["geodesic_id"] = geod.geodesic_id
    rec["gradient_residual"] = gradient_residual(lagr, basis)
    return rec
