"""From Fermat geodesics to spacetime geodesics and back.

A constant alpha-speed Fermat geodesic ``x`` lifts to the lightlike curve
``z(s) = (x(s), t0 + int_0^s F(x, x'))`` of the normalized metric

    g[(y, tau), (y, tau)] = g0t[y, y] + 2 g0t[delta, y] tau - tau^2,   g0t = g0 / beta,

and ``dt/ds - alpha[x', eta] = C_z`` is conserved because ``d/dt`` is Killing.
The spacetime Jacobi system couples a spatial field ``J`` with a scalar
``W`` (the variation of ``t``); its conjugate instants are computed here
independently of the Fermat side so that the index identity is tested, not
assumed.

Timelike geodesics are handled through the static extension
``g0 + du^2`` on ``M0 x R``: a lightlike geodesic of the extension whose
``u`` component is used as parameter is a proper-time timelike geodesic of
the original spacetime.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import kernel
from .charts import Atlas, ChartPoint
from .errors import DegenerateHypothesis, NumericalFailure
from .geodesic import (
    CurveQuadrature,
    GeodesicSolution,
    ShootingProblem,
    alpha_omega_along,
    connect,
    pick_nodes,
    run_kernel,
    seed_directions,
    seed_velocities,
)
from .geometry import _checked, fields_along, levi_civita, program_args
from .jacobi import (
    DEFAULT_RANK_TOL,
    N_UNIFORM,
    ConjugateReport,
    JacobiPropagator,
    alpha_frames,
    conjugate_instants,
    detect_rank_drops,
    single_chart_samples,
)
from .scenario import StationaryScenario


@dataclass
class SpacetimeCurve:
    """A lifted geodesic sampled at the nodes of its base curve."""

    base: GeodesicSolution
    grid: np.ndarray
    coords: np.ndarray
    charts: np.ndarray
    velocities: np.ndarray
    t_values: np.ndarray
    t_dot: np.ndarray
    t0: float
    C_z: float
    causal_residual: float
    causal_target: float
    killing_std: float
    future: bool = True
    details: dict = field(default_factory=dict)

    @property
    def arrival_time(self) -> float:
        return float(self.t_values[-1])

    @property
    def kind(self) -> str:
        return "lightlike" if self.causal_target == 0 else "timelike"

    def to_record(self) -> dict:
        rec = {
            "geodesic_id": self.base.geodesic_id,
            "kind": self.kind,
            "arrival_time": self.arrival_time,
            "C_z": self.C_z,
            "causal_residual": self.causal_residual,
            "killing_std": self.killing_std,
        }
        for key in ("mu_x", "mu_z", "u_affinity", "proper_time"):
            if key in self.details:
                rec[key] = self.details[key]
        return rec


def _alpha_base(geod: GeodesicSolution) -> GeodesicSolution:
    if geod.parametrization == "alpha":
        return geod
    return geod._base


def spacetime_norm(G, D, b, y, tau):
    """``g0[y,y] + 2 g0[delta,y] tau - beta tau^2`` row by row (unnormalized metric)."""
    Gy = np.einsum("nij,nj->ni", G, y)
    return (np.einsum("ni,ni->n", y, Gy) + 2 * np.einsum("ni,ni->n", D, Gy) * tau
            - b * tau * tau)


def lift_lightlike(scenario: StationaryScenario, geod: GeodesicSolution, t0: float = 0.0,
                   future: bool = True) -> SpacetimeCurve:
    """Lift a Fermat geodesic to a lightlike geodesic through ``(x(0), t0)``.

    ``future=False`` produces the past-pointing lift ``t' = -F_-(x, x')``.
    """
    geod = _alpha_base(geod)
    X, V, C = geod.coords, geod.velocities, geod.charts
    al, om = alpha_omega_along(scenario, C, X)
    a = np.sqrt(np.einsum("ni,nij,nj->n", V, al, V))
    lin = np.einsum("ni,ni->n", om, V)
    if future:
        t_dot = a + lin
        t = t0 + geod.clock()(geod.grid)
    else:
        t_dot = lin - a

        def fminus(c, x, v):
            alq, omq = alpha_omega_along(scenario, c, x)
            return np.sqrt(np.einsum("ni,nij,nj->n", v, alq, v)) - np.einsum("ni,ni->n", omq, v)

        t = t0 - CurveQuadrature(geod, integrand=fminus)(geod.grid)
    G, D, b = fields_along(scenario, C, X)
    # the normalized metric of the lift is the unnormalized one divided by beta
    null = spacetime_norm(G, D, b, V, t_dot) / b
    eta = np.linalg.solve(al, om[..., None])[..., 0]
    cz = t_dot - np.einsum("ni,nij,nj->n", V, al, eta)
    return SpacetimeCurve(
        base=geod, grid=geod.grid.copy(), coords=X.copy(), charts=C.copy(),
        velocities=V.copy(), t_values=np.asarray(t, float), t_dot=t_dot, t0=float(t0),
        C_z=float(np.mean(cz)), causal_residual=float(np.max(np.abs(null))),
        causal_target=0.0, killing_std=float(np.std(cz)), future=future,
    )


# -- coupled (J, W) system -----------------------------------------------------------


class SpacetimeJacobiBasis:
    """The ``n + 1`` solutions of the coupled system with ``(J, W)(0) = 0``.

    Column ``k < n`` starts with ``J'(0)`` the k-th alpha-orthonormal vector
    at ``x(0)`` and ``C_JW = 0``; the last column has ``J'(0) = 0`` and
    ``C_JW = 1``.
    """

    def __init__(self, scenario: StationaryScenario, lift: SpacetimeCurve):
        if not lift.future or lift.causal_target != 0:
            raise ValueError("the coupled system is set up for future-pointing lightlike lifts")
        if abs(lift.C_z) < 1e-14:
            raise ValueError("C_z = 0: the curve is not a lightlike lift")
        self.scenario = scenario
        self.lift = lift
        geod = lift.base
        n = geod.n
        x0 = geod.x0
        U0 = alpha_frames(scenario, [x0.chart_id], x0.coords[None, :])[0]
        seeds = np.zeros((n, n + 1))
        seeds[:, :n] = np.linalg.inv(U0)
        self.colconst = np.zeros(n + 1)
        self.colconst[n] = 1.0
        self.seeds = seeds
        self.y0 = np.concatenate([x0.coords, geod.v0, np.zeros(n * (n + 1)), seeds.ravel(),
                                  np.zeros(n + 1)])

    def states(self, ts):
        """``(X, J, P, W, charts, nodes)`` at ``ts``; ``J`` is ``(k, n, n+1)``."""
        ts = np.atleast_1d(np.asarray(ts, float))
        geod = self.lift.base
        n = geod.n
        m = n + 1
        traj = run_kernel(self.scenario, kernel.MODE_SPACETIME_JACOBI, geod.x0.chart_id, self.y0,
                          1.0, geod.tol, ncol=m, colconst=self.colconst, cz=self.lift.C_z,
                          t_eval=np.unique(ts))
        Y = traj.y[pick_nodes(traj, ts)]
        o = 2 * n
        J = Y[:, o:o + n * m].reshape(-1, n, m)
        P = Y[:, o + n * m:o + 2 * n * m].reshape(-1, n, m)
        W = Y[:, o + 2 * n * m:]
        return Y[:, :n], J, P, W, traj.charts[pick_nodes(traj, ts)], traj.s

    def matrices(self, ts):
        X, J, _, W, C, nodes = self.states(ts)
        U = alpha_frames(self.scenario, C, X)
        M = np.concatenate([U @ J, W[:, None, :]], axis=1)
        sign = np.where(C == self.lift.base.x0.chart_id, 1.0, -1.0)
        return M, sign, nodes


def spacetime_conjugates(scenario: StationaryScenario, lift: SpacetimeCurve,
                         rank_tol: float = DEFAULT_RANK_TOL,
                         n_uniform: int = N_UNIFORM) -> ConjugateReport:
    basis = SpacetimeJacobiBasis(scenario, lift)
    instants, end_mult, notes = detect_rank_drops(basis.matrices, rank_tol, n_uniform)
    return ConjugateReport(
        instants=instants,
        mu=int(sum(m for _, m in instants)),
        endpoint_conjugate=end_mult > 0,
        rank_tol=rank_tol,
        endpoint_multiplicity=end_mult,
        geodesic_id=lift.base.geodesic_id,
        warnings=list(notes),
    )


def _pair_mismatch(a: list, b: list) -> float:
    if len(a) != len(b):
        return float("inf")
    return float(max((abs(x - y) for x, y in zip(a, b)), default=0.0))


def index_equality_check(scenario: StationaryScenario, geod: GeodesicSolution,
                         rank_tol: float = DEFAULT_RANK_TOL, t0: float = 0.0,
                         strict: bool = False) -> dict:
    """Compare the Fermat-side and spacetime-side Morse indices of one geodesic.

    Endpoint-conjugate geodesics are reported with ``degenerate=True``; with
    ``strict=True`` they raise :class:`DegenerateHypothesis` instead.
    """
    geod = _alpha_base(geod)
    rx = conjugate_instants(geod, rank_tol)
    lift = lift_lightlike(scenario, geod, t0)
    rz = spacetime_conjugates(scenario, lift, rank_tol)
    if strict and rx.endpoint_conjugate:
        raise DegenerateHypothesis("x(0) and x(1) are conjugate", rx)
    return {
        "geodesic_id": geod.geodesic_id,
        "mu_x": rx.mu,
        "mu_z": rz.mu,
        "equal": rx.mu == rz.mu,
        "instant_mismatch": _pair_mismatch(rx.times, rz.times),
        "degenerate": bool(rx.endpoint_conjugate or rz.endpoint_conjugate),
        "arrival_time": lift.arrival_time,
        "C_z": lift.C_z,
        "causal_residual": lift.causal_residual,
    }


def w_reconstruction(scenario: StationaryScenario, geod: GeodesicSolution, sign: float = 1.0,
                     rank_tol: float = DEFAULT_RANK_TOL) -> list:
    """Check that Fermat Jacobi fields vanishing at ``s0`` lift with ``W(s0) = 0``.

    For every interior conjugate instant ``s0`` a Fermat Jacobi field with
    ``J(0) = J(s0) = 0`` is built from the null space of the propagator; the
    coupled system is then run from ``J'(0)`` with
    ``C_JW = sign * alpha(x(0))[x'(0), J'(0)] / C_z``.  Returns one record per
    instant with the sizes of ``J(s0)`` and ``W(s0)`` (relative to ``|J'(0)|``).
    """
    geod = _alpha_base(geod)
    rep = conjugate_instants(geod, rank_tol)
    if not rep.instants:
        return []
    prop = JacobiPropagator(geod)
    lift = lift_lightlike(scenario, geod)
    n = geod.n
    x0 = geod.x0
    al0, _ = alpha_omega_along(scenario, [x0.chart_id], x0.coords[None, :])
    out = []
    for s0, _mult in rep.instants:
        M, _, _ = prop.frame_matrices(np.array([s0]))
        coef = np.linalg.svd(M[0])[2][-1]
        jp0 = prop.frame0 @ coef
        cjw = sign * float(geod.v0 @ al0[0] @ jp0) / lift.C_z
        y0 = np.concatenate([x0.coords, geod.v0, np.zeros(n), jp0, [0.0]])
        traj = run_kernel(scenario, kernel.MODE_SPACETIME_JACOBI, x0.chart_id, y0, 1.0, geod.tol,
                          ncol=1, colconst=[cjw], cz=lift.C_z, t_eval=np.array([s0]))
        y = traj.y[pick_nodes(traj, [s0])[0]]
        U = alpha_frames(scenario, [traj.charts[pick_nodes(traj, [s0])[0]]], y[None, :n])[0]
        size = float(np.sqrt(jp0 @ al0[0] @ jp0))
        out.append({
            "s0": float(s0),
            "C_JW": cjw,
            "J_norm": float(np.linalg.norm(U @ y[2 * n:3 * n])) / size,
            "W": float(y[4 * n]) / size,
        })
    return out


# -- timelike case ------------------------------------------------------------------


def extend_static(scenario: StationaryScenario) -> StationaryScenario:
    """The scenario on ``M0 x R`` with ``g0 + du^2``, ``delta' = (delta, 0)``, same beta."""
    at = scenario.atlas
    ext = Atlas(at.kind, at.dimension + 1, radius=at.radius, periods=at.periods,
                n_extra=at.n_extra + 1)
    return StationaryScenario(ext, scenario.g0, scenario.delta, scenario.beta,
                              globally_hyperbolic=scenario.globally_hyperbolic,
                              name=(scenario.name or "scenario") + "+u")


def extended_fermat_F(scenario: StationaryScenario, x: ChartPoint, y, v) -> float:
    """Fermat metric of the extension evaluated from the base data.

    ``sqrt(g0[y,y]/beta + v^2/beta + g0[delta,y]^2/beta^2) + g0[delta,y]/beta``
    """
    x = _checked(scenario, x)
    y = np.asarray(y, float)
    G, D, b = fields_along(scenario, [x.chart_id], x.coords[None, :])
    G, D, b = G[0], D[0], float(b[0])
    lin = float(D @ G @ y) / b
    return float(np.sqrt(y @ G @ y / b + v * v / b + lin * lin) + lin)


def lorentz_metric_jet(scenario: StationaryScenario, chart: int, x):
    """Unnormalized spacetime metric ``[[g0, g0 delta], [., -beta]]`` on ``(x, t)``.

    Returns ``(g, dg, ddg)`` in dimension ``n + 1``; nothing depends on ``t``.
    """
    G, dG, ddG, D, dD, ddD, b, db, ddb = kernel.field_jets(*program_args(scenario), int(chart),
                                                           np.asarray(x, float))
    n = G.shape[0]
    m = n + 1
    g = np.zeros((m, m))
    g[:n, :n] = G
    g[:n, n] = g[n, :n] = G @ D
    g[n, n] = -b
    dg = np.zeros((m, m, m))
    dg[:n, :n, :n] = dG
    w1 = np.einsum("lij,j->li", dG, D) + np.einsum("ij,lj->li", G, dD)
    dg[:n, :n, n] = dg[:n, n, :n] = w1
    dg[:n, n, n] = -db
    ddg = np.zeros((m, m, m, m))
    ddg[:n, :n, :n, :n] = ddG
    w2 = (np.einsum("lmij,j->lmi", ddG, D) + np.einsum("lij,mj->lmi", dG, dD)
          + np.einsum("mij,lj->lmi", dG, dD) + np.einsum("ij,lmj->lmi", G, ddD))
    ddg[:n, :n, :n, n] = ddg[:n, :n, n, :n] = w2
    ddg[:n, :n, n, n] = -ddb
    return g, dg, ddg


class LorentzJacobiFlow:
    """Geodesic and variational equations of the spacetime metric in one chart.

    Coordinate form: ``J'' = -(d_l Gamma^k_ij) J^l z'^i z'^j - 2 Gamma^k_ij z'^i J'^j``;
    no Fermat quantity is used, which makes this an independent oracle.
    """

    def __init__(self, scenario: StationaryScenario, chart: int):
        self.scenario = scenario
        self.chart = chart
        self.m = scenario.dimension + 1

    def rhs(self, _tau, y):
        m = self.m
        z, zd = y[:m], y[m:2 * m]
        J = y[2 * m:2 * m + m * m].reshape(m, m)
        Jd = y[2 * m + m * m:].reshape(m, m)
        g, dg, ddg = lorentz_metric_jet(self.scenario, self.chart, z[:m - 1])
        gam, dgam = levi_civita(g, dg, ddg)
        zdd = -np.einsum("kij,i,j->k", gam, zd, zd)
        Jdd = (-np.einsum("lkij,lc,i,j->kc", dgam, J, zd, zd)
               - 2 * np.einsum("kij,i,jc->kc", gam, zd, Jd))
        return np.concatenate([zd, zdd, Jd.ravel(), Jdd.ravel()])

    def solve(self, z0, zd0, tau1, rtol=1e-12, atol=1e-13):
        m = self.m
        y0 = np.concatenate([z0, zd0, np.zeros(m * m), np.eye(m).ravel()])
        sol = solve_ivp(self.rhs, (0.0, tau1), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        if not sol.success:
            raise NumericalFailure(f"spacetime Jacobi integration failed: {sol.message}")
        return sol

    def norm(self, z, zd) -> float:
        g, _, _ = lorentz_metric_jet(self.scenario, self.chart, z[:self.m - 1])
        return float(zd @ g @ zd)


def lorentz_conjugates(flow: LorentzJacobiFlow, sol, tau1: float, n_uniform: int = N_UNIFORM):
    """Zeros of ``det J(tau)`` on ``(0, tau1)`` for the coordinate Jacobi matrix."""
    m = flow.m

    def det(tau):
        return float(np.linalg.det(sol.sol(tau)[2 * m:2 * m + m * m].reshape(m, m)))

    grid = np.linspace(0.0, tau1, n_uniform + 1)[1:]
    vals = np.array([det(t) for t in grid])
    out = []
    for i in range(len(grid) - 1):
        if vals[i] * vals[i + 1] < 0:
            r = brentq(det, grid[i], grid[i + 1], xtol=1e-13 * tau1)
            if r < tau1 * (1 - 1e-7):
                out.append(float(r))
    return out


def timelike_seeds(scenario: StationaryScenario, P0: ChartPoint, Q0: ChartPoint,
                   count: int = 12, seed: int = 0, L_max: float | None = None) -> np.ndarray:
    """Seeds for the extension: the chord plus spatial perturbations of it.

    With ``L_max`` the spatial part also runs over alpha-lengths up to
    ``L_max`` in ``count`` directions, reaching geodesics that wind around
    the base.  The u-component of every seed is the chord's.
    """
    ext = extend_static(scenario)
    d = ext.atlas.displacement(P0, Q0)
    n = scenario.dimension
    seeds = [d]
    scale = max(float(np.linalg.norm(d[:n])), 0.1 * abs(d[n]), 1e-3)
    for r in (0.2, 0.5):
        for e in seed_directions(n, count // 2, seed):
            v = d.copy()
            v[:n] += r * scale * e
            seeds.append(v)
    if L_max is not None:
        p0 = ChartPoint(P0.chart_id, P0.coords[:n])
        levels = max(4, int(np.ceil(2 * L_max / np.pi)))
        for v in seed_velocities(scenario, p0, L_max, count * levels, count, seed):
            seeds.append(np.append(v, d[n]))
    return np.array(seeds)


def timelike_geodesics(scenario: StationaryScenario, p0: ChartPoint, q0: ChartPoint,
                       s_bar: float, t0: float = 0.0, tol: float = 1e-10, seeds=None,
                       L_max: float | None = None, n_uniform: int = N_UNIFORM) -> list:
    """All timelike geodesics from ``(p0, t0)`` to the worldline of ``q0`` with proper time ``s_bar``.

    Each is found as a lightlike geodesic of the extension from ``(p0, 0)``
    to ``(q0, s_bar)``; the list is sorted by extended Fermat length, i.e. by
    arrival time.  ``L_max`` widens the seed set to reach winding geodesics.
    """
    if not s_bar > 0:
        raise ValueError("s_bar must be positive")
    p0 = _checked(scenario, p0)
    q0 = _checked(scenario, q0)
    ext = extend_static(scenario)
    P0 = ChartPoint(p0.chart_id, np.append(p0.coords, 0.0))
    Q0 = ChartPoint(q0.chart_id, np.append(q0.coords, s_bar))
    if seeds is None:
        seeds = timelike_seeds(scenario, P0, Q0, L_max=L_max)
    found = connect(ext, ShootingProblem(P0, Q0, seeds, tol=tol, allow_loops=True))
    return [timelike_from_extension(scenario, g, t0, n_uniform) for g in found]


def lift_timelike(scenario: StationaryScenario, p0: ChartPoint, q0: ChartPoint, s_bar: float,
                  t0: float = 0.0, tol: float = 1e-10, seeds=None, which: int = 0,
                  L_max: float | None = None, n_uniform: int = N_UNIFORM) -> SpacetimeCurve:
    """One timelike geodesic: entry ``which`` of :func:`timelike_geodesics` (0: earliest arrival)."""
    curves = timelike_geodesics(scenario, p0, q0, s_bar, t0, tol, seeds, L_max, n_uniform)
    if len(curves) <= which:
        raise NumericalFailure(f"found {len(curves)} connecting geodesics in the extension")
    return curves[which]


def timelike_from_extension(scenario: StationaryScenario, egeo: GeodesicSolution,
                            t0: float = 0.0, n_uniform: int = N_UNIFORM) -> SpacetimeCurve:
    ext = egeo.scenario
    n = scenario.dimension
    X, V, C = egeo.coords, egeo.velocities, egeo.charts
    xb, vb = X[:, :n], V[:, :n]
    u, ud = X[:, n], V[:, n]
    s_bar = float(u[-1] - u[0])
    G, D, b = fields_along(scenario, C, xb)
    # u is affine in lambda = int beta ds (the unnormalized affine parameter)
    lam_q = CurveQuadrature(egeo, integrand=lambda c, x, v: fields_along(scenario, c, x[:, :n])[2])
    lam = lam_q(egeo.grid)
    lam1 = lam_q.total
    u_aff = float(np.max(np.abs(u - u[0] - s_bar * lam / lam1)))
    u_mom = ud / b
    lift = lift_lightlike(ext, egeo, t0)
    t, tdot = lift.t_values, lift.t_dot
    # proper-time velocity of z = (x, t)
    zx = vb / ud[:, None]
    zt = tdot / ud
    resid = spacetime_norm(G, D, b, zx, zt) + 1.0
    mu_fermat = conjugate_instants(egeo)
    # independent oracle: coordinate Jacobi fields of the spacetime metric
    chart, Xc, Vc = single_chart_samples(egeo, np.array([0.0, 1.0]))
    flow = LorentzJacobiFlow(scenario, chart)
    z0 = np.append(Xc[0, :n], t0)
    zd0 = np.append(Vc[0, :n], tdot[0]) / ud[0]
    sol = flow.solve(z0, zd0, s_bar)
    taus = lorentz_conjugates(flow, sol, s_bar, n_uniform)
    zend = sol.y[:, -1]
    end_err = float(np.linalg.norm(zend[:n] - Xc[1, :n]) + abs(zend[n] - t[-1]))
    fermat_u = [float(s_bar * lam_q(s)[0] / lam1) for s in mu_fermat.times]
    details = {
        "mu_x": mu_fermat.mu,
        "mu_z": len(taus),
        "fermat_instants_u": fermat_u,
        "lorentz_instants_u": taus,
        "instant_mismatch": _pair_mismatch(fermat_u, taus),
        "u_affinity": u_aff,
        "u_momentum_drift": float(np.max(np.abs(u_mom - u_mom[0]))),
        "proper_time": s_bar,
        "oracle_endpoint_error": end_err,
        "oracle_norm": flow.norm(z0, zd0),
        "extension_geodesic": egeo,
    }
    return replace(
        lift, coords=xb.copy(), velocities=zx, t_dot=zt, causal_residual=float(np.max(np.abs(resid))),
        causal_target=-1.0, details=details,
    )


# -- second variation identity --------------------------------------------------------


class PolynomialField:
    """``U(s) = s (1 - s) sum_k c_k s^k`` with vector coefficients ``c_k``."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, float))

    def __call__(self, s):
        s = np.asarray(s, float)
        p = np.polynomial.polynomial.polyval(s, self.coeffs).T          # (N, n)
        dp = np.polynomial.polynomial.polyval(
            s, np.polynomial.polynomial.polyder(self.coeffs)).T
        w, dw = s * (1 - s), 1 - 2 * s
        return w[:, None] * p, dw[:, None] * p + w[:, None] * dp

    @classmethod
    def random(cls, n: int, degree: int, rng, scale: float = 1.0):
        return cls(scale * rng.standard_normal((degree + 1, n)))


class SineField:
    """``U(s) = sin(k pi s) e``."""

    def __init__(self, direction, k: int = 1):
        self.e = np.asarray(direction, float)
        self.k = k

    def __call__(self, s):
        s = np.asarray(s, float)
        w = self.k * np.pi
        return np.outer(np.sin(w * s), self.e), np.outer(w * np.cos(w * s), self.e)


def _gauss_nodes(n_elem: int, order: int = 6):
    u, w = np.polynomial.legendre.leggauss(order)
    a = np.arange(n_elem) / n_elem
    h = 1.0 / n_elem
    s = (a[:, None] + 0.5 * h * (u + 1)).ravel()
    return s, np.tile(0.5 * h * w, n_elem)


def second_variation_identity(scenario: StationaryScenario, geod: GeodesicSolution,
                              t0: float, test_fields: list, h: float = 1e-2,
                              n_elem: int = 64) -> dict:
    """Compare ``D^2 J(Psi(phi_r))`` with ``2 D^2 E(phi_r)`` at ``r = 0``.

    ``phi_r = x + r U`` in one chart.  ``E = 1/2 int F^2`` uses the
    alpha/eta presentation of ``F``; ``J = int g(z)[z', z'] + t'^2`` uses the
    lifted curve ``t = t0 + int F`` built from the ``g0 / beta``, ``delta``
    presentation.  Second derivatives are 5-point central differences.
    """
    s, w = _gauss_nodes(n_elem)
    chart, X, V = single_chart_samples(geod, s)
    charts = np.full(len(s), chart)
    args = program_args(scenario)

    def functionals(r, U, dU):
        phi = X + r * U
        dphi = V + r * dU
        for p in phi:
            if not scenario.atlas.in_domain(ChartPoint(chart, p)):
                raise NumericalFailure("variation leaves the chart; reduce the step or the field")
        al, om = kernel.metric_jet_many(*args, charts, phi, 0)
        eta = np.linalg.solve(al, om[..., None])[..., 0]
        a = np.sqrt(np.einsum("ni,nij,nj->n", dphi, al, dphi))
        F_ae = a + np.einsum("ni,nij,nj->n", dphi, al, eta)
        E = 0.5 * float(w @ F_ae**2)
        G, D, b = fields_along(scenario, charts, phi)
        gt = G / b[:, None, None]
        gy = np.einsum("nij,nj->ni", gt, dphi)
        lin = np.einsum("ni,ni->n", D, gy)
        tdot = np.sqrt(np.einsum("ni,ni->n", dphi, gy) + lin * lin) + lin
        gzz = np.einsum("ni,ni->n", dphi, gy) + 2 * lin * tdot - tdot * tdot
        Jv = float(w @ (gzz + tdot * tdot))
        return Jv, E

    stencil = np.array([-2, -1, 0, 1, 2]) * h
    weights = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)
    rows = []
    for U_fn in test_fields:
        U, dU = U_fn(s)
        vals = np.array([functionals(r, U, dU) for r in stencil])
        d2J = float(weights @ vals[:, 0])
        d2E = float(weights @ vals[:, 1])
        scale = max(abs(d2J), abs(2 * d2E))
        rel = abs(d2J - 2 * d2E) / scale if scale > 1e-300 else 0.0
        rows.append({"d2J": d2J, "d2E": d2E, "relative_residual": rel})
    return {
        "max_relative_residual": max((r["relative_residual"] for r in rows), default=0.0),
        "fields": rows,
        "chart": int(chart),
        "t0": float(t0),
    }


__all__ = [
    "SpacetimeCurve",
    "SpacetimeJacobiBasis",
    "lift_lightlike",
    "spacetime_conjugates",
    "index_equality_check",
    "w_reconstruction",
    "extend_static",
    "extended_fermat_F",
    "lift_timelike",
    "timelike_geodesics",
    "second_variation_identity",
    "PolynomialField",
    "SineField",
    "LorentzJacobiFlow",
]
