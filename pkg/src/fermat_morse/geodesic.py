"""Fermat geodesics: the spray, integration, shooting and reparametrization.

Geodesics are integrated with constant alpha-speed ``C_x`` on ``[0, 1]``:

    x'' = -Gamma(x)(x', x') - sqrt(alpha[x', x']) Omega(x) x'

where ``C_x`` is evaluated pointwise, which makes the flow well defined off
solutions as well (the Newton iterations of :func:`connect` need that).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq
from scipy.stats import norm, qmc

from . import kernel
from .charts import ChartError, ChartPoint
from .errors import DomainExit, NumericalFailure, StepUnderflow
from .geometry import _checked, local, program_args
from .ode import DenseTrajectory
from .scenario import StationaryScenario

WORKERS_ENV = "FERMAT_MORSE_WORKERS"
#: integration tolerance, residual target and iteration cap of the first Newton phase
LOOSE_TOL, LOOSE_TARGET, LOOSE_ITERS = 1e-6, 1e-5, 15


def integration_tolerances(tol: float):
    """Kernel ``(rtol, atol)`` used for a requested accuracy ``tol``."""
    return 0.1 * tol, 0.01 * tol


def run_kernel(scenario, mode, chart, y0, s1=1.0, tol=1e-10, ncol=0, colconst=(), cz=0.0,
               t_eval=None, max_steps=200000) -> DenseTrajectory:
    rtol, atol = integration_tolerances(tol)
    s, y, f, c, status = kernel.integrate(
        *program_args(scenario), int(mode), int(chart), np.asarray(y0, dtype=float), 0.0,
        float(s1), rtol, atol, int(ncol), np.asarray(colconst, dtype=float), float(cz),
        None if t_eval is None else np.asarray(t_eval, dtype=float), int(max_steps),
    )
    traj = DenseTrajectory(s, y, f, c, status)
    if status == 1:
        raise NumericalFailure("step budget exhausted", traj)
    if status == 2:
        raise StepUnderflow(f"step-size underflow near s={s[-1]:.6g}", traj)
    if status == 3:
        raise DomainExit(f"trajectory left the atlas near s={s[-1]:.6g}", traj)
    return traj


def pick_nodes(traj: DenseTrajectory, ts) -> np.ndarray:
    """Indices of the nodes the integrator landed on at the parameters ``ts``."""
    ts = np.asarray(ts, dtype=float)
    idx = np.searchsorted(traj.s, ts, side="right") - 1
    idx = np.clip(idx, 0, len(traj.s) - 1)
    if np.any(np.abs(traj.s[idx] - ts) > 1e-12 * np.maximum(1.0, np.abs(ts))):
        raise NumericalFailure("integrator did not land on requested sample points")
    return idx


def alpha_omega_along(scenario, charts, X):
    return kernel.metric_jet_many(*program_args(scenario), np.asarray(charts), X, 0)


def speeds_along(scenario, charts, X, V):
    """``(alpha_speed, F_speed)`` at each row."""
    al, om = alpha_omega_along(scenario, charts, X)
    a = np.sqrt(np.einsum("ni,nij,nj->n", V, al, V))
    return a, a + np.einsum("ni,ni->n", om, V)


# ---------------------------------------------------------------------------


def spray(scenario: StationaryScenario, x: ChartPoint, v) -> np.ndarray:
    """Acceleration ``-Gamma(v, v) - |v|_alpha Omega v``."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("the spray is undefined at zero velocity")
    geo = local(scenario, x)
    c = math.sqrt(float(v @ geo["alpha"] @ v))
    return -np.einsum("kij,i,j->k", geo["gamma"], v, v) - c * geo["big_omega"] @ v


class CurveQuadrature:
    """Cumulative integral ``tau(s) = int_0^s f(x, x') ds`` along a geodesic.

    On each integrator step the integrand is sampled exactly at Gauss points
    and represented by its Legendre interpolant, which is integrated in
    closed form.  The default integrand is the Fermat speed, so that
    ``tau`` is the Fermat clock (arrival time of the lightlike lift).
    """

    def __init__(self, geod: "GeodesicSolution", order: int = 6, integrand=None):
        s = np.unique(geod.grid)
        a, b = s[:-1], s[1:]
        u, w = legendre.leggauss(order)
        pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * u
        X, V, C = geod.sample(pts.ravel())
        if integrand is None:
            _, Fs = speeds_along(geod.scenario, C, X, V)
        else:
            Fs = np.asarray(integrand(C, X, V), dtype=float)
        Fs = Fs.reshape(pts.shape)
        coef = np.linalg.solve(legendre.legvander(u, order - 1), Fs.T).T
        self.a, self.b = a, b
        self.anti = np.array([legendre.legint(c, lbnd=-1) for c in coef])
        pieces = 0.5 * (b - a) * (Fs @ w)
        self.cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self.total = float(self.cum[-1])

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        i = np.clip(np.searchsorted(self.a, s, side="right") - 1, 0, len(self.a) - 1)
        u = (2 * s - self.a[i] - self.b[i]) / (self.b[i] - self.a[i])
        val = np.array([legendre.legval(uk, self.anti[ik]) for uk, ik in zip(u, i)])
        return self.cum[i] + 0.5 * (self.b[i] - self.a[i]) * val

    def inverse(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty_like(tau)
        for k, t in enumerate(tau):
            if t <= 0.0:
                out[k] = self.a[0]
                continue
            if t >= self.total:
                out[k] = self.b[-1]
                continue
            i = int(np.clip(np.searchsorted(self.cum, t, side="right") - 1, 0, len(self.a) - 1))
            half = 0.5 * (self.b[i] - self.a[i])
            rest = t - self.cum[i]
            g = lambda uu: half * legendre.legval(uu, self.anti[i]) - rest  # noqa: E731
            uu = brentq(g, -1.0, 1.0, xtol=1e-15, rtol=1e-15) if g(1.0) > 0 else 1.0
            out[k] = self.a[i] + half * (uu + 1.0)
        return out


@dataclass(eq=False)
class GeodesicSolution:
    scenario: StationaryScenario
    x0: ChartPoint
    v0: np.ndarray
    grid: np.ndarray
    coords: np.ndarray
    charts: np.ndarray
    velocities: np.ndarray
    C_x: float
    speed_drift: float
    chart_switches: list
    tol: float
    parametrization: str = "alpha"
    F_speed_drift: float = float("nan")
    geodesic_id: int | None = None
    _base: "GeodesicSolution | None" = field(default=None, repr=False)
    _clock: CurveQuadrature | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    @property
    def points(self) -> list:
        return [ChartPoint(int(c), x) for c, x in zip(self.charts, self.coords)]

    def endpoint(self) -> ChartPoint:
        return ChartPoint(int(self.charts[-1]), self.coords[-1])

    def end_velocity(self) -> np.ndarray:
        return self.velocities[-1].copy()

    def clock(self) -> CurveQuadrature:
        if self.parametrization == "fermat":
            return self._base.clock()
        if self._clock is None:
            self._clock = CurveQuadrature(self)
        return self._clock

    def fermat_length(self) -> float:
        return self.clock().total

    def alpha_length(self) -> float:
        if self.parametrization == "fermat":
            return self._base.alpha_length()
        return self.C_x

    def sample(self, ts):
        """Exact ``(coords, velocities, charts)`` at the parameters ``ts``.

        The curve is re-integrated so that the integrator lands on every
        requested parameter; nothing is interpolated.
        """
        ts = np.asarray(ts, dtype=float)
        if self.parametrization == "fermat":
            base = self._base
            ck = base.clock()
            s = ck.inverse(ts * ck.total)
            X, V, C = base.sample(s)
            _, Fs = speeds_along(self.scenario, C, X, V)
            return X, V * (ck.total / Fs)[:, None], C
        uniq = np.unique(ts)
        y0 = np.concatenate([self.x0.coords, self.v0])
        traj = run_kernel(self.scenario, kernel.MODE_GEODESIC, self.x0.chart_id, y0,
                          1.0, self.tol, t_eval=uniq)
        idx = pick_nodes(traj, ts)
        n = self.n
        return traj.y[idx, :n], traj.y[idx, n:2 * n], traj.charts[idx]

    def speeds(self):
        return speeds_along(self.scenario, self.charts, self.coords, self.velocities)


def _solution_from_traj(scenario, x0, v0, traj, tol) -> GeodesicSolution:
    n = scenario.dimension
    X = traj.y[:, :n]
    V = traj.y[:, n:2 * n]
    a, Fs = speeds_along(scenario, traj.charts, X, V)
    C = float(a[0])
    switches = [
        {"s": float(traj.s[i]), "from": int(traj.charts[i]), "to": int(traj.charts[i + 1])}
        for i in traj.switch_indices()
    ]
    return GeodesicSolution(
        scenario, x0, np.array(v0, dtype=float), traj.s.copy(), X.copy(), traj.charts.copy(),
        V.copy(), C, float(np.max(np.abs(a - C))), switches, tol,
        F_speed_drift=float(np.max(np.abs(Fs - Fs.mean()))),
    )


def integrate_geodesic(scenario: StationaryScenario, x0: ChartPoint, v0, tol: float = 1e-10,
                       t_eval=None) -> GeodesicSolution:
    """Integrate the constant alpha-speed Fermat geodesic on ``[0, 1]``."""
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    x0 = _checked(scenario, x0)
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (scenario.dimension,) or not np.any(v0):
        raise ValueError("v0 must be a nonzero vector of the scenario dimension")
    traj = run_kernel(scenario, kernel.MODE_GEODESIC, x0.chart_id,
                      np.concatenate([x0.coords, v0]), 1.0, tol, t_eval=t_eval)
    return _solution_from_traj(scenario, x0, v0, traj, tol)


def reparametrize_finsler_speed(geod: GeodesicSolution) -> GeodesicSolution:
    """Same image, parametrized on ``[0, 1]`` with constant Fermat speed."""
    if geod.parametrization == "fermat":
        return geod
    ck = geod.clock()
    sig = ck(geod.grid) / ck.total
    _, Fs = geod.speeds()
    V = geod.velocities * (ck.total / Fs)[:, None]
    a, Fnew = speeds_along(geod.scenario, geod.charts, geod.coords, V)
    return GeodesicSolution(
        geod.scenario, geod.x0, V[0].copy(), sig, geod.coords.copy(), geod.charts.copy(), V,
        float(a[0]), float(np.max(np.abs(a - a[0]))), list(geod.chart_switches), geod.tol,
        parametrization="fermat", F_speed_drift=float(np.max(np.abs(Fnew - ck.total))),
        geodesic_id=geod.geodesic_id, _base=geod,
    )


# -- shooting ------------------------------------------------------------------


@dataclass
class ShootingProblem:
    p0: ChartPoint
    q0: ChartPoint
    seed_velocities: np.ndarray
    newton_tol: float = 1e-9
    max_newton_iters: int = 40
    dedupe_radius: float | None = None   # None: 1e-4 * C_x per candidate
    tol: float = 1e-10
    allow_loops: bool = False

    def __post_init__(self):
        self.seed_velocities = np.atleast_2d(np.asarray(self.seed_velocities, dtype=float))
        if self.newton_tol <= 0 or self.tol <= 0 or self.max_newton_iters < 1:
            raise ValueError("tolerances and iteration caps must be positive")
        if np.any(np.linalg.norm(self.seed_velocities, axis=1) == 0):
            raise ValueError("seed velocities must be nonzero")


class ConnectResult(list):
    """List of geodesics with shooting diagnostics attached."""

    def __init__(self, items=(), diagnostics=None):
        super().__init__(items)
        self.diagnostics = diagnostics or {}


def shoot(scenario, x0: ChartPoint, v0, tol=1e-10, t_eval=None):
    """Endpoint and exact shooting Jacobian ``d x(1) / d v0`` (in the end chart)."""
    n = scenario.dimension
    al, om = alpha_omega_along(scenario, [x0.chart_id], x0.coords[None, :])
    cc = al[0] @ np.asarray(v0, dtype=float)
    y0 = np.concatenate([x0.coords, v0, np.zeros(n * n), np.eye(n).ravel()])
    traj = run_kernel(scenario, kernel.MODE_FERMAT_JACOBI, x0.chart_id, y0, 1.0, tol,
                      ncol=n, colconst=cc, t_eval=t_eval)
    y = traj.y[-1]
    end = ChartPoint(int(traj.charts[-1]), y[:n])
    return end, y[2 * n:2 * n + n * n].reshape(n, n), traj


def residual(atlas, q0: ChartPoint, end: ChartPoint) -> np.ndarray:
    """``q0 - end`` in the chart of ``end`` (reduced modulo the lattice on the torus)."""
    q = atlas.transition(q0, end.chart_id) if q0.chart_id != end.chart_id else q0
    r = q.coords - end.coords
    return r - atlas.lattice_offset(r)


def _newton(scenario, problem: ShootingProblem, v0, tol, target, iters, backtracks=8,
            stall=None):
    p0 = problem.p0
    v = np.array(v0, dtype=float)
    try:
        end, J, _ = shoot(scenario, p0, v, tol)
        r = residual(scenario.atlas, problem.q0, end)
    except (NumericalFailure, ValueError, ZeroDivisionError):
        return None
    rn = float(np.linalg.norm(r))
    scale = max(float(np.linalg.norm(v)), 1.0)
    history = [rn]
    for it in range(iters):
        if rn < target:
            return v, rn
        if stall and it >= stall and rn > 0.5 * history[it - stall]:
            return None
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, r, rcond=None)[0]
        sn = float(np.linalg.norm(step))
        if sn > 0.5 * scale:
            step *= 0.5 * scale / sn
        lam = 1.0
        for _ in range(backtracks):
            vt = v + lam * step
            try:
                end_t, J_t, _ = shoot(scenario, p0, vt, tol)
                r_t = residual(scenario.atlas, problem.q0, end_t)
            except (NumericalFailure, ValueError, ZeroDivisionError):
                lam *= 0.5
                continue
            rt = float(np.linalg.norm(r_t))
            if rt < rn or rt < target:
                break
            lam *= 0.5
        else:
            return None
        v, J, r, rn = vt, J_t, r_t, rt
        history.append(rn)
        scale = max(float(np.linalg.norm(v)), 1.0)
        if not np.any(v):
            return None
    return (v, rn) if rn < target else None


def _loose_task(args):
    scenario, problem, v0 = args
    return _newton(scenario, problem, v0, LOOSE_TOL, LOOSE_TARGET, LOOSE_ITERS, backtracks=4,
                   stall=4)


def _map(fn, items):
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(items) < 2 * workers:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _alpha_norm(scenario, x: ChartPoint, v) -> float:
    al, _ = alpha_omega_along(scenario, [x.chart_id], x.coords[None, :])
    return float(np.sqrt(v @ al[0] @ v))


def connect(scenario: StationaryScenario, problem: ShootingProblem) -> ConnectResult:
    """All geodesics from ``p0`` to ``q0`` reached from the seed velocities.

    Each seed first runs a damped Newton iteration at loose integration
    tolerance; the distinct candidates are then polished at ``problem.tol``
    until the endpoint residual drops below ``problem.newton_tol``.
    """
    atlas = scenario.atlas
    p0 = atlas.check(problem.p0)
    q0 = atlas.check(problem.q0)
    try:
        coincide = float(np.linalg.norm(atlas.displacement(p0, q0))) == 0.0
    except ChartError:
        coincide = False          # neither point lies in the other's chart
    if coincide and not problem.allow_loops:
        raise ValueError("p0 == q0 requires allow_loops=True")

    def radius(v):
        if problem.dedupe_radius is not None:
            return problem.dedupe_radius
        return 1e-4 * _alpha_norm(scenario, p0, v)

    loose = _map(_loose_task, [(scenario, problem, v) for v in problem.seed_velocities])
    candidates = []
    for res in loose:
        if res is None:
            continue
        v = res[0]
        if any(np.linalg.norm(v - c) < 10 * radius(c) for c in candidates):
            continue
        candidates.append(v)

    found = []
    failed_polish = 0
    for v in candidates:
        res = _newton(scenario, problem, v, problem.tol, problem.newton_tol, problem.max_newton_iters)
        if res is None:
            failed_polish += 1
            continue
        v = res[0]
        if _alpha_norm(scenario, p0, v) < 1e-8:
            continue
        if any(np.linalg.norm(v - g.v0) < radius(g.v0) for g in found):
            continue
        geo = integrate_geodesic(scenario, p0, v, problem.tol)
        geo.endpoint_residual = res[1]
        found.append(geo)
    found.sort(key=lambda g: g.fermat_length())
    for i, g in enumerate(found):
        g.geodesic_id = i
    diag = {
        "seeds": int(len(problem.seed_velocities)),
        "converged_loose": int(sum(r is not None for r in loose)),
        "dropped": int(sum(r is None for r in loose)) + failed_polish,
        "candidates": len(candidates),
        "geodesics": len(found),
    }
    return ConnectResult(found, diag)


def seed_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Unit directions: a uniform angular grid in 2D, scrambled Halton points otherwise."""
    rng = np.random.default_rng(seed)
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * (np.arange(count) + rng.uniform(0.0, 1.0)) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    pts = qmc.Halton(d=n, scramble=True, seed=rng).random(count)
    z = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def seed_velocities(scenario: StationaryScenario, p0: ChartPoint, L_max: float,
                    seed_budget: int | None = None, n_directions: int | None = None,
                    seed: int = 0) -> np.ndarray:
    """Seeds whose alpha-lengths span ``(0, L_max]`` over a direction grid."""
    n = scenario.dimension
    ndir = n_directions or (64 if n == 2 else 64 * (n - 1) if n > 2 else 2)
    if seed_budget is None:
        seed_budget = ndir * max(4, math.ceil(2 * L_max / math.pi))
    nspeed = max(1, seed_budget // ndir)
    al, _ = alpha_omega_along(scenario, [p0.chart_id], p0.coords[None, :])
    Lc = np.linalg.cholesky(al[0])
    dirs = np.linalg.solve(Lc.T, seed_directions(n, ndir, seed).T).T  # alpha-unit
    levels = L_max * np.arange(1, nspeed + 1) / nspeed
    return np.array([c * d for c in levels for d in dirs])
