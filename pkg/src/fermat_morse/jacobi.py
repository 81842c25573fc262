"""Jacobi fields, conjugate instants and the Morse index of Fermat geodesics.

Jacobi fields are propagated in covariant form.  With ``P = nabla_{x'} J``
the linearized constant alpha-speed geodesic equation reads

    J'' = -R(J, x')x' - (c0 / C_x) Omega x' - C_x (nabla_J Omega) x' - C_x Omega J'

with ``c0 = alpha(x(0))[x'(0), J'(0)]`` (constant along the geodesic).  The
fundamental solution starts from ``J(0) = 0`` and ``J'(0)`` an
alpha-orthonormal frame at ``x(0)``; conjugate instants are the parameters at
which the resulting matrix drops rank.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from . import kernel
from .charts import ChartPoint
from .errors import DegenerateHypothesis
from .geodesic import (
    GeodesicSolution,
    alpha_omega_along,
    pick_nodes,
    reparametrize_finsler_speed,
    run_kernel,
)
from .geometry import program_args
from .randers import F2_derivatives

DEFAULT_RANK_TOL = 1e-6
N_UNIFORM = 400
ENDPOINT_WINDOW = 1e-7


@dataclass
class ConjugateReport:
    instants: list            # [(s, multiplicity)], strictly increasing, inside (0, 1)
    mu: int
    endpoint_conjugate: bool
    rank_tol: float
    endpoint_multiplicity: int = 0
    geodesic_id: int | None = None
    warnings: list = field(default_factory=list)

    @property
    def times(self) -> list:
        return [s for s, _ in self.instants]

    @property
    def multiplicities(self) -> list:
        return [m for _, m in self.instants]

    def to_record(self) -> dict:
        return {
            "geodesic_id": self.geodesic_id,
            "instants": [float(s) for s in self.times],
            "multiplicities": [int(m) for m in self.multiplicities],
            "mu": int(self.mu),
            "endpoint_conjugate": bool(self.endpoint_conjugate),
        }


def alpha_frames(scenario, charts, X) -> np.ndarray:
    """Upper factors ``U`` with ``alpha = U^T U`` at each row (``U = L^T``)."""
    al, _ = alpha_omega_along(scenario, charts, X)
    return np.transpose(np.linalg.cholesky(al), (0, 2, 1))


# -- generic rank-drop detection --------------------------------------------------


def _singular_ratios(M: np.ndarray) -> np.ndarray:
    sv = np.linalg.svd(M, compute_uv=False)
    return sv / np.maximum(sv[..., :1], 1e-300)


def detect_rank_drops(matfun, rank_tol=DEFAULT_RANK_TOL, n_uniform=N_UNIFORM, extra_nodes=()):
    """Locate the zeros of ``det M(s)`` on ``(0, 1]``.

    ``matfun(ts)`` returns ``(M, sign, nodes)``: square matrices at ``ts``, an
    orientation sign per sample (chart inversions flip orientation) and the
    integrator nodes visited.  Returns ``(instants, endpoint_multiplicity,
    warnings)``.
    """
    ts = np.linspace(0.0, 1.0, n_uniform + 1)[1:]
    M, sign, nodes = matfun(ts)
    grid = np.unique(np.concatenate([ts, nodes[(nodes > 0) & (nodes <= 1)], list(extra_nodes)]))
    if grid.size != ts.size:
        M, sign, _ = matfun(grid)
    det = sign * np.linalg.det(M)
    ratios = _singular_ratios(M)
    rmin = ratios[:, -1]

    def det_at(s):
        Ms, sg, _ = matfun(np.array([s]))
        return float(sg[0] * np.linalg.det(Ms[0]))

    def rmin_at(s):
        Ms, _, _ = matfun(np.array([s]))
        return float(_singular_ratios(Ms[0])[-1])

    found = []
    notes = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        if det[i] == 0.0:
            found.append(a)
        elif det[i] * det[i + 1] < 0:
            fa, fb = det_at(a), det_at(b)
            if fa * fb < 0:
                found.append(brentq(det_at, a, b, xtol=1e-13, rtol=1e-15, maxiter=200))
            else:
                # a root sitting on a node: re-evaluation lands on the other side of zero
                found.append(a if abs(det[i]) < abs(det[i + 1]) else b)
    # even-multiplicity drops: local minima of the singular-value ratio
    for i in range(1, len(grid) - 1):
        if rmin[i] <= rmin[i - 1] and rmin[i] <= rmin[i + 1] and rmin[i] < 1e-2:
            a, b = grid[i - 1], grid[i + 1]
            if any(a <= f <= b for f in found):
                continue
            opt = minimize_scalar(rmin_at, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-12})
            if opt.fun < rank_tol:
                found.append(float(opt.x))
    small = rmin < rank_tol
    if np.count_nonzero(small) > 3 and np.ptp(grid[small]) > 1e-3:
        notes.append("tangential degeneracy: J(s) is rank deficient on an interval")

    instants = []
    endpoint_mult = 0
    for s in sorted(found):
        if s <= 1e-9:
            continue
        Ms, _, _ = matfun(np.array([s]))
        mult = int(np.count_nonzero(_singular_ratios(Ms[0]) < rank_tol))
        mult = max(mult, 1)
        if s >= 1.0 - ENDPOINT_WINDOW:
            endpoint_mult = max(endpoint_mult, mult)
            continue
        if instants and abs(s - instants[-1][0]) < 1e-9:
            continue
        instants.append((float(s), mult))
    end_mult = int(np.count_nonzero(ratios[-1] < rank_tol))
    endpoint_mult = max(endpoint_mult, end_mult)
    return instants, endpoint_mult, notes


# -- Fermat-side propagator ---------------------------------------------------------


class JacobiPropagator:
    """Fundamental matrix solution of the Jacobi equation along ``along``."""

    def __init__(self, along: GeodesicSolution):
        if along.parametrization != "alpha":
            raise ValueError("the propagator works on the constant alpha-speed parametrization")
        self.along = along
        sc = along.scenario
        n = sc.dimension
        x0 = along.x0
        U0 = alpha_frames(sc, [x0.chart_id], x0.coords[None, :])[0]
        self.frame0 = np.linalg.inv(U0)   # columns: alpha-orthonormal at x(0)
        al, _ = alpha_omega_along(sc, [x0.chart_id], x0.coords[None, :])
        self.colconst = self.frame0.T @ al[0] @ along.v0
        self.y0 = np.concatenate([x0.coords, along.v0, np.zeros(n * n), self.frame0.ravel()])
        self._cache = None

    @property
    def n(self) -> int:
        return self.along.n

    def integrate(self, ts=None):
        sc = self.along.scenario
        n = self.n
        traj = run_kernel(sc, kernel.MODE_FERMAT_JACOBI, self.along.x0.chart_id, self.y0, 1.0,
                          self.along.tol, ncol=n, colconst=self.colconst, t_eval=ts)
        return traj

    def states(self, ts):
        """``(X, V, J, P, charts, nodes)`` at ``ts``; ``J[k]`` is the n x n matrix at ``ts[k]``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        traj = self.integrate(np.unique(ts))
        idx = pick_nodes(traj, ts)
        n = self.n
        Y = traj.y[idx]
        J = Y[:, 2 * n:2 * n + n * n].reshape(-1, n, n)
        P = Y[:, 2 * n + n * n:2 * n + 2 * n * n].reshape(-1, n, n)
        return Y[:, :n], Y[:, n:2 * n], J, P, traj.charts[idx], traj.s

    def frame_matrices(self, ts):
        X, V, J, P, C, nodes = self.states(ts)
        U = alpha_frames(self.along.scenario, C, X)
        sign = np.where(C == self.along.x0.chart_id, 1.0, -1.0)
        return U @ J, sign, nodes

    def constant_drift(self, ts=None) -> float:
        """Max variation of ``alpha[x', J']`` along the geodesic over all columns."""
        ts = np.linspace(0, 1, 101) if ts is None else ts
        X, V, J, P, C, _ = self.states(ts)
        al, _ = alpha_omega_along(self.along.scenario, C, X)
        vals = np.einsum("ki,kij,kjc->kc", V, al, P)
        return float(np.max(np.abs(vals - vals[0])))


def jacobi_rhs(geod: GeodesicSolution, s: float, J_col, Jp_col, Jp0_col) -> np.ndarray:
    """Covariant second derivative ``J''`` of one Jacobi column at parameter ``s``."""
    sc = geod.scenario
    n = sc.dimension
    X, V, C = geod.sample(np.array([s]))
    al0, _ = alpha_omega_along(sc, [geod.x0.chart_id], geod.x0.coords[None, :])
    c0 = float(geod.v0 @ al0[0] @ np.asarray(Jp0_col, float))
    y = np.concatenate([X[0], V[0], np.asarray(J_col, float), np.asarray(Jp_col, float)])
    out = kernel.rhs(*program_args(sc), kernel.MODE_FERMAT_JACOBI, int(C[0]), y, 1,
                     np.array([c0]), 0.0)
    geo = kernel.local_geometry(*program_args(sc), int(C[0]), X[0])
    return out[3 * n:4 * n] + np.einsum("kij,i,j->k", geo["gamma"], V[0], Jp_col)


def conjugate_instants(geod: GeodesicSolution, rank_tol: float = DEFAULT_RANK_TOL,
                       n_uniform: int = N_UNIFORM) -> ConjugateReport:
    prop = JacobiPropagator(geod)
    instants, end_mult, notes = detect_rank_drops(prop.frame_matrices, rank_tol, n_uniform)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    n = geod.n
    notes = list(notes)
    for s, m in instants:
        if m >= n:
            notes.append(f"suspicious multiplicity {m} = n at s={s:.6g}")
    return ConjugateReport(
        instants=instants,
        mu=int(sum(m for _, m in instants)),
        endpoint_conjugate=end_mult > 0,
        rank_tol=rank_tol,
        endpoint_multiplicity=end_mult,
        geodesic_id=geod.geodesic_id,
        warnings=notes,
    )


def morse_index(geod: GeodesicSolution, rank_tol: float = DEFAULT_RANK_TOL,
                strict: bool = False) -> int:
    """Sum of multiplicities of interior conjugate instants.

    With ``strict=True`` an endpoint-conjugate geodesic raises
    :class:`DegenerateHypothesis` instead of returning its interior count.
    """
    rep = conjugate_instants(geod, rank_tol)
    if strict and rep.endpoint_conjugate:
        raise DegenerateHypothesis("s = 1 is a conjugate instant", rep)
    return rep.mu


# -- constant Fermat-speed cross-check ---------------------------------------------


def single_chart_samples(geod: GeodesicSolution, ts):
    """Samples of ``geod`` expressed in the single chart that keeps them smallest."""
    X, V, C = geod.sample(ts)
    atlas = geod.scenario.atlas
    best = None
    for cid in atlas.chart_ids:
        Xc, Vc = X.copy(), V.copy()
        for k in range(len(ts)):
            if C[k] != cid:
                p = ChartPoint(int(C[k]), X[k])
                Xc[k] = atlas.transition(p, cid).coords
                Vc[k] = atlas.push_vector(p, V[k], cid)
        size = float(np.max(np.linalg.norm(Xc, axis=1)))
        if best is None or size < best[0]:
            best = (size, cid, Xc, Vc)
    return best[1], best[2], best[3]


class FermatSpeedFlow:
    """Euler-Lagrange flow of ``F^2 / 2`` (constant Fermat speed) in one chart."""

    def __init__(self, scenario, chart: int):
        self.scenario = scenario
        self.chart = chart
        self.args = program_args(scenario)

    def rhs(self, _t, z):
        n = self.scenario.dimension
        x, y = z[:n], z[n:]
        al, dal, ddal, om, dom, ddom = kernel.metric_jet(*self.args, self.chart, x)
        _, F2x, _, _, F2xy, F2yy = F2_derivatives(al, dal, ddal, om, dom, ddom, y)
        acc = np.linalg.solve(0.5 * F2yy, 0.5 * F2x - 0.5 * F2xy.T @ y)
        return np.concatenate([y, acc])

    def solve(self, x0, y0, rtol=1e-12):
        z0 = np.concatenate([x0, y0])
        return solve_ivp(self.rhs, (0.0, 1.0), z0, method="DOP853", rtol=rtol, atol=1e-13,
                         dense_output=True)


def fermat_speed_conjugates(geod: GeodesicSolution, fd_step: float = 1e-6,
                            n_uniform: int = N_UNIFORM) -> list:
    """Conjugate parameters along the constant Fermat-speed parametrization.

    Independent of the covariant propagator: the flow is the Euler-Lagrange
    equation of ``F^2 / 2`` and its Jacobian ``d x(sigma) / d y(0)`` is taken by
    central finite differences.  Returns the parameters ``sigma`` in ``(0, 1)``.
    """
    fgeo = reparametrize_finsler_speed(geod)
    chart, X, V = single_chart_samples(fgeo, np.array([0.0]))
    flow = FermatSpeedFlow(geod.scenario, chart)
    n = geod.n
    x0, y0 = X[0], V[0]
    h = fd_step * max(1.0, float(np.linalg.norm(y0)))
    sols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        sols.append((flow.solve(x0, y0 + e), flow.solve(x0, y0 - e)))

    def jac(s):
        return np.column_stack([(p.sol(s)[:n] - m.sol(s)[:n]) / (2 * h) for p, m in sols])

    grid = np.linspace(0, 1, n_uniform + 1)[1:]
    dets = np.array([np.linalg.det(jac(s)) for s in grid])
    out = []
    for i in range(len(grid) - 1):
        if dets[i] * dets[i + 1] < 0:
            r = brentq(lambda s: np.linalg.det(jac(s)), grid[i], grid[i + 1], xtol=1e-12)
            if r < 1.0 - ENDPOINT_WINDOW:
                out.append(float(r))
    return out


def alpha_to_fermat_parameter(geod: GeodesicSolution, s) -> np.ndarray:
    ck = geod.clock()
    return ck(np.asarray(s, dtype=float)) / ck.total
