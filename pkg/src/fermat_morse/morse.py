"""Geodesic enumeration, truncated Morse series and the lensing count.

The enumeration runs the shooting solver twice, on two disjoint seed grids
of equal size.  The union is what a doubled budget would see; the run is
called *seed stable* when the second grid adds nothing new.

Reliability of an index ``k`` means that every geodesic of index at most
``k`` is guaranteed to have Fermat length within ``L_max``.  Only the round
sphere (index ``k`` forces length above ``k pi rho``) and the flat constant
scenarios (no conjugate points at all) carry such a bound here; any other
scenario reports an empty reliable prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charts import ChartPoint
from .errors import DegenerateHypothesis
from .fields import ScenarioError
from .geodesic import ShootingProblem, alpha_omega_along, connect, seed_velocities
from .jacobi import DEFAULT_RANK_TOL, ConjugateReport, conjugate_instants
from .scenario import StationaryScenario

#: seeds reach alpha-lengths up to this factor times the drift-corrected budget
SEED_MARGIN = 1.1
#: relative slack when comparing a Fermat length against ``L_max``
LENGTH_SLACK = 1e-9


@dataclass
class Enumeration:
    entries: list                 # [(GeodesicSolution, ConjugateReport)] sorted by F-length
    L_max: float
    seed_budget: int
    seed_stable: bool
    diagnostics: dict = field(default_factory=dict)
    scenario: StationaryScenario | None = field(default=None, repr=False)
    p0: ChartPoint | None = None
    q0: ChartPoint | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def geodesics(self) -> list:
        return [g for g, _ in self.entries]

    @property
    def indices(self) -> list:
        return [r.mu for _, r in self.entries]

    def to_records(self) -> list:
        out = []
        for g, r in self.entries:
            rec = r.to_record()
            rec["fermat_length"] = float(g.fermat_length())
            rec["alpha_length"] = float(g.alpha_length())
            rec["v0"] = [float(c) for c in g.v0]
            cls = homotopy_class(g, self.q0) if self.q0 is not None else None
            if cls is not None:
                rec["homotopy_class"] = list(cls)
            out.append(rec)
        return out


def _seed_reach(scenario: StationaryScenario, p0: ChartPoint, L_max: float) -> float:
    """Alpha-length the seeds must cover so that F-lengths up to ``L_max`` are reached."""
    al, om = alpha_omega_along(scenario, [p0.chart_id], p0.coords[None, :])
    eta = np.linalg.solve(al[0], om[0])
    eta_norm = float(np.sqrt(max(eta @ om[0], 0.0)))
    return SEED_MARGIN * L_max / max(1.0 - eta_norm, 0.05)


def _same(g, h) -> bool:
    scale = max(float(np.linalg.norm(g.v0)), 1e-12)
    return float(np.linalg.norm(g.v0 - h.v0)) < 1e-4 * scale


def enumerate_geodesics(scenario: StationaryScenario, p0: ChartPoint, q0: ChartPoint,
                        L_max: float, seed_budget: int | None = None, seed: int = 0,
                        rank_tol: float = DEFAULT_RANK_TOL, tol: float = 1e-10,
                        check_budget: bool = True) -> Enumeration:
    """Geodesics from ``p0`` to ``q0`` with Fermat length at most ``L_max``.

    Raises :class:`DegenerateHypothesis` if some geodesic found has ``q0``
    conjugate to ``p0`` along it.
    """
    if not L_max > 0:
        raise ValueError("L_max must be positive")
    p0 = scenario.atlas.check(p0)
    q0 = scenario.atlas.check(q0)
    reach = _seed_reach(scenario, p0, L_max)
    grid_a = seed_velocities(scenario, p0, reach, seed_budget, seed=seed)
    budget = len(grid_a)
    found = list(connect(scenario, ShootingProblem(p0, q0, grid_a, tol=tol)))
    diag = {"seeds": budget, "first_pass": len(found)}
    stable = True
    if check_budget:
        grid_b = seed_velocities(scenario, p0, reach, seed_budget, seed=seed + 1)
        extra = [g for g in connect(scenario, ShootingProblem(p0, q0, grid_b, tol=tol))
                 if not any(_same(g, h) for h in found)]
        diag["seeds"] += len(grid_b)
        # only new curves inside the budget break stability
        stable = not any(g.fermat_length() <= L_max * (1 + LENGTH_SLACK) for g in extra)
        found.extend(extra)
    kept = [g for g in found if g.fermat_length() <= L_max * (1 + LENGTH_SLACK)]
    kept.sort(key=lambda g: g.fermat_length())
    entries = []
    for i, g in enumerate(kept):
        g.geodesic_id = i
        rep = conjugate_instants(g, rank_tol)
        if rep.endpoint_conjugate:
            raise DegenerateHypothesis(
                "endpoints are conjugate along a geodesic; the enumeration needs "
                "two non-conjugate points", rep)
        entries.append((g, rep))
    diag["geodesics"] = len(entries)
    diag["beyond_budget"] = len(found) - len(kept)
    return Enumeration(entries, float(L_max), int(diag["seeds"]), bool(stable), diag,
                       scenario, p0, q0)


def homotopy_class(geod, q0: ChartPoint):
    """Lattice vector of a torus geodesic (``None`` on other manifolds)."""
    atlas = geod.scenario.atlas
    if atlas.kind != "torus":
        return None
    nb = atlas.base_dimension
    per = np.asarray(atlas.periods, dtype=float)
    base = atlas.displacement(geod.x0, q0)
    travelled = geod.coords[-1] - geod.coords[0]
    return tuple(int(k) for k in np.round((travelled[:nb] - base[:nb]) / per))


# -- series and profiles ---------------------------------------------------------------


def reliable_degree(scenario: StationaryScenario, L_max: float) -> int:
    """Largest ``k`` such that all geodesics of index at most ``k`` lie within ``L_max``.

    ``-1`` means nothing is reliable.  On flat constant scenarios every
    geodesic has index 0 and the value 1 records that index 0 is settled
    and that ``M_1 = 0`` is exact.
    """
    if scenario.is_flat_constant():
        return 1
    if scenario.is_round_sphere():
        rho = scenario.sphere_alpha_radius()
        return int(math.floor(L_max / (math.pi * rho) * (1 + 1e-12))) - 1
    return -1


@dataclass
class MorseSeries:
    counts: dict                      # index -> number of geodesics
    truncation_degree: int
    L_max: float
    classes: dict | None = None       # torus: lattice vector -> counts
    seed_stable: bool = True

    def __post_init__(self):
        self.counts = {int(k): int(v) for k, v in sorted(self.counts.items()) if v}
        if any(k < 0 or v < 0 for k, v in self.counts.items()):
            raise ValueError("indices and counts must be nonnegative")

    def M(self, k: int) -> int:
        return self.counts.get(k, 0)

    @property
    def partial(self) -> bool:
        top = max(self.counts, default=0)
        return self.truncation_degree < max(top, 1)

    @property
    def budget_complete(self) -> bool:
        return self.seed_stable and self.truncation_degree >= 1

    def to_record(self) -> dict:
        rec = {
            "counts": {str(k): v for k, v in self.counts.items()},
            "reliable_degree": int(self.truncation_degree),
            "L_max": float(self.L_max),
            "partial": bool(self.partial),
            "budget_complete": bool(self.budget_complete),
        }
        if self.classes is not None:
            rec["classes"] = {",".join(map(str, c)): {str(k): v for k, v in cnt.items()}
                              for c, cnt in sorted(self.classes.items())}
        return rec


def _tally(indices) -> dict:
    out: dict = {}
    for k in indices:
        out[int(k)] = out.get(int(k), 0) + 1
    return out


def morse_series(enum: Enumeration) -> MorseSeries:
    classes = None
    if enum.scenario is not None and enum.scenario.atlas.kind == "torus":
        classes = {}
        for g, r in enum.entries:
            cls = homotopy_class(g, enum.q0)
            classes.setdefault(cls, {})
            classes[cls][r.mu] = classes[cls].get(r.mu, 0) + 1
    degree = reliable_degree(enum.scenario, enum.L_max) if enum.scenario is not None else -1
    return MorseSeries(_tally(enum.indices), degree, enum.L_max, classes, enum.seed_stable)


@dataclass(frozen=True)
class PoincareProfile:
    name: str
    betti_fn: object = field(repr=False)
    classwise: bool = False

    def B(self, k: int) -> int:
        return int(self.betti_fn(k))

    @classmethod
    def contractible(cls):
        return cls("contractible", lambda k: 1 if k == 0 else 0)

    @classmethod
    def sphere_path_space(cls, n: int = 2):
        """Based path space of ``S^n``: one generator in each degree divisible by ``n - 1``."""
        if n < 2:
            raise ValueError("sphere dimension must be at least 2")
        return cls(f"sphere-based-path-space({n})", lambda k: 1 if k % (n - 1) == 0 else 0)

    @classmethod
    def torus_components(cls):
        return cls("torus-components", lambda k: 1 if k == 0 else 0, classwise=True)


def profile_for(scenario: StationaryScenario) -> PoincareProfile:
    if scenario.atlas.kind == "torus":
        return PoincareProfile.torus_components()
    if scenario.atlas.kind == "sphere":
        return PoincareProfile.sphere_path_space(scenario.atlas.base_dimension)
    return PoincareProfile.contractible()


def _recurrence(counts: dict, profile: PoincareProfile, degree: int) -> list:
    q_prev, out = 0, []
    for k in range(degree):
        q = counts.get(k, 0) - profile.B(k) - q_prev
        out.append(int(q))
        q_prev = q
    return out


def check_morse_relations(series: MorseSeries, profile: PoincareProfile) -> dict:
    """Solve ``Q_k = M_k - B_k - Q_(k-1)`` on the reliable prefix ``k <= d - 1``."""
    d = series.truncation_degree
    if profile.classwise:
        if series.classes is None:
            raise ValueError("a classwise profile needs a series grouped by homotopy class")
        per_class = {c: _recurrence(cnt, profile, d) for c, cnt in sorted(series.classes.items())}
        valid = all(q >= 0 for qs in per_class.values() for q in qs)
        q_total = [sum(qs[k] for qs in per_class.values()) for k in range(max(d, 0))]
        return {"Q_coeffs": q_total, "valid": bool(valid),
                "classes": {",".join(map(str, c)): qs for c, qs in per_class.items()},
                "reliable_degree": d, "profile": profile.name}
    qs = _recurrence(series.counts, profile, d)
    return {"Q_coeffs": qs, "valid": all(q >= 0 for q in qs), "reliable_degree": d,
            "profile": profile.name}


def morse_report(scenario, p0, q0, L_max, seed_budget=None, seed=0, profile=None,
                 rank_tol=DEFAULT_RANK_TOL) -> dict:
    enum = enumerate_geodesics(scenario, p0, q0, L_max, seed_budget, seed, rank_tol)
    series = morse_series(enum)
    rel = check_morse_relations(series, profile or profile_for(scenario))
    rec = series.to_record()
    rec.update({"Q_coeffs": rel["Q_coeffs"], "valid": rel["valid"], "profile": rel["profile"],
                "seed_stable": enum.seed_stable, "geodesics": enum.to_records()})
    return rec


# -- lensing -------------------------------------------------------------------------------


def lensing_count(scenario: StationaryScenario, p: ChartPoint, q0: ChartPoint, L_max: float,
                  seed_budget: int | None = None, t0: float = 0.0, seed: int = 0,
                  rank_tol: float = DEFAULT_RANK_TOL) -> dict:
    """Number of future lightlike geodesics from ``(p, t0)`` to the observer at ``q0``."""
    from .bridge import lift_lightlike

    if not scenario.contractible:
        raise ScenarioError("lensing_count needs a contractible base manifold")
    enum = enumerate_geodesics(scenario, p, q0, L_max, seed_budget, seed, rank_tol)
    images = []
    for g, r in enum.entries:
        lift = lift_lightlike(scenario, g, t0)
        images.append((lift.arrival_time, r.mu, lift.causal_residual))
    images.sort()
    count = len(images)
    return {
        "count": count,
        "parity": "odd" if count % 2 else "even",
        "arrival_times": [float(a) for a, _, _ in images],
        "indices": [int(m) for _, m, _ in images],
        "max_causal_residual": max((abs(c) for _, _, c in images), default=0.0),
        "budget_complete": bool(enum.seed_stable),
        "seeds": enum.seed_budget,
    }


__all__ = [
    "Enumeration", "enumerate_geodesics", "homotopy_class", "reliable_degree", "MorseSeries",
    "morse_series", "PoincareProfile", "profile_for", "check_morse_relations", "morse_report",
    "lensing_count", "ConjugateReport",
]
