"""Chart atlases for the built-in base manifolds.

Three atlases are supported:

* ``euclidean``: a single global chart on R^n.
* ``torus``: a single periodic chart.  Coordinates are never wrapped; points
  that differ by a lattice vector represent the same point of the torus.
* ``sphere``: two stereographic charts of the round 2-sphere.  Chart 0
  projects from the north pole, chart 1 from the south pole, and the
  transition between them is the inversion ``x -> x / |x|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Integrators move to the other sphere chart once ``|x|`` exceeds this.
SPHERE_SWITCH_RADIUS = 1.5
#: Declared open domain of each stereographic chart.
SPHERE_DOMAIN_RADIUS = 1.0e3
#: Smallest ``|x|`` admitted in the overlap of the two sphere charts.
SPHERE_OVERLAP_MIN = 1.0 / SPHERE_DOMAIN_RADIUS

MANIFOLD_CODES = {"euclidean": 0, "torus": 1, "sphere": 2}


class ChartError(ValueError):
    """Point outside the chart domain or outside a chart overlap."""


@dataclass(frozen=True)
class ChartPoint:
    chart_id: int
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.array(self.coords, dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __repr__(self):
        return f"ChartPoint({self.chart_id}, {np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True)
class Atlas:
    """Chart atlas of one base manifold.

    ``n_extra`` counts trailing flat coordinates appended by
    :func:`fermat_morse.bridge.extend_static`; they are carried through
    transitions unchanged.
    """

    kind: str
    dimension: int
    radius: float = 1.0
    periods: tuple = field(default_factory=tuple)
    n_extra: int = 0

    def __post_init__(self):
        if self.kind not in MANIFOLD_CODES:
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "sphere" and self.dimension - self.n_extra != 2:
            raise ValueError("the sphere atlas is two-dimensional")
        if self.kind == "torus":
            periods = tuple(float(p) for p in self.periods) or (1.0,) * (self.dimension - self.n_extra)
            if len(periods) != self.dimension - self.n_extra or min(periods) <= 0:
                raise ValueError("torus periods must be positive, one per base dimension")
            object.__setattr__(self, "periods", periods)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def code(self) -> int:
        return MANIFOLD_CODES[self.kind]

    @property
    def base_dimension(self) -> int:
        return self.dimension - self.n_extra

    @property
    def chart_ids(self) -> tuple:
        return (0, 1) if self.kind == "sphere" else (0,)

    @property
    def contractible(self) -> bool:
        return self.kind == "euclidean"

    def in_domain(self, point: ChartPoint) -> bool:
        if point.chart_id not in self.chart_ids or point.dim != self.dimension:
            return False
        if not np.all(np.isfinite(point.coords)):
            return False
        if self.kind == "sphere":
            return float(np.linalg.norm(point.coords[:2])) < SPHERE_DOMAIN_RADIUS
        return True

    def check(self, point: ChartPoint) -> ChartPoint:
        if not self.in_domain(point):
            raise ChartError(f"{point!r} is outside the declared chart domain")
        return point

    def transition(self, point: ChartPoint, target_chart: int) -> ChartPoint:
        """Express ``point`` in ``target_chart``."""
        self.check(point)
        if target_chart == point.chart_id:
            return point
        if target_chart not in self.chart_ids:
            raise ChartError(f"chart {target_chart} does not exist on {self.kind}")
        x = point.coords[:2]
        r2 = float(x @ x)
        if r2 < SPHERE_OVERLAP_MIN**2:
            raise ChartError(f"{point!r} is not in the chart overlap")
        coords = point.coords.copy()
        coords[:2] = x / r2
        return ChartPoint(target_chart, coords)

    def transition_jacobian(self, point: ChartPoint, target_chart: int) -> np.ndarray:
        """Differential of the transition map at ``point``."""
        n = self.dimension
        if target_chart == point.chart_id:
            return np.eye(n)
        x = point.coords[:2]
        r2 = float(x @ x)
        jac = np.eye(n)
        jac[:2, :2] = (np.eye(2) * r2 - 2.0 * np.outer(x, x)) / r2**2
        return jac

    def push_vector(self, point: ChartPoint, vec, target_chart: int) -> np.ndarray:
        return self.transition_jacobian(point, target_chart) @ np.asarray(vec, dtype=float)

    def preferred_chart(self, point: ChartPoint) -> ChartPoint:
        """Return the representation the integrators would use."""
        if self.kind == "sphere" and np.linalg.norm(point.coords[:2]) > SPHERE_SWITCH_RADIUS:
            return self.transition(point, 1 - point.chart_id)
        return point

    def lattice_offset(self, coords) -> np.ndarray:
        """Nearest lattice vector to ``coords`` (torus only; zeros otherwise)."""
        coords = np.asarray(coords, dtype=float)
        out = np.zeros_like(coords)
        if self.kind == "torus":
            per = np.asarray(self.periods)
            nb = self.base_dimension
            out[:nb] = np.round(coords[:nb] / per) * per
        return out

    def displacement(self, a: ChartPoint, b: ChartPoint) -> np.ndarray:
        """Coordinate difference ``b - a`` with ``b`` moved into the chart of ``a``.

        On the torus the difference is reduced modulo the lattice.
        """
        bb = self.transition(b, a.chart_id)
        d = bb.coords - a.coords
        return d - self.lattice_offset(d)
