"""Stationary scenarios: an atlas plus the fields g0, delta, beta.

Scenario files are YAML (JSON is accepted too, being a YAML subset)::

    dimension: 2
    manifold: {kind: sphere, radius: 1.0}     # or "euclidean", or {kind: torus, periods: [1, 1]}
    g0:    {kind: catalog-entry, name: round-sphere, parameters: [1.0]}
    delta: {kind: rotation, parameters: [0.1]}
    beta:  {kind: constant, parameters: [1.0]}
    globally_hyperbolic: true                 # optional tag, recorded but not verified

Unknown keys are rejected at every level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .charts import Atlas, ChartPoint
from .fields import (
    FieldSpec,
    ScenarioError,
    check_manifold_compatibility,
    pack_beta,
    pack_delta,
    pack_g0,
)

TOP_KEYS = {"dimension", "manifold", "g0", "delta", "beta", "globally_hyperbolic", "name"}
MANIFOLD_KEYS = {"kind", "radius", "periods"}
FIELD_KEYS = {"kind", "parameters", "name", "derivative_mode"}


@dataclass(frozen=True)
class Program:
    """Flat numeric encoding of a scenario, consumed by the kernels."""

    iprog: np.ndarray
    g0p: np.ndarray
    dp: np.ndarray
    bp: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.iprog[1])


@dataclass(frozen=True)
class StationaryScenario:
    atlas: Atlas
    g0: FieldSpec
    delta: FieldSpec
    beta: FieldSpec
    globally_hyperbolic: bool = False
    name: str = ""
    program: Program = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nb = self.atlas.base_dimension
        check_manifold_compatibility(self.atlas.kind, self.g0, self.delta, self.beta)
        g0c, g0p = pack_g0(self.g0, nb)
        dc, dp = pack_delta(self.delta, nb)
        bc, bp = pack_beta(self.beta, nb)
        fd = [int(s.derivative_mode == "finite-difference") for s in (self.g0, self.delta, self.beta)]
        iprog = np.array(
            [self.atlas.code, self.atlas.dimension, self.atlas.n_extra, g0c, dc, bc, *fd],
            dtype=np.int64,
        )
        prog = Program(iprog, np.ascontiguousarray(g0p, float), np.ascontiguousarray(dp, float),
                       np.ascontiguousarray(bp, float))
        object.__setattr__(self, "program", prog)

    @property
    def dimension(self) -> int:
        return self.atlas.dimension

    @property
    def contractible(self) -> bool:
        return self.atlas.contractible

    def point(self, coords, chart_id: int = 0) -> ChartPoint:
        return self.atlas.check(ChartPoint(chart_id, coords))

    def is_flat_constant(self) -> bool:
        """True when every coefficient is constant on a flat atlas."""
        return (
            self.atlas.kind in ("euclidean", "torus")
            and self.g0.kind == "constant"
            and self.delta.kind == "constant"
            and self.beta.kind == "constant"
        )

    def is_round_sphere(self) -> bool:
        """Round sphere without drift and with constant beta."""
        return (
            self.atlas.kind == "sphere"
            and self.atlas.n_extra == 0
            and not any(self.delta.parameters)
            and self.beta.kind == "constant"
        )

    def sphere_alpha_radius(self) -> float:
        """Radius of the round metric g0/beta (sphere scenarios only)."""
        return self.g0.parameters[0] / np.sqrt(self.beta.parameters[0])

    def to_dict(self) -> dict:
        man = {"kind": self.atlas.kind}
        if self.atlas.kind == "sphere":
            man["radius"] = self.atlas.radius
        if self.atlas.kind == "torus":
            man["periods"] = list(self.atlas.periods)
        out = {
            "dimension": self.atlas.dimension,
            "manifold": man,
            "g0": self.g0.to_dict(),
            "delta": self.delta.to_dict(),
            "beta": self.beta.to_dict(),
        }
        if self.globally_hyperbolic:
            out["globally_hyperbolic"] = True
        if self.name:
            out["name"] = self.name
        return out


def _field_from_dict(role: str, data) -> FieldSpec:
    if not isinstance(data, dict):
        raise ScenarioError(f"{role} must be a mapping")
    unknown = set(data) - FIELD_KEYS
    if unknown:
        raise ScenarioError(f"unknown keys in {role}: {sorted(unknown)}")
    if "kind" not in data:
        raise ScenarioError(f"{role} needs a kind")
    return FieldSpec(
        kind=data["kind"],
        parameters=tuple(data.get("parameters", ())),
        derivative_mode=data.get("derivative_mode", "analytic"),
        name=data.get("name"),
    )


def scenario_from_dict(data: dict) -> StationaryScenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    missing = {"dimension", "manifold", "g0", "delta", "beta"} - set(data)
    if missing:
        raise ScenarioError(f"missing scenario keys: {sorted(missing)}")
    man = data["manifold"]
    if isinstance(man, str):
        man = {"kind": man}
    if not isinstance(man, dict):
        raise ScenarioError("manifold must be a name or a mapping")
    unknown = set(man) - MANIFOLD_KEYS
    if unknown:
        raise ScenarioError(f"unknown keys in manifold: {sorted(unknown)}")
    try:
        atlas = Atlas(
            kind=man.get("kind", ""),
            dimension=int(data["dimension"]),
            radius=float(man.get("radius", 1.0)),
            periods=tuple(man.get("periods", ())),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return StationaryScenario(
        atlas=atlas,
        g0=_field_from_dict("g0", data["g0"]),
        delta=_field_from_dict("delta", data["delta"]),
        beta=_field_from_dict("beta", data["beta"]),
        globally_hyperbolic=bool(data.get("globally_hyperbolic", False)),
        name=str(data.get("name", "")),
    )


def load_scenario(path) -> StationaryScenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(data)


def dump_scenario(scenario: StationaryScenario, path):
    Path(path).write_text(yaml.safe_dump(scenario.to_dict(), sort_keys=False))


# -- convenience constructors used by tests, benchmarks and the CLI ---------


def flat(n=2, delta=None, beta=1.0, g0=1.0, name="flat") -> StationaryScenario:
    delta = np.zeros(n) if delta is None else np.asarray(delta, float)
    return StationaryScenario(
        Atlas("euclidean", n),
        FieldSpec("constant", np.ravel(g0)),
        FieldSpec("constant", delta),
        FieldSpec("constant", (beta,)),
        name=name,
    )


def torus(periods=(1.0, 1.0), delta=None, beta=1.0, name="torus") -> StationaryScenario:
    n = len(periods)
    delta = np.zeros(n) if delta is None else np.asarray(delta, float)
    return StationaryScenario(
        Atlas("torus", n, periods=tuple(periods)),
        FieldSpec("constant", (1.0,)),
        FieldSpec("constant", delta),
        FieldSpec("constant", (beta,)),
        name=name,
    )


def sphere(radius=1.0, eps=0.0, beta=1.0, beta_tilt=0.0, name="sphere") -> StationaryScenario:
    """Round sphere with rotational drift ``eps`` and ``beta = beta + beta_tilt Z``."""
    if beta_tilt:
        bspec = FieldSpec("catalog-entry", (beta, beta_tilt), name="sphere-height")
    else:
        bspec = FieldSpec("constant", (beta,))
    dspec = FieldSpec("rotation", (eps,)) if eps else FieldSpec("constant", (0.0, 0.0))
    return StationaryScenario(
        Atlas("sphere", 2, radius=radius),
        FieldSpec("catalog-entry", (radius,), name="round-sphere"),
        dspec,
        bspec,
        globally_hyperbolic=False,
        name=name,
    )


def to_json(scenario: StationaryScenario) -> str:
    return json.dumps(scenario.to_dict(), sort_keys=True)


def lens(A=1.0, sigma=1.0, center=(0.0, 0.0), swirl=None, name="lens") -> StationaryScenario:
    """Flat plane whose beta dips as ``1 / (1 + A bump)``: a converging optical lens.

    ``swirl = (A_d, s_d, w)`` adds a radial-bump drift centred at the same point.
    """
    c = tuple(float(v) for v in center)
    n = len(c)
    dspec = (FieldSpec("radial-bump", (*swirl, *c)) if swirl is not None
             else FieldSpec("constant", (0.0,) * n))
    return StationaryScenario(
        Atlas("euclidean", n),
        FieldSpec("constant", (1.0,)),
        dspec,
        FieldSpec("radial-bump", (A, sigma, *c)),
        globally_hyperbolic=True,
        name=name,
    )


def flat_bump_drift(A=0.4, sigma=1.0, swirl=1.0, beta=1.0, center=(0.0, 0.0),
                    name="flat-bump-drift") -> StationaryScenario:
    """Flat plane with a localized swirling drift ``delta`` and constant ``beta``."""
    c = tuple(float(v) for v in center)
    return StationaryScenario(
        Atlas("euclidean", len(c)),
        FieldSpec("constant", (1.0,)),
        FieldSpec("radial-bump", (A, sigma, swirl, *c)),
        FieldSpec("constant", (beta,)),
        globally_hyperbolic=True,
        name=name,
    )


def catalog() -> dict:
    """Named scenarios shipped with the package (also written to ``scenarios/*.yaml``)."""
    entries = [
        flat(name="flat"),
        flat(delta=(0.3, 0.1), name="flat-drift"),
        flat(n=3, delta=(0.1, 0.0, 0.2), beta=2.0, name="flat3-drift"),
        flat_bump_drift(name="flat-bump-drift"),
        torus(name="torus"),
        torus(delta=(0.2, 0.1), name="torus-drift"),
        sphere(name="sphere"),
        sphere(eps=0.1, name="sphere-rotating"),
        sphere(eps=0.05, beta_tilt=0.2, name="sphere-tilted"),
        lens(name="lens"),
        lens(A=2.0, swirl=(0.3, 1.0, 1.0), name="lens-swirl"),
    ]
    # every entry has a forward-complete Fermat metric (compact base, or flat
    # outside a compact set), hence a globally hyperbolic spacetime
    entries = [replace(sc, globally_hyperbolic=True) for sc in entries]
    return {sc.name: sc for sc in entries}
