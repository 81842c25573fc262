"""Catalog of the coefficient fields g0, delta and beta.

Each field is described by a :class:`FieldSpec`.  The numerical evaluation
(values plus first and second partial derivatives) lives in the kernel
modules; this module validates specs and packs them into the flat parameter
arrays the kernels consume.

Catalog (``n`` is the base dimension, ``bump(x) = exp(-|x - c|^2 / s^2)``):

========  ================================  =========================================
role      kind / name                       parameters
========  ================================  =========================================
g0        constant                          ``[k]`` (k I) or the ``n*n`` matrix entries
g0        radial-bump                       ``[A, s, c_1..c_n]``: ``(1 + A bump) I``
g0        catalog-entry ``round-sphere``    ``[rho]``: ``4 rho^2 / (1 + |x|^2)^2 I``
delta     constant                          ``[d_1..d_n]``
delta     rotation                          ``[eps]``: ``eps (-x_2, x_1, 0, ...)``
delta     radial-bump                       ``[A, s, w, c_1..c_n]``: ``A bump ((x-c) + w R(x-c))``
beta      constant                          ``[b]``
beta      radial-bump                       ``[A, s, c_1..c_n]``: ``1 / (1 + A bump)``
beta      catalog-entry ``sphere-height``   ``[b0, b1]``: ``b0 + b1 Z`` (Z = height on S^2)
========  ================================  =========================================

``R`` is the quarter turn in the first two coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("constant", "rotation", "radial-bump", "catalog-entry")
DERIVATIVE_MODES = ("analytic", "finite-difference")

G0_CONSTANT, G0_BUMP, G0_SPHERE = 0, 1, 2
DELTA_CONSTANT, DELTA_ROTATION, DELTA_BUMP = 0, 1, 2
BETA_CONSTANT, BETA_BUMP, BETA_HEIGHT = 0, 1, 2


class ScenarioError(ValueError):
    """Invalid scenario or field specification."""


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    parameters: tuple = field(default_factory=tuple)
    derivative_mode: str = "analytic"
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown field kind {self.kind!r}")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ScenarioError(f"unknown derivative mode {self.derivative_mode!r}")
        object.__setattr__(self, "parameters", tuple(float(p) for p in np.ravel(self.parameters)))
        if self.kind == "catalog-entry" and not self.name:
            raise ScenarioError("catalog-entry fields need a name")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "parameters": list(self.parameters)}
        if self.name:
            out["name"] = self.name
        if self.derivative_mode != "analytic":
            out["derivative_mode"] = self.derivative_mode
        return out


def _need(spec: FieldSpec, count: int, role: str):
    if len(spec.parameters) != count:
        raise ScenarioError(
            f"{role} field {spec.kind!r} expects {count} parameters, got {len(spec.parameters)}"
        )


def pack_g0(spec: FieldSpec, n: int):
    """Return ``(code, params)`` for a g0 spec on an ``n``-dimensional base."""
    p = spec.parameters
    if spec.kind == "constant":
        if len(p) == 1:
            mat = p[0] * np.eye(n)
        elif len(p) == n * n:
            mat = np.array(p).reshape(n, n)
        else:
            raise ScenarioError("constant g0 takes one scalar or n*n entries")
        if not np.allclose(mat, mat.T, atol=1e-14) or np.linalg.eigvalsh(mat).min() <= 0:
            raise ScenarioError("constant g0 must be symmetric positive definite")
        return G0_CONSTANT, mat.ravel()
    if spec.kind == "radial-bump":
        _need(spec, 2 + n, "g0")
        if p[0] <= -1 or p[1] <= 0:
            raise ScenarioError("g0 radial-bump needs amplitude > -1 and width > 0")
        return G0_BUMP, np.array(p)
    if spec.kind == "catalog-entry" and spec.name == "round-sphere":
        _need(spec, 1, "g0")
        if p[0] <= 0:
            raise ScenarioError("round-sphere radius must be positive")
        return G0_SPHERE, np.array(p)
    raise ScenarioError(f"g0 cannot be {spec.kind!r} {spec.name or ''}".strip())


def pack_delta(spec: FieldSpec, n: int):
    p = spec.parameters
    if spec.kind == "constant":
        _need(spec, n, "delta")
        return DELTA_CONSTANT, np.array(p)
    if spec.kind == "rotation":
        _need(spec, 1, "delta")
        if n < 2:
            raise ScenarioError("rotation drift needs dimension >= 2")
        return DELTA_ROTATION, np.array(p)
    if spec.kind == "radial-bump":
        _need(spec, 3 + n, "delta")
        if p[1] <= 0:
            raise ScenarioError("delta radial-bump width must be positive")
        if p[2] != 0 and n < 2:
            raise ScenarioError("swirl needs dimension >= 2")
        return DELTA_BUMP, np.array(p)
    raise ScenarioError(f"delta cannot be {spec.kind!r} {spec.name or ''}".strip())


def pack_beta(spec: FieldSpec, n: int):
    p = spec.parameters
    if spec.kind == "constant":
        _need(spec, 1, "beta")
        if p[0] <= 0:
            raise ScenarioError("beta must be positive")
        return BETA_CONSTANT, np.array(p)
    if spec.kind == "radial-bump":
        _need(spec, 2 + n, "beta")
        if p[0] <= -1 or p[1] <= 0:
            raise ScenarioError("beta radial-bump needs amplitude > -1 and width > 0")
        return BETA_BUMP, np.array(p)
    if spec.kind == "catalog-entry" and spec.name == "sphere-height":
        _need(spec, 2, "beta")
        if p[0] <= abs(p[1]):
            raise ScenarioError("sphere-height beta needs b0 > |b1| to stay positive")
        return BETA_HEIGHT, np.array(p)
    raise ScenarioError(f"beta cannot be {spec.kind!r} {spec.name or ''}".strip())


def check_manifold_compatibility(manifold: str, g0: FieldSpec, delta: FieldSpec, beta: FieldSpec):
    """Reject fields that are not globally defined on the chosen atlas."""
    if manifold == "sphere":
        if not (g0.kind == "catalog-entry" and g0.name == "round-sphere"):
            raise ScenarioError("the sphere atlas requires g0 = catalog-entry round-sphere")
        if delta.kind == "constant" and any(delta.parameters):
            raise ScenarioError("constant nonzero drift is not defined on the sphere")
        if delta.kind == "radial-bump":
            raise ScenarioError("radial-bump drift is not defined on the sphere")
        if beta.kind == "radial-bump":
            raise ScenarioError("radial-bump beta is not defined on the sphere")
        return
    for role, spec in (("g0", g0), ("delta", delta), ("beta", beta)):
        if spec.kind == "catalog-entry":
            raise ScenarioError(f"{role} catalog entry {spec.name!r} needs the sphere atlas")
    if manifold == "torus":
        for role, spec in (("g0", g0), ("delta", delta), ("beta", beta)):
            if spec.kind != "constant":
                raise ScenarioError(f"torus scenarios need constant {role}")
