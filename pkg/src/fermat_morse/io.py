"""Report writers: JSON lines, JSON documents, CSV trajectories and plot data.

Every record carries a ``schema`` tag ``"<name>@<version>"`` naming one of the
JSON Schema files shipped in ``fermat_morse/schemas``.  Output is byte-stable:
keys are sorted, floats are written with ``repr`` precision, nothing depends
on time or on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
SCHEMAS = ("geodesic", "conjugate", "bridge", "timelike", "hessian", "morse", "lens", "failure")


def schema_tag(name: str) -> str:
    if name not in SCHEMAS:
        raise KeyError(f"unknown schema {name!r}")
    return f"{name}@{SCHEMA_VERSION}"


def load_schema(name: str) -> dict:
    text = resources.files("fermat_morse").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def tagged(name: str, record: dict) -> dict:
    out = to_jsonable(record)
    out["schema"] = schema_tag(name)
    return out


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False, separators=(", ", ": "))


def write_jsonl(path, name: str, records) -> Path:
    path = Path(path)
    path.write_text("".join(dumps(tagged(name, r)) + "\n" for r in records))
    return path


def write_json(path, name: str, record: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(tagged(name, record), sort_keys=True, indent=2, allow_nan=False)
                    + "\n")
    return path


def read_jsonl(path) -> list:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def write_trajectory_csv(path, geod) -> Path:
    """Columns ``s, chart_id, x_1..x_n, v_1..v_n, alpha_speed, F_speed``."""
    n = geod.n
    a, F = geod.speeds()
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "chart_id", *(f"x{i + 1}" for i in range(n)),
                    *(f"v{i + 1}" for i in range(n)), "alpha_speed", "F_speed"])
        for s, c, x, v, al, fs in zip(geod.grid, geod.charts, geod.coords, geod.velocities, a, F):
            w.writerow([repr(float(s)), int(c), *(repr(float(t)) for t in x),
                        *(repr(float(t)) for t in v), repr(float(al)), repr(float(fs))])
    return path


def write_matrix_csv(path, matrix) -> Path:
    path = Path(path)
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt="%.17g")
    return path


def write_plot_data(path, xs, ys) -> Path:
    """Two whitespace-separated columns, one sample per line."""
    path = Path(path)
    xs, ys = np.ravel(xs), np.ravel(ys)
    if xs.shape != ys.shape:
        raise ValueError("plot columns must have equal length")
    path.write_text("".join(f"{float(x)!r} {float(y)!r}\n" for x, y in zip(xs, ys)))
    return path
