"""Command-line front end.

    fermat-morse --scenario scenarios/sphere.yaml --command morse \\
        --p0 0.3,0.1 --q0=-0.2,0.5 --l-max 20.4 --out runs/sphere

Points are ``x1,x2,...`` in chart 0 or ``chart:x1,x2,...``.  Reports land in
``--out`` as ``<command>.jsonl`` (per-geodesic records) or ``<command>.json``
(single summaries), trajectories as CSV under ``trajectories/``, and with
``--plot-data`` two-column files under ``plot/``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 the
endpoints are conjugate (degenerate hypothesis).  Failures 3 and 4 leave a
``failure.json`` diagnostic in the output directory.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .charts import ChartError, ChartPoint
from .errors import DegenerateHypothesis, NumericalFailure
from .fields import ScenarioError
from .geodesic import integrate_geodesic

COMMANDS = ("shoot", "connect", "index", "bridge", "timelike", "hessian", "morse", "lens")
DEFAULT_L_MAX = 10.0
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def parse_point(text: str, n: int) -> ChartPoint:
    chart = 0
    if ":" in text:
        head, text = text.split(":", 1)
        chart = int(head)
    try:
        coords = [float(c) for c in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad coordinates {text!r}") from exc
    if len(coords) != n:
        raise ConfigError(f"expected {n} coordinates, got {len(coords)}")
    return ChartPoint(chart, coords)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermat-morse", description=__doc__.split("\n\n")[0])
    ap.add_argument("--scenario", required=True, help="scenario file (YAML or JSON)")
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--p0", help="start point")
    ap.add_argument("--q0", help="end point (observer position for lens/timelike)")
    ap.add_argument("--v0", help="initial velocity for shoot")
    ap.add_argument("--t0", type=float, default=0.0, help="emission time")
    ap.add_argument("--s-bar", type=float, help="proper time for timelike")
    ap.add_argument("--l-max", type=float, help=f"Fermat length budget (default {DEFAULT_L_MAX})")
    ap.add_argument("--tol", type=float, default=1e-10, help="integration tolerance")
    ap.add_argument("--seed-budget", type=int, help="shooting seeds per pass")
    ap.add_argument("--seed", type=int, default=0, help="seed of the direction grids")
    ap.add_argument("--m", type=int, default=400, help="hessian elements")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--plot-data", action="store_true", help="also write two-column plot files")
    return ap


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required for {args.command}")


def validate(args):
    if not 1e-12 <= args.tol <= 1e-4:
        raise ConfigError("--tol must lie in [1e-12, 1e-4]")
    if args.l_max is not None and not (math.isfinite(args.l_max) and args.l_max > 0):
        raise ConfigError("--l-max must be positive")
    if args.seed_budget is not None and args.seed_budget < 1:
        raise ConfigError("--seed-budget must be at least 1")
    if args.m < 2:
        raise ConfigError("--m must be at least 2")
    if args.command == "shoot":
        _need(args, "p0", "v0")
    else:
        _need(args, "p0", "q0")
    if args.command == "timelike":
        _need(args, "s_bar")
        if not args.s_bar > 0:
            raise ConfigError("--s-bar must be positive")


class Run:
    def __init__(self, args, scenario):
        self.args = args
        self.sc = scenario
        self.out = Path(args.out)
        n = scenario.dimension
        self.p0 = scenario.atlas.check(parse_point(args.p0, n))
        self.q0 = scenario.atlas.check(parse_point(args.q0, n)) if args.q0 else None
        self.L_max = args.l_max if args.l_max is not None else DEFAULT_L_MAX

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    # -- shared pieces -------------------------------------------------------------

    def enumeration(self):
        from .morse import enumerate_geodesics
        a = self.args
        return enumerate_geodesics(self.sc, self.p0, self.q0, self.L_max, a.seed_budget, a.seed,
                                   tol=a.tol)

    def geodesic_record(self, g) -> dict:
        end = g.endpoint()
        return {
            "geodesic_id": g.geodesic_id,
            "start": {"chart_id": g.x0.chart_id, "coords": g.x0.coords},
            "end": {"chart_id": end.chart_id, "coords": end.coords},
            "v0": g.v0,
            "alpha_length": g.alpha_length(),
            "fermat_length": g.fermat_length(),
            "speed_drift": g.speed_drift,
            "endpoint_residual": getattr(g, "endpoint_residual", None),
            "chart_switches": len(g.chart_switches),
        }

    def dump_geodesics(self, geods):
        io.write_jsonl(self.path("geodesics.jsonl"), "geodesic",
                       [self.geodesic_record(g) for g in geods])
        for i, g in enumerate(geods):
            gid = i if g.geodesic_id is None else g.geodesic_id
            io.write_trajectory_csv(self.path("trajectories", f"geodesic_{gid}.csv"), g)
            if self.args.plot_data:
                ys = g.coords[:, 1] if g.n > 1 else g.coords[:, 0]
                xs = g.coords[:, 0] if g.n > 1 else g.grid
                io.write_plot_data(self.path("plot", f"geodesic_{gid}.dat"), xs, ys)

    # -- commands ------------------------------------------------------------------

    def shoot(self):
        v0 = np.array([float(c) for c in self.args.v0.split(",")])
        if v0.shape != (self.sc.dimension,):
            raise ConfigError("--v0 must have the scenario dimension")
        g = integrate_geodesic(self.sc, self.p0, v0, self.args.tol)
        g.geodesic_id = 0
        self.dump_geodesics([g])
        return {"geodesics": 1}

    def connect(self):
        enum = self.enumeration()
        self.dump_geodesics(enum.geodesics)
        return {"geodesics": len(enum), "seed_stable": enum.seed_stable}

    def index(self):
        enum = self.enumeration()
        self.dump_geodesics(enum.geodesics)
        io.write_jsonl(self.path("index.jsonl"), "conjugate", [r.to_record() for _, r in enum])
        return {"geodesics": len(enum), "indices": enum.indices}

    def bridge(self):
        from .bridge import index_equality_check
        enum = self.enumeration()
        self.dump_geodesics(enum.geodesics)
        recs = [index_equality_check(self.sc, g, t0=self.args.t0, strict=True)
                for g in enum.geodesics]
        io.write_jsonl(self.path("bridge.jsonl"), "bridge", recs)
        return {"geodesics": len(recs), "all_equal": all(r["equal"] for r in recs)}

    def timelike(self):
        from .bridge import timelike_geodesics
        a = self.args
        curves = timelike_geodesics(self.sc, self.p0, self.q0, a.s_bar, a.t0, a.tol,
                                    L_max=a.l_max)
        recs = []
        for i, c in enumerate(curves):
            rec = c.to_record()
            rec["geodesic_id"] = i
            rec["instant_mismatch"] = c.details["instant_mismatch"]
            recs.append(rec)
            if a.plot_data:
                io.write_plot_data(self.path("plot", f"timelike_{i}.dat"), c.grid, c.t_values)
        io.write_jsonl(self.path("timelike.jsonl"), "timelike", recs)
        return {"geodesics": len(recs), "all_equal": all(r["mu_x"] == r["mu_z"] for r in recs)}

    def hessian(self):
        from .hessian import hessian_report
        enum = self.enumeration()
        self.dump_geodesics(enum.geodesics)
        recs = [hessian_report(g, m=self.args.m) for g in enum.geodesics]
        io.write_jsonl(self.path("hessian.jsonl"), "hessian", recs)
        if self.args.plot_data:
            for r in recs:
                ev = r["smallest_eigenvalues"]
                io.write_plot_data(self.path("plot", f"spectrum_{r['geodesic_id']}.dat"),
                                   np.arange(len(ev)), ev)
        return {"geodesics": len(recs),
                "matches_conjugate_index": all(r["index"] == rep.mu
                                               for r, (_, rep) in zip(recs, enum))}

    def morse(self):
        from .morse import morse_report
        a = self.args
        rec = morse_report(self.sc, self.p0, self.q0, self.L_max, a.seed_budget, a.seed)
        io.write_json(self.path("morse.json"), "morse", rec)
        if a.plot_data:
            ks = sorted(int(k) for k in rec["counts"])
            io.write_plot_data(self.path("plot", "morse_counts.dat"), ks,
                               [rec["counts"][str(k)] for k in ks])
        return {"valid": rec["valid"], "budget_complete": rec["budget_complete"]}

    def lens(self):
        from .morse import lensing_count
        a = self.args
        rec = lensing_count(self.sc, self.p0, self.q0, self.L_max, a.seed_budget, a.t0, a.seed)
        io.write_json(self.path("lens.json"), "lens", rec)
        if a.plot_data:
            io.write_plot_data(self.path("plot", "arrival_times.dat"),
                               np.arange(rec["count"]), rec["arrival_times"])
        return {"count": rec["count"], "parity": rec["parity"]}


def _fail(out: Path, code: int, exc: BaseException, report=None) -> int:
    print(f"fermat-morse: {type(exc).__name__}: {exc}", file=sys.stderr)
    if code != EXIT_CONFIG:
        rec = report.to_record() if hasattr(report, "to_record") else report
        try:
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "failure.json", "failure",
                          {"exit_code": code, "error": type(exc).__name__, "message": str(exc),
                           "report": rec if isinstance(rec, dict) else None})
        except (OSError, TypeError):
            pass
    return code


def main(argv=None) -> int:
    from .scenario import load_scenario

    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        validate(args)
        scenario = load_scenario(args.scenario)
        run = Run(args, scenario)
    except (ConfigError, ScenarioError, ChartError, OSError, ValueError) as exc:
        return _fail(out, EXIT_CONFIG, exc)
    try:
        summary = getattr(run, args.command)()
    except DegenerateHypothesis as exc:
        return _fail(out, EXIT_DEGENERATE, exc, exc.report)
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, exc)
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(out, EXIT_NUMERIC, exc, getattr(exc, "state", None))
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
