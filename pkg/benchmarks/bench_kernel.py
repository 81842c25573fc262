"""Compiled kernel against the numpy fallback.

Times single right-hand-side evaluations (the hot loop of every integration)
and whole integrations in each mode, and checks that both backends agree.

    python3 benchmarks/bench_kernel.py [--repeat N]
"""

import argparse
import time

import numpy as np

from fermat_morse import _kernel_py
from fermat_morse.geometry import program_args
from fermat_morse.scenario import flat_bump_drift, lens, sphere

try:
    from fermat_morse import _kernel as _kernel_c
except ImportError:  # pragma: no cover
    _kernel_c = None

MODES = {
    "geodesic": (_kernel_py.MODE_GEODESIC, 0),
    "fermat-jacobi": (_kernel_py.MODE_FERMAT_JACOBI, 2),
}


def initial_state(mode, n, ncol, x, v):
    if mode == _kernel_py.MODE_GEODESIC:
        return np.concatenate([x, v])
    return np.concatenate([x, v, np.zeros(n * ncol), np.eye(n, ncol).ravel()])


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rhs-calls", type=int, default=2000)
    args = ap.parse_args()
    if _kernel_c is None:
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")

    cases = [("sphere eps=0.1", sphere(eps=0.1), [0.3, 0.1], [1.2, 2.0]),
             ("lens", lens(), [-3.0, 0.1], [6.0, -0.2]),
             ("flat bump drift", flat_bump_drift(), [-2.0, 0.3], [4.0, 0.0])]
    print(f"{'case':18} {'mode':14} {'rhs py [us]':>12} {'rhs cy [us]':>12} {'x':>6} "
          f"{'solve py [ms]':>14} {'solve cy [ms]':>14} {'x':>6} {'max diff':>9}")
    for name, sc, x, v in cases:
        prog = program_args(sc)
        x, v = np.array(x), np.array(v)
        n = len(x)
        for mname, (mode, ncol) in MODES.items():
            y0 = initial_state(mode, n, ncol, x, v)
            cc = np.zeros(ncol)
            timings = {}
            results = {}
            for label, mod in (("py", _kernel_py), ("cy", _kernel_c)):
                def many_rhs(mod=mod):
                    for _ in range(args.rhs_calls):
                        out = mod.rhs(*prog, mode, 0, y0, ncol, cc, 0.0)
                    return out

                def solve(mod=mod):
                    return mod.integrate(*prog, mode, 0, y0, 0.0, 1.0, 1e-11, 1e-12, ncol, cc,
                                         0.0, None, 200000)

                t_rhs, _ = best_of(many_rhs, args.repeat)
                t_solve, res = best_of(solve, args.repeat)
                timings[label] = (1e6 * t_rhs / args.rhs_calls, 1e3 * t_solve)
                results[label] = res
            diff = float(np.max(np.abs(results["py"][1][-1] - results["cy"][1][-1])))
            (rp, sp), (rc, scy) = timings["py"], timings["cy"]
            print(f"{name:18} {mname:14} {rp:12.1f} {rc:12.2f} {rp / rc:6.0f} "
                  f"{sp:14.1f} {scy:14.2f} {sp / scy:6.0f} {diff:9.1e}")


if __name__ == "__main__":
    main()
