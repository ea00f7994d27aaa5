"""Time the compiled tape kernel against the pure-Python fallback.

Usage: python benchmarks/bench_tape.py [--points N] [--repeat R]
"""
import argparse
import time

import numpy as np

from finslerlab import _tape_py
from finslerlab.catalog import builtin
from finslerlab.tape import Tape
from finslerlab.tensors import kernel_for

try:
    from finslerlab import _tape
except ImportError:
    _tape = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    for name in ("randers2d", "conic_randers_lift", "ex5_3"):
        spec, _ = builtin(name)
        roots = kernel_for(spec).tape(2).roots
        n = spec.dim
        X = rng.uniform(0.6, 2.0, (args.points, n))
        Y = rng.uniform(0.2, 1.0, (args.points, n))
        row = [f"{name:20s} roots={len(roots):5d}"]
        results = {}
        for label, mod in (("python", _tape_py), ("cython", _tape)):
            if mod is None:
                row.append(f"{label}: unavailable")
                continue
            tape = Tape(roots, backend=mod)
            t = best_of(lambda: tape.run(X, Y, spec.params, threads=1), args.repeat)
            results[label] = (t, tape.run(X, Y, spec.params, threads=1)[0])
            row.append(f"{label}: {1e6 * t / args.points:9.2f} us/point")
        if len(results) == 2:
            (tp, vp), (tc, vc) = results["python"], results["cython"]
            agree = np.allclose(vp, vc, rtol=1e-12, atol=1e-12, equal_nan=True)
            row.append(f"speedup {tp / tc:6.1f}x  agree={agree}")
        print("  ".join(row))


if __name__ == "__main__":
    main()
