"""Compare the compiled and numpy step kernels.

Times three access patterns for every propagator of the model problems:
a sequential march (one start), a batched march over many short intervals
(F-relaxation shape), and a batched single step (C-relaxation shape).

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from mgritopt import kernels
from mgritopt.problems import build_problem

CASES = [("mp1", 40), ("mp2-1d", 256), ("mp2-2d", 32)]


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times), statistics.median(times)


def bench(repeat: int):
    rows = []
    for kind, n in CASES:
        P = build_problem(kind, n)
        props = {"fine": P.fine_propagator(), "coarse(m=4)": P.coarse_propagator(4 * P.step)}
        for label, prop in props.items():
            seq_steps = 2000 if P.d == 1 else 200
            starts = np.arange(0, 4 * 500, 4)
            X = np.random.default_rng(0).uniform(0, 1, (500, P.N))
            out = {}
            for be in ("python", "cython"):
                if be == "cython" and not kernels.COMPILED_AVAILABLE:
                    continue
                with kernels.use_backend(be):
                    U1 = np.empty((seq_steps + 1, P.N)); U1[0] = P.u0
                    U2 = np.empty((starts[-1] + 4, P.N)); U2[starts] = X
                    out[be] = (
                        _best(lambda: prop.march(U1, [0], seq_steps), repeat)[0] / seq_steps,
                        _best(lambda: prop.march(U2, starts, 3), repeat)[0] / (3 * starts.size),
                        _best(lambda: prop.step_rows(X), repeat)[0] / X.shape[0],
                    )
            for pattern, i in (("sequential", 0), ("f-relax", 1), ("c-relax", 2)):
                py = out["python"][i]
                cy = out.get("cython", (float("nan"),) * 3)[i]
                rows.append((kind, n, prop.kind.value, label, pattern, py, cy, py / cy))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    rows = bench(args.repeat)
    header = ("problem", "n", "kind", "role", "pattern", "python_s_per_step",
              "cython_s_per_step", "speedup")
    print(f"{'problem':8} {'n':>4} {'kind':10} {'pattern':10} {'python':>10} {'cython':>10} {'x':>7}")
    for r in rows:
        print(f"{r[0]:8} {r[1]:>4} {r[2]:10} {r[4]:10} {r[5]:10.2e} {r[6]:10.2e} {r[7]:7.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
