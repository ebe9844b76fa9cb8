"""Compiled vs numpy kernels.

    python benchmarks/bench_kernels.py [--sizes 100,1000,100000] [--repeat 5]

Times ``circle_alpha``, ``section_state`` and one ``advance`` call per
backend, then a short water-hammer run with each backend in a subprocess
(the backend is chosen at import through ``MIXEDPIPE_BACKEND``).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mixedpipe import kernels

RUN_SNIPPET = """
import dataclasses, time
from mixedpipe import kernels
from mixedpipe.config import preset
from mixedpipe.solver import run
cfg = dataclasses.replace(preset("water-hammer"), t_end=0.5, output_every=0.5)
t0 = time.perf_counter(); traj = run(cfg); dt = time.perf_counter() - t0
print(kernels.BACKEND, traj.snapshots[-1].step, dt)
"""


def _inputs(n: int, rng: np.random.Generator):
    R = rng.uniform(0.5, 2.0, n)
    S = np.pi * R * R
    E = (rng.random(n) < 0.3).astype(np.int8)
    A = np.where(E == 1, S * (1.0 + 1e-4 * rng.random(n)), S * rng.uniform(0.01, 0.99, n))
    Q = rng.normal(0.0, 1.0, n)
    cos_t = np.cos(rng.uniform(-0.2, 0.2, n))
    return A, Q, E, R, S, cos_t


def bench(backend, n: int, repeat: int, rng) -> dict[str, float]:
    A, Q, E, R, S, cos_t = _inputs(n, rng)
    a = rng.uniform(0.0, np.pi, n)
    zeros = np.zeros(n)
    c2, g = 2.0e6, 9.81
    ghost = (float(A[0]), -float(Q[0]), int(E[0]))
    ghost_r = (float(A[-1]), -float(Q[-1]), int(E[-1]))

    def t(fn):
        return min(timeit.repeat(fn, number=1, repeat=repeat)) / n * 1e9

    return {
        "circle_alpha": t(lambda: backend.circle_alpha(a)),
        "section_state": t(lambda: backend.section_state(A, E, R, cos_t, c2, g)),
        "advance": t(lambda: backend.advance(A, Q, E, ghost, ghost_r, R, S, zeros, zeros, zeros, cos_t,
                                             zeros, 1e-5, 1.0, c2, g, 0.0, 1e-10)),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,1000,100000")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-run", action="store_true", help="skip the end-to-end solver runs")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = [kernels.python_backend]
    if kernels.compiled_backend is not None:
        backends.insert(0, kernels.compiled_backend)
    else:
        print("compiled backend not built; timing the numpy fallback only")

    print(f"{'kernel':<14} {'cells':>8} " + " ".join(f"{b.BACKEND + ' ns/cell':>18}" for b in backends)
          + ("  speedup" if len(backends) == 2 else ""))
    for n in sizes:
        res = [bench(b, n, args.repeat, np.random.default_rng(0)) for b in backends]
        for name in res[0]:
            row = f"{name:<14} {n:>8} " + " ".join(f"{r[name]:>18.1f}" for r in res)
            if len(res) == 2:
                row += f"  {res[1][name] / res[0][name]:7.1f}x"
            print(row)

    if not args.no_run:
        print("\nwater-hammer preset, 200 cells, t_end = 0.5 s")
        for name in [b.BACKEND for b in backends]:
            env = dict(os.environ, MIXEDPIPE_BACKEND=name)
            out = subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, capture_output=True,
                                 text=True, check=True).stdout.split()
            print(f"  {out[0]:<8} {out[1]} steps in {float(out[2]):.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
