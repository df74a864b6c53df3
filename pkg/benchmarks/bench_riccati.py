#!/usr/bin/env python3
"""Benchmark: numba-compiled vs pure-Python backward Riccati kernel.

Run directly (python benchmarks/bench_riccati.py). Setting
CARLAB_DISABLE_NUMBA=1 makes the package itself use the Python path; this
script times both callables side by side regardless of the flag.
"""

import time

import numpy as np

from carlab.kernels import (
    PSI_PIECEWISE,
    riccati_backward,
    riccati_backward_py,
    using_numba,
)
from carlab.weights import ProblemParams, PsiSpec, default_r1, radial_grid, validate_params


def time_call(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    p = validate_params(ProblemParams(E=1.0, delta0=0.4, s=0.6))
    spec = PsiSpec.from_continuity(p, default_r1(p))
    print(f"numba active in package: {using_numba()}")
    print(f"{'nodes':>8} {'h':>6} {'numba (s)':>12} {'python (s)':>12} {'speedup':>8}")
    for n_mid, h in ((2400, 0.1), (2400, 0.02), (9600, 0.02), (38400, 0.01)):
        grid = radial_grid(spec, n_mid=n_mid, n_inner=n_mid // 6, n_outer=n_mid // 3)
        r = np.concatenate([[0.0], grid.nodes])
        args = (r, h, h / 80.0, PSI_PIECEWISE,
                spec.B, spec.R0, spec.R1, spec.delta, spec.plateau, spec.E / 4.0)
        riccati_backward(*args)  # warm the JIT cache before timing
        t_jit = time_call(riccati_backward, *args)
        t_py = time_call(riccati_backward_py, *args, repeat=1)
        print(f"{r.size:>8d} {h:>6.3g} {t_jit:>12.5f} {t_py:>12.5f} {t_py / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
