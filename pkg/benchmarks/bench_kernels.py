"""Compiled kernels against the numpy fallback, plus end-to-end assembly under each.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ddr_poincare import _kernels_py
from ddr_poincare.polyspace import exponents

try:
    from ddr_poincare import _kernels
except ImportError:
    _kernels = None

ASSEMBLY = (
    "import time;from ddr_poincare import kernels, DDRComplex, gen_hex_mesh;"
    "from ddr_poincare.mimetic import context;"
    "m=gen_hex_mesh(3);t=time.perf_counter();DDRComplex(m,1);context(m);"
    "print(kernels.BACKEND, time.perf_counter()-t)"
)


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    xi = rng.uniform(-1, 1, (2000, 3))
    ex = np.asarray(exponents(3, 6))
    coords = rng.uniform(0, 1, (20000, 4, 3))
    cases = [("vandermonde 2000x84", lambda k: k.vandermonde(xi, ex)),
             ("whitney_local 20000 simplices", lambda k: k.whitney_local(coords))]
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'cython [s]':>10s} {'speedup':>8s}")
    for name, call in cases:
        tp = best(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:32s} {tp:10.4f} {'n/a':>10s}")
            continue
        tc = best(lambda: call(_kernels), args.repeat)
        a, b = call(_kernels_py), call(_kernels)
        for u, v in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.abs(u - v).max() <= 1e-10 * np.abs(u).max()
        print(f"{name:32s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f}x")
    for env in ({"DDR_PURE_PYTHON": "1"}, {}):
        out = subprocess.run([sys.executable, "-c", ASSEMBLY], env={**os.environ, **env},
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"assembly hex(3) k=1 + submesh [{out[0]}]: {float(out[1]):.3f} s")


if __name__ == "__main__":
    main()
