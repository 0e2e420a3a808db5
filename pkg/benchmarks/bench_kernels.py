"""Compare the compiled and numpy kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]

Times ``tilted_moments`` and ``log_partition`` over a grid of quadrature
sizes ``n`` and basis sizes ``M``, then a full fit loop under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from maxentsd import _kernels_py

try:
    from maxentsd import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

SIZES = (64, 128, 512, 2048)
BASES = (1, 3, 8)

FIT_LOOP = """
import time
from maxentsd import MomentBasis, SupportSpec, fit, kernels
sup = SupportSpec.half_line(0.0, 1.0, "exponential")
basis = MomentBasis.exponentials([0.5, 1.0, 2.0])
unit = SupportSpec.finite(0.0, 1.0)
quad = MomentBasis.powers([1, 2])
fit([2 / 3, 1 / 2, 1 / 3], basis, sup)
fit([0.3, 0.2], quad, unit)
start = time.perf_counter()
for k in range({loops}):
    fit([2 / 3, 1 / 2, 1 / 3], basis, sup)
    fit([0.3 + 0.001 * (k % 50), 0.2], quad, unit)
print(kernels.BACKEND, (time.perf_counter() - start) / {loops})
"""


def best(fn, repeat):
    number = max(1, int(0.02 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'n':>6}{'M':>4}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n in SIZES:
        w = rng.uniform(0.1, 1.0, n) / n
        for M in BASES:
            H = rng.uniform(0, 1, (n, M))
            lam = rng.normal(size=M)
            for name in ("tilted_moments", "log_partition"):
                py = best(lambda: getattr(_kernels_py, name)(H, w, lam), repeat) * 1e6
                if _kernels_c is None:
                    print(f"{name:<15}{n:>6}{M:>4}{py:>12.2f}{'n/a':>12}{'':>9}")
                    continue
                cy = best(lambda: getattr(_kernels_c, name)(H, w, lam), repeat) * 1e6
                print(f"{name:<15}{n:>6}{M:>4}{py:>12.2f}{cy:>12.2f}{py / cy:>8.1f}x")


def fit_loop(loops):
    print(f"\nfit loop ({loops} x [3-moment Laplace fit + 2-moment power fit])")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("MAXENTSD_PURE_PYTHON", None)
        if pure:
            env["MAXENTSD_PURE_PYTHON"] = "1"
        out = subprocess.run(
            [sys.executable, "-c", FIT_LOOP.format(loops=loops)], env=env, capture_output=True, text=True, check=True
        ).stdout.split()
        print(f"  backend {out[0]:<7} {float(out[1]) * 1e3:8.3f} ms per iteration")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--loops", type=int, default=200)
    args = parser.parse_args()
    kernel_table(args.repeat)
    fit_loop(args.loops)


if __name__ == "__main__":
    main()
