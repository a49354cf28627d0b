"""Compare the compiled and numpy stability-classification kernels.

Usage: python3 benchmarks/bench_kernels.py [--res 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from cssplit import kernels
from cssplit.stability import DEFAULT_WINDOW, char_poly, grid_axis
from cssplit.stencil import SchemeSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - tic)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.compiled_classify_points is None:
        print("compiled kernel not built; only the numpy path is available")
    re = grid_axis(DEFAULT_WINDOW[0], DEFAULT_WINDOW[1], args.res)
    im = grid_axis(DEFAULT_WINDOW[2], DEFAULT_WINDOW[3], args.res)
    z = re[None, :] + 1j * im[:, None]
    print(f"grid {args.res}x{args.res}, best of {args.repeat}")
    print(f"{'k':>2} {'beta':>4} {'numpy [s]':>10} {'cython [s]':>10} {'speedup':>8} {'identical':>9}")
    for k, beta in ((2, 3), (3, 6), (4, 9), (6, 1)):
        cp = char_poly(SchemeSpec(k, beta))
        a = np.array([float(x) for x in cp.a])
        b = np.array([float(x) for x in cp.b])
        t_py, out_py = best_of(lambda: kernels.python_classify_points(a, b, z), args.repeat)
        if kernels.compiled_classify_points is None:
            print(f"{k:>2} {beta:>4} {t_py:10.4f} {'-':>10} {'-':>8} {'-':>9}")
            continue
        t_cy, out_cy = best_of(lambda: kernels.compiled_classify_points(a, b, z), args.repeat)
        same = bool(np.array_equal(out_py, out_cy))
        print(f"{k:>2} {beta:>4} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.2f} {str(same):>9}")


if __name__ == "__main__":
    main()
