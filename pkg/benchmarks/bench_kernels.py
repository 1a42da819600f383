"""Compare the numba and numpy backends of the float kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 2000]

Prints the best wall time per backend and checks that outputs agree.
"""
import argparse
import time

import numpy as np

from bisym import kernels
from bisym.genset import enumerate_h, make_family
from bisym.weights import Weights


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=2000, help="column length for the tuple kernel")
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    col = np.sort(rng.uniform(1, 100, args.size))
    bound = 40.0
    pts = np.sort(rng.uniform(0.01, 0.99, 5000))
    pts = pts[np.concatenate([[True], np.diff(pts) > 1e-9])]
    radius = min(pts[0], 1 - pts[-1], np.diff(pts).min() / 2)
    s = np.linspace(0, 1, 200_000)

    cases = {
        "expand_tuples": lambda nb: kernels.expand_tuples([col, col], [1.0, 1.0], bound, use_numba=nb),
        "staircase_values": lambda nb: kernels.staircase_values(pts, radius, s, use_numba=nb),
    }
    for name, fn in cases.items():
        fn(True)  # compile outside the timing loop
        t_nb, a = best_of(lambda: fn(True), args.repeat)
        t_np, b = best_of(lambda: fn(False), args.repeat)
        same = np.array_equal(a, b) if a.dtype.kind == "i" else np.allclose(a, b, atol=1e-12)
        print(f"{name:18s} numba {t_nb * 1e3:8.2f} ms   numpy {t_np * 1e3:8.2f} ms   "
              f"speedup {t_np / t_nb:6.2f}x   outputs agree: {same}")

    fam = make_family([(1, 2), (1, 3), (1, 5)], (1, 3))
    w = Weights.of([1, 1])
    for nb in (True, False):
        t, e = best_of(lambda: enumerate_h(fam, w, 3, (1, 30), use_numba=nb), max(1, args.repeat // 2))
        print(f"enumerate_h depth 3 ({'numba' if nb else 'numpy'}): {t * 1e3:8.1f} ms, "
              f"{len(e.elements)} elements")


if __name__ == "__main__":
    main()
