"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports the median wall time per call for batched demand evaluation and for
a full clearing-price solve at several cell sizes, after checking that both
backends return the same numbers.  The first numba call (JIT compile or
cache load) is timed separately.
"""
import argparse
import statistics
import time

import numpy as np

from radioalloc import kernels
from radioalloc.kernels import LOGARITHMIC, SIGMOID, get_backend


def cell(n, rng):
    kind = np.where(np.arange(n) % 2 == 0, SIGMOID, LOGARITHMIC)
    p1 = np.where(kind == SIGMOID, rng.uniform(0.5, 5.0, n), rng.uniform(0.5, 15.0, n))
    p2 = np.where(kind == SIGMOID, rng.uniform(5.0, 30.0, n), 100.0)
    alpha = rng.uniform(0.1, 1.0, n)
    scale = 1.0 / rng.uniform(0.5, 2.0, n)
    return kind, p1, p2, alpha, scale


def timeit(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not kernels.numba_available():
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    backends = {name: get_backend(name) for name in ("numpy", "numba")}

    kind, p1, p2, alpha, scale = cell(12, rng)
    t0 = time.perf_counter()
    backends["numba"][3](kind, p1, p2, alpha, scale, 180.0)
    backends["numba"][2](kind, p1, p2, alpha, scale)
    print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f} s\n")

    print(f"{'workload':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for n in (12, 120, 1200):
        kind, p1, p2, alpha, scale = cell(n, rng)
        prices = np.geomspace(1e-3, 10.0, n)
        budget = 15.0 * n
        ref = [backends[b][3](kind, p1, p2, alpha, scale, budget) for b in backends]
        assert abs(ref[0][0] - ref[1][0]) <= 1e-9 * ref[0][0]
        np.testing.assert_allclose(ref[0][2], ref[1][2], rtol=1e-6, atol=1e-9)

        rows = {
            f"demand, {n} apps": lambda b: backends[b][2](kind, p1, p2, alpha, prices),
            f"clearing price, {n} apps": lambda b: backends[b][3](kind, p1, p2, alpha, scale, budget),
        }
        for label, call in rows.items():
            t_np = timeit(lambda: call("numpy"), args.repeat)
            t_nb = timeit(lambda: call("numba"), args.repeat)
            print(f"{label:<28}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
