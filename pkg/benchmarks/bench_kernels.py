"""Throughput comparison of the compiled kernels vs the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from sonoloc.kernels import _fallback

try:
    from sonoloc.kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    verts = np.ascontiguousarray(np.column_stack([75 + 30 * np.cos(theta), 75 + 22 * np.sin(theta)]))
    pts = np.ascontiguousarray(rng.uniform(0, 150, size=(100_000, 2)))
    mask = (rng.uniform(size=(600, 600)) < 0.45).astype(np.uint8)

    cases = [
        ("polygon_distance_batch (100k pts, 64-gon)", lambda impl: impl.polygon_distance_batch(verts, pts)),
        ("polygon_contains_batch (100k pts, 64-gon)", lambda impl: impl.polygon_contains_batch(verts, pts)),
        ("label_8connected (600x600, p=0.45)", lambda impl: impl.label_8connected(mask)),
    ]

    print(f"{'kernel':45s} {'fallback':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, call in cases:
        t_fb = timeit(lambda: call(_fallback), args.repeats)
        if _core is None:
            print(f"{name:45s} {t_fb * 1e3:10.2f}ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_c = timeit(lambda: call(_core), args.repeats)
        print(f"{name:45s} {t_fb * 1e3:10.2f}ms {t_c * 1e3:10.2f}ms {t_fb / t_c:8.1f}x")

    if _core is not None:
        d1 = _core.polygon_distance_batch(verts, pts)
        d2 = _fallback.polygon_distance_batch(verts, pts)
        assert all(np.array_equal(a, b) for a, b in zip(d1, d2)), "backend mismatch"
        print("\nbackends agree bit-for-bit on the benchmark inputs")


if __name__ == "__main__":
    main()
