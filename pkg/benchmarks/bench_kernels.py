"""Timing comparison of the compiled and pure kernel backends.

Runs each hot kernel on realistic input sizes under both backends and prints
a small table with the speedup. The pure backend is loaded directly so one
process can time both; results also sanity-check that the two backends agree
on every benchmarked input.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import statistics
import time

import numpy as np

from radeval._kernels import pure


def load_native():
    try:
        from radeval._kernels import _native
    except ImportError:
        return None
    return _native


def timed(fn, args, repeats):
    best = []
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best.append(time.perf_counter() - start)
    return min(best), result


def bench_case(name, args, native, repeats):
    pure_fn = getattr(pure, name)
    pure_time, pure_result = timed(pure_fn, args, repeats)
    if native is None:
        print(f"{name:<16} pure {pure_time * 1000:8.2f} ms   (no compiled backend)")
        return
    native_time, native_result = timed(getattr(native, name), args, repeats)
    assert pure_result == native_result, f"{name}: backends disagree"
    speedup = pure_time / native_time if native_time > 0 else float("inf")
    print(f"{name:<16} pure {pure_time * 1000:8.2f} ms   "
          f"native {native_time * 1000:8.2f} ms   x{speedup:6.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case; min is reported")
    parsed = parser.parse_args()

    native = load_native()
    rng = np.random.default_rng(17)

    n = 2000
    x = rng.integers(0, 50, size=n).astype(float).tolist()
    y = rng.integers(0, 50, size=n).astype(float).tolist()

    tokens = 600
    a = [int(v) for v in rng.integers(0, 120, size=tokens)]
    b = [int(v) for v in rng.integers(0, 120, size=tokens)]

    print(f"pure backend: {pure.BACKEND}; "
          f"compiled backend: {'present' if native else 'absent'}")
    print(f"kendall_counts on n={n}; lcs_len on {tokens}x{tokens} tokens")
    print()
    bench_case("kendall_counts", (x, y), native, parsed.repeats)
    bench_case("lcs_len", (a, b), native, parsed.repeats)


if __name__ == "__main__":
    main()
