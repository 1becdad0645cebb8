#!/usr/bin/env python3
"""Time the hot kernels on the pure-numpy and compiled backends.

Run from an installed checkout:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --width 2400 --repeats 9

Both backends are fed identical inputs and their outputs are checked for
bit-equality before any timing starts. When the compiled extension is not
built the script still runs and reports the pure backend alone.
"""

import argparse
import time

import numpy as np

from ocrforge import _pykernels

try:
    from ocrforge import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
    return best


def build_cases(width):
    """One (name, call_factory) pair per kernel; factories take a backend."""
    rng = np.random.default_rng(7)
    h = 48
    wy = wx = 23
    line = rng.integers(0, 256, size=(h, width), dtype=np.uint8)
    padded = np.pad(line, ((wy // 2, wy // 2), (wx // 2, wx // 2)),
                    mode="symmetric")

    a = rng.integers(32, 4000, size=60).astype(np.int32)
    b = a.copy()
    for idx in rng.integers(0, a.size, size=8):
        b[idx] = int(rng.integers(32, 4000))

    img = line.astype(np.float64)
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(width, dtype=np.float64), indexing="ij")
    ys = ys + rng.uniform(-2.5, 2.5, ys.shape)
    xs = xs + rng.uniform(-2.5, 2.5, xs.shape)

    return [
        (f"sauvola {h}x{width} win {wy}",
         lambda be: be.sauvola(padded, h, width, wy, wx, 0.2)),
        ("levenshtein 60 codes x200",
         lambda be: [be.levenshtein(a, b) for _ in range(200)][-1]),
        ("align 60 codes x200",
         lambda be: [be.align(a, b) for _ in range(200)][-1]),
        (f"warp clamp {h}x{width}",
         lambda be: be.warp_bilinear_clamp(img, ys, xs)),
        (f"warp fill {h}x{width}",
         lambda be: be.warp_bilinear_fill(img, ys, xs, 243.0)),
    ]


def check_parity(cases):
    for name, call in cases:
        pure = call(_pykernels)
        compiled = call(_ckernels)
        if isinstance(pure, np.ndarray):
            same = np.array_equal(pure, compiled)
        else:
            same = pure == compiled
        if not same:
            raise SystemExit(f"backend outputs disagree for {name}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--width", type=int, default=1200,
                        help="line width in pixels for image kernels")
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of this many runs")
    args = parser.parse_args()

    cases = build_cases(args.width)
    if _ckernels is None:
        print("compiled extension not built; timing the pure backend only")
    else:
        check_parity(cases)
        print("outputs bit-identical across backends for every case")

    header = f"{'kernel':<28} {'pure':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        pure_s = best_of(lambda: call(_pykernels), args.repeats)
        if _ckernels is None:
            print(f"{name:<28} {pure_s * 1e3:>9.3f} ms {'-':>12} {'-':>9}")
            continue
        comp_s = best_of(lambda: call(_ckernels), args.repeats)
        ratio = pure_s / comp_s if comp_s > 0 else float("inf")
        print(f"{name:<28} {pure_s * 1e3:>9.3f} ms "
              f"{comp_s * 1e3:>9.3f} ms {ratio:>8.1f}x")


if __name__ == "__main__":
    main()
