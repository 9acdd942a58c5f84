"""Benchmark the compiled raster kernels against the pure-Python fallback.

Usage:
    python benchmarks/bench_kernels.py [--size 1024] [--repeat 3]

Prints per-op wall times for every available backend and the speedup of the
compiled extension where built. Outputs are also cross-checked for byte
equality so the timing run doubles as an equivalence audit.
"""
from __future__ import annotations

import argparse
import random
import time

from codevision.raster import backend

OPS = (
    ("rot90", lambda m, buf, w, h: m.rot90(buf, w, h)),
    ("rot180", lambda m, buf, w, h: m.rot180(buf, w, h)),
    ("rot270", lambda m, buf, w, h: m.rot270(buf, w, h)),
    ("flip_h", lambda m, buf, w, h: m.flip_h(buf, w, h)),
    ("flip_v", lambda m, buf, w, h: m.flip_v(buf, w, h)),
    ("crop", lambda m, buf, w, h: m.crop(buf, w, h, w // 4, h // 4, 3 * w // 4, 3 * h // 4)),
    ("brightness", lambda m, buf, w, h: m.brightness(buf, w, h, 1.3)),
    ("contrast", lambda m, buf, w, h: m.contrast(buf, w, h, 1.3)),
    ("grayscale", lambda m, buf, w, h: m.grayscale(buf, w, h)),
    ("box_blur_r2", lambda m, buf, w, h: m.box_blur(buf, w, h, 2)),
    ("sharpen", lambda m, buf, w, h: m.sharpen(buf, w, h)),
    ("sobel", lambda m, buf, w, h: m.sobel(buf, w, h)),
)


def bench(size: int, repeat: int) -> None:
    impls = backend.available()
    print(f"backends: {', '.join(impls)} (active: {backend.name})")
    rng = random.Random(0)
    buf = rng.randbytes(size * size * 3)
    w = h = size
    print(f"image: {w}x{h} rgb, best of {repeat}")
    header = f"{'op':<14}" + "".join(f"{name:>12}" for name in impls)
    if len(impls) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for op_name, fn in OPS:
        times = {}
        results = {}
        for name, mod in impls.items():
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                out = fn(mod, buf, w, h)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
            results[name] = out
        if len(results) > 1 and len(set(results.values())) != 1:
            raise AssertionError(f"backend outputs differ for {op_name}")
        row = f"{op_name:<14}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in impls)
        if "pure" in times and "compiled" in times:
            row += f"{times['pure'] / times['compiled']:>9.1f}x"
        print(row)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=1024, help="square image side")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats per op")
    args = ap.parse_args()
    bench(args.size, args.repeat)


if __name__ == "__main__":
    main()
