"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--size 2000] [--repeat 5]

Both backends are imported directly, so the environment flag is irrelevant
here. The first numba call (compilation) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from rocktraits.kernels import _numba, _numpy


def _best(fn, repeat):
    fn()  # warm-up, absorbs JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size, rng):
    dem = np.cumsum(rng.normal(0, 0.05, (size, size)), axis=0)
    weights = np.exp(-0.5 * (np.arange(-15, 16) / 5.0) ** 2)
    weights /= weights.sum()
    yy, xx = np.mgrid[:size // 4, :size // 4]
    blobs = (np.sin(xx / 9.0) + np.cos(yy / 7.0)) > 0.3
    band = np.zeros((size // 4, size // 4), dtype=bool)
    band[:, size // 16: size // 16 + 40] = True
    flat = (rng.random(size * size) < 0.3).astype(np.uint8)
    counts = None

    def rle_decode(mod):
        nonlocal counts
        if counts is None:
            counts = _numpy.rle_encode(flat)
        return mod.rle_decode(counts, flat.size)

    return {
        "horn_slope": lambda mod: mod.horn_slope(dem, 0.02, 0.02),
        "gaussian (2 passes)": lambda mod: mod.correlate_axis(mod.correlate_axis(dem, weights, 1), weights, 0),
        "rle_encode": lambda mod: mod.rle_encode(flat),
        "rle_decode": rle_decode,
        "zhang_suen": lambda mod: mod.zhang_suen(band),
        "follow_borders": lambda mod: mod.follow_borders(blobs.astype(np.uint8)),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=2000, help="raster edge in pixels")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':22s} {'numpy ms':>10s} {'numba ms':>10s} {'speed-up':>9s}")
    for name, run in cases(args.size, rng).items():
        t_np = _best(lambda: run(_numpy), args.repeat)
        t_nb = _best(lambda: run(_numba), args.repeat)
        print(f"{name:22s} {1e3 * t_np:10.1f} {1e3 * t_nb:10.1f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
