"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--size 64] [--coils 4] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from jsmoco.geometry import cartesian_coords, rotate_coords
from jsmoco.kernels import backends
from jsmoco.nufft import get_gridder


def workload(size: int, coils: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    coords = rotate_coords(cartesian_coords(size, size), 0.3)
    gridder = get_gridder(size, size)
    tab = gridder.table(coords)
    grid = rng.standard_normal((coils, gridder.k1, gridder.k2)) + 1j * rng.standard_normal((coils, gridder.k1, gridder.k2))
    samples = rng.standard_normal((coils, coords.shape[0])) + 1j * rng.standard_normal((coils, coords.shape[0]))
    image = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return gridder, tab, grid, samples, image, coords


def bench(size: int, coils: int, repeat: int) -> list[tuple]:
    gridder, tab, grid, samples, image, coords = workload(size, coils)
    small = coords[: min(coords.shape[0], 512)]
    rows = []
    impls = backends()
    for name, fn in [
        ("interp", lambda k: k.interp(grid, tab.iy, tab.wy, tab.ix, tab.wx)),
        ("spread", lambda k: k.spread(samples, tab.iy, tab.wy, tab.ix, tab.wx, np.zeros_like(grid))),
        ("dft", lambda k: k.dft(image, small)),
        ("dft_adjoint", lambda k: k.dft_adjoint(samples[0, : small.shape[0]], small, size, size)),
    ]:
        times, outs = {}, {}
        for backend, mod in impls.items():
            if mod is None:
                continue
            outs[backend] = fn(mod)
            times[backend] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat))
        diff = np.nan
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            diff = float(np.linalg.norm(a - b) / np.linalg.norm(a))
        rows.append((name, times.get("python", np.nan), times.get("cython", np.nan), diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--coils", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"size={args.size} coils={args.coils} (best of {args.repeat})")
    print(f"{'kernel':<12} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8} {'rel diff':>10}")
    for name, tp, tc, diff in bench(args.size, args.coils, args.repeat):
        print(f"{name:<12} {1e3 * tp:12.3f} {1e3 * tc:12.3f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
