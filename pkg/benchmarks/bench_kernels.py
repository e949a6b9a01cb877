"""Compare the numba and pure-numpy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``.  Shapes mirror the
real workloads: surface distance sets of a few thousand points
(hausdorff/asd on clinical masks) and 360 one-degree rays over a SAX
plane (wall thickness).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cardiagent.kernels import numba_impl, numpy_impl


def _surface_points(rng, n):
    return rng.uniform(0.0, 200.0, size=(n, 3))


def _annulus(size=192, inner=30.0, outer=42.0):
    c = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    r = np.hypot(rows - c, cols - c)
    return (r >= inner) & (r < outer)


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    cases = []
    for n in (500, 2000, 8000):
        src, dst = _surface_points(rng, n), _surface_points(rng, n)
        cases.append((f"directed_min_dists n={n}",
                      lambda s=src, d=dst: numpy_impl.directed_min_dists(s, d),
                      lambda s=src, d=dst: numba_impl.directed_min_dists(s, d)))
    mask = _annulus()
    angles = np.deg2rad(np.arange(360.0))
    kw = dict(cy=95.5, cx=95.5, dy=1.0, dx=1.0, angles=angles,
              step=0.25, max_r=90.0)
    cases.append(("first_ray_run 360 rays",
                  lambda: numpy_impl.first_ray_run(mask, **kw),
                  lambda: numba_impl.first_ray_run(mask, **kw)))

    # one warm call per kernel so JIT compilation stays out of the timings
    numba_impl.directed_min_dists(_surface_points(rng, 8), _surface_points(rng, 8))
    numba_impl.first_ray_run(mask, **kw)

    print(f"{'case':<28} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, np_fn, nb_fn in cases:
        a, b = np_fn(), nb_fn()
        assert np.allclose(a, b), f"backend mismatch in {name}"
        t_np = _time(np_fn, args.repeats) * 1e3
        t_nb = _time(nb_fn, args.repeats) * 1e3
        print(f"{name:<28} {t_np:>12.2f} {t_nb:>12.2f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
