"""Numba ``@njit`` kernel implementations (default backend)."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _directed_min_dists(src, dst):
    n = src.shape[0]
    m = dst.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        for j in range(m):
            d0 = src[i, 0] - dst[j, 0]
            d1 = src[i, 1] - dst[j, 1]
            d2 = src[i, 2] - dst[j, 2]
            d = d0 * d0 + d1 * d1 + d2 * d2
            if d < best:
                best = d
        out[i] = math.sqrt(best)
    return out


def directed_min_dists(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return _directed_min_dists(
        np.ascontiguousarray(src, dtype=np.float64),
        np.ascontiguousarray(dst, dtype=np.float64),
    )


@njit(cache=True)
def _first_ray_run(mask, cy, cx, dy, dx, angles, step, max_r):
    n_angles = angles.shape[0]
    n_steps = int(max_r / step) + 1
    out = np.full((n_angles, 2), -1.0)
    for a in range(n_angles):
        uy = -math.sin(angles[a])
        ux = math.cos(angles[a])
        entry = -1.0
        done = False
        for k in range(n_steps):
            t = k * step
            r = int(math.floor(cy + uy * t / dy + 0.5))
            c = int(math.floor(cx + ux * t / dx + 0.5))
            hit = (0 <= r < mask.shape[0] and 0 <= c < mask.shape[1]
                   and mask[r, c])
            if hit and entry < 0.0:
                entry = t
            elif not hit and entry >= 0.0:
                out[a, 0] = entry
                out[a, 1] = t
                done = True
                break
        if not done and entry >= 0.0:
            out[a, 0] = entry
            out[a, 1] = n_steps * step
    return out


def first_ray_run(mask: np.ndarray, cy: float, cx: float,
                  dy: float, dx: float, angles: np.ndarray,
                  step: float, max_r: float) -> np.ndarray:
    return _first_ray_run(np.ascontiguousarray(mask, dtype=np.bool_),
                          float(cy), float(cx), float(dy), float(dx),
                          np.ascontiguousarray(angles, dtype=np.float64),
                          float(step), float(max_r))
