"""Pure-numpy kernel implementations (fallback backend)."""

from __future__ import annotations

import numpy as np


def directed_min_dists(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Min Euclidean distance from each src point to the dst point set.

    Points are (n, 3) float64 in mm.  Chunked to bound the pairwise
    distance matrix at ~32 MB.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    dst = np.ascontiguousarray(dst, dtype=np.float64)
    n = src.shape[0]
    out = np.empty(n, dtype=np.float64)
    chunk = max(1, (4 << 20) // max(1, dst.shape[0]))
    for i in range(0, n, chunk):
        block = src[i:i + chunk]
        d2 = ((block[:, None, :] - dst[None, :, :]) ** 2).sum(axis=2)
        out[i:i + chunk] = np.sqrt(d2.min(axis=1))
    return out


def first_ray_run(mask: np.ndarray, cy: float, cx: float,
                  dy: float, dx: float, angles: np.ndarray,
                  step: float, max_r: float) -> np.ndarray:
    """First contiguous True run along each ray from (cy, cx).

    Rays march outward in mm steps; angle 0 points along +col, +90 deg
    toward decreasing row (image up).  Returns (n_angles, 2) of
    (entry_mm, exit_mm), or (-1, -1) where the ray never hits the mask.
    """
    mask = np.asarray(mask, dtype=bool)
    n_steps = int(max_r / step) + 1
    t = np.arange(n_steps) * step
    rows = np.floor(cy - np.sin(angles)[:, None] * t[None, :] / dy + 0.5).astype(np.int64)
    cols = np.floor(cx + np.cos(angles)[:, None] * t[None, :] / dx + 0.5).astype(np.int64)
    inside = (rows >= 0) & (rows < mask.shape[0]) & (cols >= 0) & (cols < mask.shape[1])
    hit = np.zeros_like(inside)
    hit[inside] = mask[rows[inside], cols[inside]]

    any_hit = hit.any(axis=1)
    entry = np.argmax(hit, axis=1)
    idx = np.arange(n_steps)
    pre = idx[None, :] < entry[:, None]
    ended = np.argmax(~(hit | pre), axis=1)
    no_end = (hit | pre).all(axis=1)
    ended[no_end] = n_steps

    out = np.full((angles.shape[0], 2), -1.0)
    out[any_hit, 0] = entry[any_hit] * step
    out[any_hit, 1] = ended[any_hit] * step
    return out
