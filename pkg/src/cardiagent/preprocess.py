"""Deterministic preprocessing transforms for backend dispatch.

The geometry is fixed per sequence kind: keep the central phases, resample
to a target spacing, crop a (200, 200) in-plane window around the mask
centroid, then crop/pad the stacked volume to the final fixed dims.
Centering tie rules: for an even surplus both ends lose equally; an odd
surplus drops (or pads) the extra voxel at the far end for crops and at
the back for pads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume_io import CineVolume, LabelMask, SequenceKind

__all__ = [
    "CropSpec",
    "CROP_SPECS",
    "central_phase_crop",
    "resample",
    "roi_crop",
    "fixed_crop_or_pad",
    "minmax_normalize",
    "dual_path_patches",
    "diagnosis_preprocess",
]


@dataclass(frozen=True)
class CropSpec:
    kind: SequenceKind
    phase_keep: int
    xy_roi: tuple[int, int]
    final_dims: tuple[int, int, int]


CROP_SPECS: dict[SequenceKind, CropSpec] = {
    SequenceKind.CH2_CINE: CropSpec(SequenceKind.CH2_CINE, 3, (200, 200), (80, 192, 192)),
    SequenceKind.CH4_CINE: CropSpec(SequenceKind.CH4_CINE, 3, (200, 200), (80, 192, 192)),
    SequenceKind.SAX_CINE: CropSpec(SequenceKind.SAX_CINE, 9, (200, 200), (288, 144, 144)),
    SequenceKind.SAX_LGE: CropSpec(SequenceKind.SAX_LGE, 1, (200, 200), (9, 144, 144)),
}

# Local patch dims for the dual-path crop, per sequence kind.
LOCAL_PATCH_DIMS: dict[SequenceKind, tuple[int, int, int]] = {
    SequenceKind.CH2_CINE: (32, 64, 64),
    SequenceKind.CH4_CINE: (32, 64, 64),
    SequenceKind.SAX_CINE: (64, 64, 64),
    SequenceKind.SAX_LGE: (3, 64, 64),
}


def _with_data(volume: CineVolume, data: np.ndarray) -> CineVolume:
    return CineVolume(kind=volume.kind, data=data, spacing=volume.spacing,
                      phase_interval_ms=volume.phase_interval_ms,
                      heart_rate=volume.heart_rate)


def central_phase_crop(cine: CineVolume, keep: int) -> CineVolume:
    """Retain the ``keep`` central phases."""
    p = cine.phases
    if keep > p:
        raise ValueError(f"cannot keep {keep} of {p} phases")
    surplus = p - keep
    front = surplus // 2
    return _with_data(cine, cine.data[front:front + keep])


def resample(volume: CineVolume, target_spacing: tuple[float, float, float],
             mode: str = "linear") -> CineVolume:
    """Resample spatial axes to a new spacing, origin-aligned voxel centers.

    ``linear`` (trilinear) for intensities, ``nearest`` for label maps.
    """
    if any(s <= 0 for s in target_spacing):
        raise ValueError("target spacing must be positive")
    old = np.asarray(volume.spacing, dtype=np.float64)
    new = np.asarray(target_spacing, dtype=np.float64)
    in_shape = np.asarray(volume.data.shape[1:])
    out_shape = np.maximum(np.rint(in_shape * old / new).astype(int), 0)
    if (out_shape == 0).any():
        raise ValueError(f"degenerate output dims {tuple(out_shape)}")
    if tuple(out_shape) == tuple(in_shape) and np.allclose(old, new):
        return _with_data(volume, volume.data.copy())
    order = 1 if mode == "linear" else 0
    grids = np.meshgrid(*[np.arange(n) * new[i] / old[i] for i, n in enumerate(out_shape)],
                        indexing="ij")
    coords = np.stack([g.ravel() for g in grids])
    out = np.empty((volume.phases, *out_shape), dtype=np.float64 if order else volume.data.dtype)
    for p in range(volume.phases):
        sampled = ndimage.map_coordinates(volume.data[p].astype(np.float64, copy=False),
                                          coords, order=order, mode="nearest")
        out[p] = sampled.reshape(out_shape)
    result = CineVolume(kind=volume.kind, data=out, spacing=tuple(float(s) for s in new),
                        phase_interval_ms=volume.phase_interval_ms,
                        heart_rate=volume.heart_rate)
    return result


def _crop_or_pad_axis(arr: np.ndarray, axis: int, size: int) -> np.ndarray:
    cur = arr.shape[axis]
    if cur == size:
        return arr
    if cur > size:
        surplus = cur - size
        front = surplus // 2
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(front, front + size)
        return arr[tuple(sl)]
    deficit = size - cur
    front = deficit // 2
    pads = [(0, 0)] * arr.ndim
    pads[axis] = (front, deficit - front)
    return np.pad(arr, pads, constant_values=0)


def roi_crop(volume: CineVolume, mask: LabelMask, size: tuple[int, int]) -> CineVolume:
    """In-plane crop centered at the mask foreground centroid, zero-padded."""
    fg = mask.labels > 0
    if not fg.any():
        raise ValueError("empty mask")
    coords = np.argwhere(fg)
    cy, cx = coords[:, 1].mean(), coords[:, 2].mean()
    rows, cols = size
    r0 = int(np.floor(cy + 0.5)) - rows // 2
    c0 = int(np.floor(cx + 0.5)) - cols // 2
    out = np.zeros((volume.phases, volume.slices, rows, cols), dtype=volume.data.dtype)
    nr, nc = volume.data.shape[2], volume.data.shape[3]
    src_r = slice(max(r0, 0), min(r0 + rows, nr))
    src_c = slice(max(c0, 0), min(c0 + cols, nc))
    dst_r = slice(src_r.start - r0, src_r.stop - r0)
    dst_c = slice(src_c.start - c0, src_c.stop - c0)
    out[:, :, dst_r, dst_c] = volume.data[:, :, src_r, src_c]
    return _with_data(volume, out)


def fixed_crop_or_pad(volume: CineVolume, dims: tuple[int, int, int]) -> CineVolume:
    """Center crop / symmetric zero-pad the stacked (phase*slice, row, col) volume."""
    stacked = volume.data.reshape(-1, *volume.data.shape[2:])
    for axis, size in enumerate(dims):
        stacked = _crop_or_pad_axis(stacked, axis, size)
    out = stacked[np.newaxis]  # stacked result is treated as single-phase
    return CineVolume(kind=volume.kind, data=out, spacing=volume.spacing,
                      phase_interval_ms=volume.phase_interval_ms,
                      heart_rate=volume.heart_rate)


def minmax_normalize(volume: CineVolume) -> tuple[CineVolume, bool]:
    """Affine map to [0, 1]; returns (volume, constant_flag)."""
    data = volume.data.astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return _with_data(volume, np.zeros_like(data)), True
    return _with_data(volume, (data - lo) / (hi - lo)), False


def _centered_window(arr: np.ndarray, center: tuple[int, ...], dims: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(dims, dtype=arr.dtype)
    src, dst = [], []
    for ax, (c, d) in enumerate(zip(center, dims)):
        start = c - d // 2
        s0, s1 = max(start, 0), min(start + d, arr.shape[ax])
        src.append(slice(s0, s1))
        dst.append(slice(s0 - start, s1 - start))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def dual_path_patches(volume: CineVolume, center: tuple[int, int, int],
                      local_dims: tuple[int, int, int]) -> dict[str, np.ndarray]:
    """Local patch at full resolution plus a 2x-extent global patch at half resolution."""
    vol = volume.data[0] if volume.phases == 1 else volume.data.reshape(-1, *volume.data.shape[2:])
    if not all(0 <= c < s for c, s in zip(center, vol.shape)):
        raise ValueError(f"center {center} outside volume {vol.shape}")
    local = _centered_window(vol, center, local_dims)
    global_dims = tuple(2 * d for d in local_dims)
    wide = _centered_window(vol, center, global_dims)
    global_patch = wide[::2, ::2, ::2]
    return {"local": local, "global": global_patch}


def diagnosis_preprocess(volume: CineVolume, mask: LabelMask,
                         target_spacing: tuple[float, float, float] | None = None) -> CineVolume:
    """Full fixed-geometry pipeline for the diagnosis backends.

    central phase crop -> (optional) resample -> ROI crop -> fixed crop/pad
    -> min-max normalization, per the CropSpec of the volume's kind.
    """
    spec = CROP_SPECS.get(volume.kind)
    if spec is None:
        raise ValueError(f"no CropSpec for {volume.kind}")
    v = central_phase_crop(volume, min(spec.phase_keep, volume.phases))
    if target_spacing is not None:
        v = resample(v, target_spacing, mode="linear")
        mask_v = CineVolume(kind=volume.kind, data=mask.labels[np.newaxis],
                            spacing=mask.spacing)
        mask_r = resample(mask_v, target_spacing, mode="nearest")
        mask = LabelMask(labels=mask_r.data[0].astype(mask.labels.dtype),
                         spacing=mask_r.spacing, schema=mask.schema, kind=mask.kind)
    v = roi_crop(v, mask, spec.xy_roi)
    v = fixed_crop_or_pad(v, spec.final_dims)
    v, _ = minmax_normalize(v)
    return v
