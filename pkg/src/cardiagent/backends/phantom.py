"""Synthetic ellipsoid phantom with analytic ground truth.

The phantom voxelizes an ellipsoidal LV cavity, a concentric myocardial
shell, two RV insertion blocks, optional LGE, a 4CH plane with atria,
and knows its own closed-form measurements.  Intensities encode labels
as ``label * 100`` plus bounded noise, so a thresholding oracle backend
can reconstruct the exact ground-truth mask from the image alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..aha17 import SegmentLabeling, assign_segments
from ..quantify import (MYOCARDIAL_DENSITY_G_PER_ML, Measurement, MeasurementSet)
from ..volume_io import LABEL_SCHEMAS, CineVolume, LabelMask, SequenceKind

__all__ = ["PhantomSpec", "Phantom", "phantom_generate", "mask_from_intensities"]

INTENSITY_PER_LABEL = 100.0


@dataclass
class PhantomSpec:
    """Geometry of the synthetic study; all lengths in mm."""

    ed_axes: tuple[float, float, float] = (30.0, 30.0, 30.0)  # (z, y, x) semi-axes
    es_axes: tuple[float, float, float] = (24.0, 24.0, 24.0)
    shell_thickness: float = 8.0
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    heart_rate: float | None = 70.0
    rv_blocks: bool = True
    rv_arcs_deg: tuple[tuple[float, float], tuple[float, float]] = ((60.0, 120.0), (200.0, 260.0))
    lge_segment: int | None = None  # AHA segment id fully covered by LGE
    apex_cap: float = 8.0
    la_axes: tuple[float, float] = (20.0, 10.0)  # (long, transverse) semi-axes
    ra_axes: tuple[float, float] = (18.0, 9.0)
    noise_level: float = 0.0  # absolute intensity units, must stay < 50
    seed: int = 0

    def __post_init__(self):
        if any(e > d for e, d in zip(self.es_axes, self.ed_axes)):
            raise ValueError("ES axes must not exceed ED axes")
        if self.shell_thickness <= 0:
            raise ValueError("shell thickness must be positive")
        if not 0 <= self.noise_level < 50:
            raise ValueError("noise level must stay below half the label intensity step")


@dataclass
class Phantom:
    spec: PhantomSpec
    sax_cine: CineVolume
    sax_masks: list[LabelMask]
    ch4_cine: CineVolume
    ch4_mask: LabelMask
    ch2_cine: CineVolume
    ch2_mask: LabelMask
    lge_volume: CineVolume | None
    lge_mask: LabelMask | None
    analytic: MeasurementSet
    insertion_angle: float = math.pi / 2
    labeling: SegmentLabeling | None = None
    extras: dict = field(default_factory=dict)


def _ellipsoid_ml(axes: tuple[float, float, float]) -> float:
    az, ay, ax = axes
    return 4.0 / 3.0 * math.pi * az * ay * ax / 1000.0


def _sax_labels(spec: PhantomSpec, cavity_axes, shape, center) -> np.ndarray:
    dz, dy, dx = spec.spacing
    z = (np.arange(shape[0]) - center[0])[:, None, None] * dz
    y = (np.arange(shape[1]) - center[1])[None, :, None] * dy
    x = (np.arange(shape[2]) - center[2])[None, None, :] * dx
    az, ay, ax = cavity_axes
    t = spec.shell_thickness
    rho_cav = (z / az) ** 2 + (y / ay) ** 2 + (x / ax) ** 2
    rho_epi = (z / (az + t)) ** 2 + (y / (ay + t)) ** 2 + (x / (ax + t)) ** 2
    labels = np.zeros(shape, dtype=np.int16)
    labels[rho_epi <= 1.0] = 2  # myocardium
    labels[rho_cav <= 1.0] = 1  # cavity overrides
    if spec.rv_blocks:
        theta = np.mod(np.arctan2(-y, x), 2 * np.pi) * np.ones(shape)
        rv_band = (rho_epi > 1.0) & (
            (z / (az + t + 8.0)) ** 2 + (y / (ay + t + 8.0)) ** 2 + (x / (ax + t + 8.0)) ** 2 <= 1.0)
        for a0, a1 in spec.rv_arcs_deg:
            sel = rv_band & (theta >= math.radians(a0)) & (theta <= math.radians(a1))
            labels[sel] = 3
    return labels


def _grid_for(spec: PhantomSpec) -> tuple[tuple[int, int, int], tuple[float, float, float]]:
    dz, dy, dx = spec.spacing
    t = spec.shell_thickness + 10.0
    half_z = spec.ed_axes[0] + t
    half_y = spec.ed_axes[1] + t
    half_x = spec.ed_axes[2] + t
    shape = (2 * int(half_z / dz) + 1, 2 * int(half_y / dy) + 1, 2 * int(half_x / dx) + 1)
    center = tuple((s - 1) / 2.0 for s in shape)
    return shape, center


def _intensities(labels: np.ndarray, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    img = labels.astype(np.float32) * INTENSITY_PER_LABEL
    if spec.noise_level > 0:
        img += rng.uniform(-spec.noise_level, spec.noise_level, size=img.shape).astype(np.float32)
    return img


def mask_from_intensities(data: np.ndarray, kind: SequenceKind,
                          spacing: tuple[float, float, float]) -> LabelMask:
    """Threshold oracle: recover the label map from phantom intensities."""
    labels = np.clip(np.floor(data / INTENSITY_PER_LABEL + 0.5), 0,
                     max(LABEL_SCHEMAS[kind])).astype(np.int16)
    return LabelMask(labels=labels, spacing=spacing, schema=LABEL_SCHEMAS[kind], kind=kind)


def _ch4_labels(spec: PhantomSpec) -> np.ndarray:
    """Single-slice 4CH geometry: elongated LV with apical cap plus LA/RA."""
    _, dy, dx = spec.spacing
    # long axis along rows; the 4CH view is elongated relative to SAX
    a_long = 1.6 * spec.ed_axes[1]
    a_tr = spec.ed_axes[2]
    t, cap = spec.shell_thickness, spec.apex_cap
    la_long, la_tr = spec.la_axes
    ra_long, ra_tr = spec.ra_axes
    atr = max(2 * la_long, 2 * ra_long)
    half_rows = a_long + cap + atr + 14.0
    half_cols = max(a_tr + t, la_tr + ra_tr + 14.0) + 10.0
    n_rows = 2 * int(half_rows / dy) + 1
    n_cols = 2 * int(half_cols / dx) + 1
    rows = (np.arange(n_rows) - (n_rows - 1) / 2.0)[:, None] * dy
    cols = (np.arange(n_cols) - (n_cols - 1) / 2.0)[None, :] * dx
    cav = (rows / a_long) ** 2 + (cols / a_tr) ** 2 <= 1.0
    epi = (rows / (a_long + cap)) ** 2 + (cols / (a_tr + t)) ** 2 <= 1.0
    labels = np.zeros((n_rows, n_cols), dtype=np.int16)
    myo = epi & ~cav & (rows >= -a_long * 0.55)  # basal opening toward the atria
    labels[myo] = 2
    labels[cav] = 1
    la_cy = -a_long - la_long - 6.0
    ra_cy = -a_long - ra_long - 6.0
    la_cx = -(la_tr + 6.0)
    ra_cx = ra_tr + 6.0
    la = ((rows - la_cy) / la_long) ** 2 + ((cols - la_cx) / la_tr) ** 2 <= 1.0
    ra = ((rows - ra_cy) / ra_long) ** 2 + ((cols - ra_cx) / ra_tr) ** 2 <= 1.0
    labels[la & (labels == 0)] = 5
    labels[ra & (labels == 0)] = 6
    return labels[np.newaxis]


def phantom_generate(spec: PhantomSpec) -> Phantom:
    """Voxelize the phantom and derive its analytic measurement set."""
    rng = np.random.default_rng(spec.seed)
    shape, center = _grid_for(spec)

    sax_labels = [_sax_labels(spec, spec.ed_axes, shape, center),
                  _sax_labels(spec, spec.es_axes, shape, center)]
    sax_data = np.stack([_intensities(l, spec, rng) for l in sax_labels])
    sax_cine = CineVolume(kind=SequenceKind.SAX_CINE, data=sax_data,
                          spacing=spec.spacing, heart_rate=spec.heart_rate)
    sax_masks = [LabelMask(labels=l, spacing=spec.spacing,
                           schema=LABEL_SCHEMAS[SequenceKind.SAX_CINE],
                           kind=SequenceKind.SAX_CINE, phase=p)
                 for p, l in enumerate(sax_labels)]

    ch4_labels = _ch4_labels(spec)
    ch4_data = np.stack([_intensities(ch4_labels, spec, rng)] * 2)
    ch4_cine = CineVolume(kind=SequenceKind.CH4_CINE, data=ch4_data, spacing=spec.spacing,
                          heart_rate=spec.heart_rate)
    ch4_mask = LabelMask(labels=ch4_labels, spacing=spec.spacing,
                         schema=LABEL_SCHEMAS[SequenceKind.CH4_CINE],
                         kind=SequenceKind.CH4_CINE)

    ch2_labels = np.where(ch4_labels <= 2, ch4_labels, 0).astype(np.int16)
    ch2_data = np.stack([_intensities(ch2_labels, spec, rng)] * 2)
    ch2_cine = CineVolume(kind=SequenceKind.CH2_CINE, data=ch2_data, spacing=spec.spacing,
                          heart_rate=spec.heart_rate)
    ch2_mask = LabelMask(labels=ch2_labels, spacing=spec.spacing,
                         schema=LABEL_SCHEMAS[SequenceKind.CH2_CINE],
                         kind=SequenceKind.CH2_CINE)

    insertion = math.radians((spec.rv_arcs_deg[0][0] + spec.rv_arcs_deg[0][1]) / 2.0)
    labeling = None
    lge_volume = lge_mask = None
    if spec.lge_segment is not None:
        base = sax_labels[0].copy()
        lge_schema = LABEL_SCHEMAS[SequenceKind.SAX_LGE]
        lge_labels = np.where(base == 3, 0, base).astype(np.int16)  # drop RV
        carrier = LabelMask(labels=lge_labels, spacing=spec.spacing,
                            schema=lge_schema, kind=SequenceKind.SAX_LGE)
        labeling = assign_segments(carrier, {"anterior_angle": insertion,
                                             "inferior_angle": insertion + math.pi})
        lge_labels = lge_labels.copy()
        lge_labels[labeling.assignment == spec.lge_segment] = 3
        lge_mask = LabelMask(labels=lge_labels, spacing=spec.spacing,
                             schema=lge_schema, kind=SequenceKind.SAX_LGE)
        lge_volume = CineVolume(kind=SequenceKind.SAX_LGE,
                                data=_intensities(lge_labels, spec, rng)[np.newaxis],
                                spacing=spec.spacing)

    analytic = MeasurementSet()
    edv = _ellipsoid_ml(spec.ed_axes)
    esv = _ellipsoid_ml(spec.es_axes)
    sv = edv - esv
    ef = 100.0 * sv / edv
    t = spec.shell_thickness
    shell_ml = _ellipsoid_ml(tuple(a + t for a in spec.ed_axes)) - edv
    analytic.add(Measurement("LVEDV", edv, "mL", "SAX", "ED"))
    analytic.add(Measurement("LVESV", esv, "mL", "SAX", "ES"))
    analytic.add(Measurement("LVEF", ef, "%", "SAX"))
    analytic.add(Measurement("SV", sv, "mL", "SAX"))
    if spec.heart_rate is not None:
        analytic.add(Measurement("CO", sv * spec.heart_rate / 1000.0, "L/min", "SAX"))
    analytic.add(Measurement("LVM", shell_ml * MYOCARDIAL_DENSITY_G_PER_ML, "g", "SAX", "ED"))
    analytic.add(Measurement("LVEDD", 2.0 * max(spec.ed_axes[1], spec.ed_axes[2]), "mm", "SAX", "ED"))
    analytic.add(Measurement("LAT4CHD", 2.0 * spec.la_axes[1], "mm", "CH4"))
    analytic.add(Measurement("RAT4CHD", 2.0 * spec.ra_axes[1], "mm", "CH4"))
    analytic.add(Measurement("APEX_THICKNESS", spec.apex_cap, "mm", "CH4"))

    return Phantom(spec=spec, sax_cine=sax_cine, sax_masks=sax_masks,
                   ch4_cine=ch4_cine, ch4_mask=ch4_mask,
                   ch2_cine=ch2_cine, ch2_mask=ch2_mask,
                   lge_volume=lge_volume, lge_mask=lge_mask,
                   analytic=analytic, insertion_angle=insertion, labeling=labeling)
