"""AHA 17-segment partitioning, wall thickness, and LGE burden.

Angles are measured about the LV cavity centroid in the imaging plane:
0 deg points along +col (image right), +90 deg toward decreasing row
(image up), counterclockwise positive.  Rotation sense: from the
anterior wall the anteroseptal wall lies clockwise (toward the septum),
matching an RV on image-left.  Slice index 0 is the most basal slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .volume_io import LabelMask

__all__ = [
    "SegmentLabeling",
    "Bullseye17",
    "SEGMENT_NAMES",
    "locate_rv_insertions",
    "assign_segments",
    "segment_wall_thickness",
    "lge_burden",
    "bullseye_export",
    "bullseye_from_json",
]

ORIENTATION = "anterior->anteroseptal clockwise (RV image-left)"

# id -> (name, ring); basal 1-6, mid 7-12, apical 13-16, apex 17
SEGMENT_NAMES: dict[int, tuple[str, str]] = {
    1: ("AW", "basal"), 2: ("ASW", "basal"), 3: ("ISW", "basal"),
    4: ("IW", "basal"), 5: ("ILW", "basal"), 6: ("ALW", "basal"),
    7: ("AW", "mid"), 8: ("ASW", "mid"), 9: ("ISW", "mid"),
    10: ("IW", "mid"), 11: ("ILW", "mid"), 12: ("ALW", "mid"),
    13: ("AW", "apical"), 14: ("SW", "apical"), 15: ("IW", "apical"),
    16: ("LW", "apical"),
    17: ("apex", "apex"),
}


@dataclass
class SegmentLabeling:
    assignment: np.ndarray  # per-voxel segment id, 0 outside the myocardium
    insertion_angle: float  # anterior RV insertion, radians
    axis_thirds: dict[str, list[int]]  # ring -> slice indices
    orientation: str = ORIENTATION
    centroids: dict[int, tuple[float, float]] = field(default_factory=dict)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass
class Bullseye17:
    values: dict[int, float]  # segment id -> value; absent segments omitted
    quantity: str  # LVEDWT | LGE_BURDEN
    statistic: str  # mean | max
    orientation: str = ORIENTATION
    extras: dict = field(default_factory=dict)


def _cavity_centroid(plane_cavity: np.ndarray) -> tuple[float, float]:
    coords = np.argwhere(plane_cavity)
    return float(coords[:, 0].mean()), float(coords[:, 1].mean())


def _angle_of(dy_row: np.ndarray, dx_col: np.ndarray) -> np.ndarray:
    """Angle in [0, 2pi): +col is 0, decreasing row is +90 deg."""
    return np.mod(np.arctan2(-dy_row, dx_col), 2.0 * np.pi)


def locate_rv_insertions(sax_mask: LabelMask,
                         landmark_angle: float | None = None) -> dict[str, float]:
    """Anterior/inferior RV insertion angles about the LV cavity centroid.

    Insertions are the two contiguous arcs where RV voxels touch LV
    myocardium (8-neighborhood in-plane), each reported as its arc
    midpoint.  The anterior one is the arc reached first going
    counterclockwise from image up.  Falls back to ``landmark_angle``
    (anterior) when no RV is present.
    """
    cav = sax_mask.label_for("LV cavity")
    myo = sax_mask.label_for("LV myocardium")
    rv = sax_mask.label_for("RV")
    angles: list[float] = []
    if rv is not None:
        for z in range(sax_mask.shape[0]):
            plane = sax_mask.labels[z]
            rv_plane = plane == rv
            myo_plane = plane == myo
            cav_plane = plane == cav
            if not (rv_plane.any() and myo_plane.any() and cav_plane.any()):
                continue
            # RV voxels 8-adjacent to myocardium
            grown = np.zeros_like(myo_plane)
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    grown |= np.roll(np.roll(myo_plane, dr, axis=0), dc, axis=1)
            touch = rv_plane & grown
            if not touch.any():
                continue
            cy, cx = _cavity_centroid(cav_plane)
            coords = np.argwhere(touch).astype(np.float64)
            angles.extend(_angle_of(coords[:, 0] - cy, coords[:, 1] - cx).tolist())
    if not angles:
        if landmark_angle is None:
            raise ValueError("no RV-LV adjacency found and no landmark supplied")
        return {"anterior_angle": float(np.mod(landmark_angle, 2 * np.pi)),
                "inferior_angle": float(np.mod(landmark_angle + np.pi, 2 * np.pi))}
    # cluster into contiguous arcs on the circle (gap threshold 20 deg)
    a = np.sort(np.asarray(angles))
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    cut = int(np.argmax(gaps))
    rolled = np.concatenate([a[cut + 1:], a[:cut + 1] + 2 * np.pi])
    arc_breaks = np.nonzero(np.diff(rolled) > np.deg2rad(20))[0]
    arcs = [arc for arc in np.split(rolled, arc_breaks + 1) if len(arc)]
    if len(arcs) == 1:
        mid = float(np.mod(arcs[0].mean(), 2 * np.pi))
        return {"anterior_angle": mid,
                "inferior_angle": float(np.mod(mid + np.pi, 2 * np.pi))}
    # anterior = first arc counterclockwise from image up (90 deg); an arc
    # spanning "up" counts as distance zero
    up = np.pi / 2

    def ccw_dist(arc: np.ndarray) -> float:
        lo, hi = float(arc.min()), float(arc.max())
        d_lo = np.mod(lo - up, 2 * np.pi)
        d_hi = np.mod(hi - up, 2 * np.pi)
        if d_hi <= d_lo:  # arc interval spans "up"
            return 0.0
        return d_lo

    arcs.sort(key=ccw_dist)
    mids = [float(np.mod(arc.mean(), 2 * np.pi)) for arc in arcs[:2]]
    return {"anterior_angle": mids[0], "inferior_angle": mids[1]}


def _ring_of_sector(theta: np.ndarray, anterior: float, n_sectors: int) -> np.ndarray:
    """Sector index 0..n-1 going clockwise from the anterior insertion.

    Sector 0 spans [anterior, anterior + width) counterclockwise (the
    anterior wall); sectors 1.. proceed clockwise toward the septum.
    """
    width = 2.0 * np.pi / n_sectors
    rel = np.mod(theta - anterior, 2.0 * np.pi)
    ccw_sector = np.floor(rel / width).astype(int)  # 0 = AW sector
    # clockwise enumeration: AW stays 0, the sector clockwise of it is 1, ...
    return np.mod(n_sectors - ccw_sector, n_sectors)


def assign_segments(sax_masks: LabelMask, insertions: dict[str, float],
                    axis_split: dict[str, list[int]] | None = None) -> SegmentLabeling:
    """Partition every myocardial voxel into AHA segments 1..17.

    Cavity-bearing slices split into basal/mid/apical thirds (remainder
    to basal then mid); cavity-free slices beyond the apical third form
    the apex cap (segment 17).
    """
    cav = sax_masks.label_for("LV cavity")
    myo = sax_masks.label_for("LV myocardium")
    myo_vol = sax_masks.labels == myo
    lge = sax_masks.label_for("LGE")
    if lge is not None:
        # enhanced tissue is myocardium for the purpose of segment assignment
        myo_vol |= sax_masks.labels == lge
    cav_slices = [z for z in range(sax_masks.shape[0]) if (sax_masks.labels[z] == cav).any()]
    if len(cav_slices) < 3:
        raise ValueError("need at least 3 cavity-bearing slices")
    if axis_split is None:
        n = len(cav_slices)
        base_n = n // 3 + (1 if n % 3 >= 1 else 0)
        mid_n = n // 3 + (1 if n % 3 == 2 else 0)
        # cavity-free myocardium basal of the first cavity slice joins the base
        pre_basal = [z for z in range(min(cav_slices)) if myo_vol[z].any()]
        axis_split = {
            "basal": pre_basal + cav_slices[:base_n],
            "mid": cav_slices[base_n:base_n + mid_n],
            "apical": cav_slices[base_n + mid_n:],
        }
    apex_slices = [z for z in range(sax_masks.shape[0])
                   if z > max(cav_slices) and myo_vol[z].any()]
    anterior = insertions["anterior_angle"]
    assignment = np.zeros(sax_masks.shape, dtype=np.int16)
    centroids: dict[int, tuple[float, float]] = {}
    ring_cfg = {"basal": (6, 1), "mid": (6, 7), "apical": (4, 13)}
    for ring, slices in axis_split.items():
        n_sectors, base_id = ring_cfg[ring]
        for z in slices:
            plane_myo = myo_vol[z]
            if not plane_myo.any():
                continue
            cav_plane = sax_masks.labels[z] == cav
            cy, cx = _cavity_centroid(cav_plane if cav_plane.any() else plane_myo)
            centroids[z] = (cy, cx)
            coords = np.argwhere(plane_myo).astype(np.float64)
            theta = _angle_of(coords[:, 0] - cy, coords[:, 1] - cx)
            sector = _ring_of_sector(theta, anterior, n_sectors)
            assignment[z][plane_myo] = base_id + sector
    for z in apex_slices:
        assignment[z][myo_vol[z]] = 17
    return SegmentLabeling(assignment=assignment, insertion_angle=anterior,
                           axis_thirds=axis_split, centroids=centroids,
                           spacing=sax_masks.spacing)


def segment_wall_thickness(labeling: SegmentLabeling, ed_mask: LabelMask) -> Bullseye17:
    """Per-segment mean wall thickness (mm) by 1-degree ray casting.

    Each ray from the cavity centroid takes the innermost myocardial
    crossing; rays with no crossing are excluded and counted in a
    coverage flag.  Max thickness per segment is carried in ``extras``.
    """
    cav = ed_mask.label_for("LV cavity")
    myo = ed_mask.label_for("LV myocardium")
    myo_vol = ed_mask.labels == myo
    if not myo_vol.any():
        raise ValueError("empty myocardium")
    dy, dx = ed_mask.spacing[1], ed_mask.spacing[2]
    step = 0.2 * min(dy, dx)
    max_r = 2.0 * max(ed_mask.shape[1] * dy, ed_mask.shape[2] * dx)
    angles = np.deg2rad(np.arange(0.0, 360.0))
    anterior = labeling.insertion_angle
    per_segment: dict[int, list[float]] = {i: [] for i in range(1, 18)}
    missed = 0
    ring_cfg = {"basal": (6, 1), "mid": (6, 7), "apical": (4, 13)}
    for ring, slices in labeling.axis_thirds.items():
        n_sectors, base_id = ring_cfg[ring]
        sector = _ring_of_sector(angles, anterior, n_sectors)
        for z in slices:
            plane_myo = myo_vol[z]
            cav_plane = ed_mask.labels[z] == cav
            if not plane_myo.any() or not cav_plane.any():
                continue  # rays need a cavity center; cap slices are excluded
            cy, cx = _cavity_centroid(cav_plane)
            runs = kernels.first_ray_run(plane_myo, cy, cx, dy, dx, angles, step, max_r)
            for a in range(len(angles)):
                if runs[a, 0] < 0:
                    missed += 1
                    continue
                thickness = runs[a, 1] - runs[a, 0]
                per_segment[base_id + sector[a]].append(thickness)
    # apex thickness from apex-cap voxel extent along z
    apex_mask = labeling.assignment == 17
    values: dict[int, float] = {}
    maxima: dict[int, float] = {}
    for seg, vals in per_segment.items():
        if seg == 17:
            continue
        if vals:
            values[seg] = float(np.mean(vals))
            maxima[seg] = float(np.max(vals))
    if apex_mask.any():
        zs = np.unique(np.argwhere(apex_mask)[:, 0])
        values[17] = float(len(zs) * ed_mask.spacing[0])
        maxima[17] = values[17]
    return Bullseye17(values=values, quantity="LVEDWT", statistic="mean",
                      extras={"max": maxima, "rays_without_crossing": missed})


def lge_burden(lge_mask: LabelMask, labeling: SegmentLabeling) -> Bullseye17:
    """Per-segment LGE voxel fraction of the myocardium, in [0, 1]."""
    lge_label = lge_mask.label_for("LGE")
    if lge_label is None:
        raise ValueError("schema lacks LGE label")
    lge = lge_mask.labels == lge_label
    if lge.shape != labeling.assignment.shape:
        raise ValueError("LGE mask not aligned with segment labeling")
    values: dict[int, float] = {}
    counts: dict[int, int] = {}
    for seg in range(1, 18):
        in_seg = labeling.assignment == seg
        n_myo = int(in_seg.sum())
        if n_myo == 0:
            continue
        n_lge = int((in_seg & lge).sum())
        values[seg] = n_lge / n_myo
        counts[seg] = n_lge
    return Bullseye17(values=values, quantity="LGE_BURDEN", statistic="mean",
                      extras={"lge_voxels": counts})


_RING_GEOM = {"basal": 0, "mid": 1, "apical": 2, "apex": 3}


def bullseye_export(b: Bullseye17) -> dict:
    """Polar-map document: outer ring = basal, center = apex."""
    segments = []
    for seg in range(1, 18):
        name, ring = SEGMENT_NAMES[seg]
        if ring == "basal" or ring == "mid":
            idx = (seg - 1) % 6
            theta0, theta1 = idx * 60.0, (idx + 1) * 60.0
        elif ring == "apical":
            idx = (seg - 13) % 4
            theta0, theta1 = idx * 90.0, (idx + 1) * 90.0
        else:
            theta0, theta1 = 0.0, 360.0
        segments.append({
            "id": seg, "name": name, "ring": ring,
            "theta0_deg": theta0, "theta1_deg": theta1,
            "value": b.values.get(seg),
        })
    return {"quantity": b.quantity, "statistic": b.statistic,
            "orientation": b.orientation, "segments": segments}


def bullseye_from_json(doc: dict) -> Bullseye17:
    values = {s["id"]: s["value"] for s in doc["segments"] if s["value"] is not None}
    return Bullseye17(values=values, quantity=doc["quantity"],
                      statistic=doc["statistic"], orientation=doc["orientation"])
