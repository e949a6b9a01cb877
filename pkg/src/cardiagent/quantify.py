"""Cardiac structural and functional parameters from segmentation masks.

Volumes use voxel summation, diameters use chord measurements through
the relevant centroid, and apex thickness is measured along the LV long
axis on the 4CH view.  Suspicious inputs (negative EF, missing labels)
are flagged, never silently repaired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .volume_io import LabelMask

__all__ = [
    "Measurement",
    "MeasurementSet",
    "PhasePair",
    "cavity_volume",
    "detect_ed_es",
    "function_params",
    "lv_mass",
    "lvedd",
    "rvedd",
    "atrial_diameters",
    "apex_thickness",
    "quantify_study",
]

MYOCARDIAL_DENSITY_G_PER_ML = 1.05

# Canonical parameter order for tables and rendered reports.
PARAM_ORDER = ["LVEDV", "LVESV", "LVEF", "SV", "CO", "LVM",
               "LVEDD", "RVEDD", "LAT4CHD", "RAT4CHD", "APEX_THICKNESS"]

UNITS = {"LVEDV": "mL", "LVESV": "mL", "LVEF": "%", "SV": "mL", "CO": "L/min",
         "LVM": "g", "LVEDD": "mm", "RVEDD": "mm", "LAT4CHD": "mm",
         "RAT4CHD": "mm", "APEX_THICKNESS": "mm"}


@dataclass
class Measurement:
    name: str
    value: float
    unit: str
    source: str = "SAX"  # SAX | CH2 | CH4
    phase: str = "static"  # ED | ES | static
    flags: list[str] = field(default_factory=list)


@dataclass
class MeasurementSet:
    entries: dict[str, Measurement] = field(default_factory=dict)

    def add(self, m: Measurement) -> None:
        self.entries[m.name] = m

    def get(self, name: str) -> Measurement | None:
        return self.entries.get(name)

    def value(self, name: str) -> float | None:
        m = self.entries.get(name)
        return None if m is None else m.value

    def to_json(self) -> dict:
        return {name: {"value": m.value, "unit": m.unit, "source": m.source,
                       "phase": m.phase, "flags": m.flags}
                for name, m in self.entries.items()}

    @classmethod
    def from_json(cls, payload: dict) -> "MeasurementSet":
        ms = cls()
        for name, rec in payload.items():
            ms.add(Measurement(name=name, value=rec["value"], unit=rec["unit"],
                               source=rec.get("source", "SAX"),
                               phase=rec.get("phase", "static"),
                               flags=list(rec.get("flags", []))))
        return ms


@dataclass
class PhasePair:
    ed_phase: int
    es_phase: int
    volumes_by_phase: list[float]
    tie: bool = False


def cavity_volume(mask: LabelMask, label: int, spacing=None) -> tuple[float, bool]:
    """Label volume in mL by voxel summation; (volume, absent_flag)."""
    spacing = spacing or mask.spacing
    n = int((mask.labels == label).sum())
    voxel_ml = spacing[0] * spacing[1] * spacing[2] / 1000.0
    return n * voxel_ml, n == 0


def detect_ed_es(cine_masks: list[LabelMask], cavity_label: int) -> PhasePair:
    """ED = argmax, ES = argmin of cavity volume; first occurrence on ties.

    A fully constant volume curve is flagged with ED=0, ES=last.
    """
    if len(cine_masks) < 2:
        raise ValueError("need at least 2 phases")
    vols = [cavity_volume(m, cavity_label)[0] for m in cine_masks]
    arr = np.asarray(vols)
    if arr.max() == arr.min():
        return PhasePair(ed_phase=0, es_phase=len(vols) - 1, volumes_by_phase=vols, tie=True)
    return PhasePair(ed_phase=int(arr.argmax()), es_phase=int(arr.argmin()),
                     volumes_by_phase=vols)


def function_params(edv: float, esv: float, heart_rate: float | None = None) -> dict:
    """SV, LVEF, and (with a heart rate) CO from ED/ES volumes."""
    if edv <= 0:
        raise ValueError("EDV must be positive")
    sv = edv - esv
    ef = 100.0 * sv / edv
    out = {"LVEF": ef, "SV": sv, "flags": []}
    if esv > edv:
        out["flags"].append("negative-EF")
    if heart_rate is not None:
        out["CO"] = sv * heart_rate / 1000.0
    return out


def lv_mass(myo_mask: LabelMask, spacing=None,
            density: float = MYOCARDIAL_DENSITY_G_PER_ML) -> float:
    """Myocardial mass in g: label volume times density (default 1.05 g/mL)."""
    myo_label = myo_mask.label_for("LV myocardium")
    if myo_label is None:
        raise ValueError("schema lacks LV myocardium")
    vol_ml, absent = cavity_volume(myo_mask, myo_label, spacing)
    if absent:
        raise ValueError("no myocardial voxels")
    return vol_ml * density


def _boundary_2d(plane: np.ndarray) -> np.ndarray:
    interior = plane.copy()
    padded = np.pad(plane, 1, constant_values=False)
    interior &= padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return np.argwhere(plane & ~interior)


def _max_chord(plane: np.ndarray, dy: float, dx: float) -> float:
    """Max distance between boundary voxels whose chord passes the centroid.

    Works on voxel centers in mm; a chord counts if its line passes
    within half a voxel of the region centroid.  One in-plane voxel is
    added to convert the center-to-center distance to a physical extent.
    """
    coords = np.argwhere(plane)
    center = coords.mean(axis=0) * np.array([dy, dx])
    pts = _boundary_2d(plane).astype(np.float64) * np.array([dy, dx])
    tol = 0.5 * max(dy, dx)
    best = 0.0
    for i in range(len(pts)):
        d = pts - pts[i]
        lens = np.hypot(d[:, 0], d[:, 1])
        valid = lens > 0
        # perpendicular distance of the centroid from each chord line
        w = center - pts[i]
        cross = np.abs(d[:, 0] * w[1] - d[:, 1] * w[0])
        near = valid & (cross <= tol * lens)
        if near.any():
            best = max(best, float(lens[near].max()))
    return best + min(dy, dx)


def _chamber_diameter(masks: LabelMask | list[LabelMask], label: int) -> float:
    """Max endocardial chord on the mid-cavity slice, in mm."""
    mask = masks if isinstance(masks, LabelMask) else masks[0]
    has = [z for z in range(mask.shape[0]) if (mask.labels[z] == label).any()]
    if not has:
        raise ValueError("no cavity voxels")
    mid = has[len(has) // 2]
    plane = mask.labels[mid] == label
    if plane.sum() == 1:
        return float(min(mask.spacing[1], mask.spacing[2]))
    return _max_chord(plane, mask.spacing[1], mask.spacing[2])


def lvedd(sax_ed_mask: LabelMask) -> float:
    """LV end-diastolic diameter on the median cavity-bearing SAX slice."""
    label = sax_ed_mask.label_for("LV cavity")
    if label is None:
        raise ValueError("schema lacks LV cavity")
    return _chamber_diameter(sax_ed_mask, label)


def rvedd(sax_ed_mask: LabelMask) -> float:
    """RV end-diastolic diameter (experimental: measured like LVEDD on the RV label)."""
    label = sax_ed_mask.label_for("RV")
    if label is None:
        raise ValueError("schema lacks RV")
    return _chamber_diameter(sax_ed_mask, label)


def _principal_axes(coords_mm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(major, minor) unit vectors of a 2D point set from second moments."""
    centered = coords_mm - coords_mm.mean(axis=0)
    cov = centered.T @ centered / len(centered)
    evals, evecs = np.linalg.eigh(cov)
    return evecs[:, 1], evecs[:, 0]  # largest eigenvalue last


def _max_perpendicular_chord(plane: np.ndarray, dy: float, dx: float) -> float:
    """Max chord perpendicular to the region's principal axis.

    The span of voxel centers understates the physical extent by up to
    one pixel, so the pixel footprint along the across direction is
    added back.
    """
    coords = np.argwhere(plane).astype(np.float64)
    coords_mm = coords * np.array([dy, dx])
    major, minor = _principal_axes(coords_mm)
    along = coords_mm @ major
    across = coords_mm @ minor
    bin_w = min(dy, dx)
    bins = np.floor((along - along.min()) / bin_w).astype(int)
    best = 0.0
    for b in np.unique(bins):
        sel = across[bins == b]
        best = max(best, float(sel.max() - sel.min()))
    footprint = abs(float(minor[0])) * dy + abs(float(minor[1])) * dx
    return best + footprint


def atrial_diameters(ch4_mask: LabelMask) -> dict[str, float]:
    """Max transverse diameters of LA and RA on the 4CH view.

    Missing chamber labels simply drop the corresponding entry.
    """
    out: dict[str, float] = {}
    for name, key in (("LA", "LAT4CHD"), ("RA", "RAT4CHD")):
        label = ch4_mask.label_for(name)
        if label is None:
            continue
        has = [z for z in range(ch4_mask.shape[0]) if (ch4_mask.labels[z] == label).any()]
        if not has:
            continue
        plane = ch4_mask.labels[has[len(has) // 2]] == label
        out[key] = _max_perpendicular_chord(plane, ch4_mask.spacing[1], ch4_mask.spacing[2])
    return out


def apex_thickness(ch4_mask: LabelMask) -> tuple[float, list[str]]:
    """Myocardial cap thickness beyond the cavity apex, along the LV long axis."""
    cav_label = ch4_mask.label_for("LV cavity")
    myo_label = ch4_mask.label_for("LV myocardium")
    if cav_label is None or myo_label is None:
        raise ValueError("4CH schema lacks LV cavity or myocardium")
    cav = ch4_mask.labels == cav_label
    myo = ch4_mask.labels == myo_label
    if not cav.any() or not myo.any():
        raise ValueError("LV cavity or myocardium empty")
    # work on the slice with the most cavity voxels (4CH is near-planar)
    z = int(cav.sum(axis=(1, 2)).argmax())
    dy, dx = ch4_mask.spacing[1], ch4_mask.spacing[2]
    cav_mm = np.argwhere(cav[z]).astype(np.float64) * np.array([dy, dx])
    myo_mm = np.argwhere(myo[z]).astype(np.float64) * np.array([dy, dx])
    major, _ = _principal_axes(cav_mm)
    cav_proj = cav_mm @ major
    myo_proj = myo_mm @ major
    # apex end = the end where the myocardium extends further beyond the cavity
    over_hi = myo_proj.max() - cav_proj.max()
    over_lo = cav_proj.min() - myo_proj.min()
    thickness = float(max(over_hi, over_lo))
    flags = []
    if thickness <= 0.0:
        thickness = 0.0
        flags.append("thin-apex")
    return thickness, flags


def quantify_study(sax_masks: list[LabelMask], heart_rate: float | None = None,
                   ch4_mask: LabelMask | None = None) -> MeasurementSet:
    """Full measurement set from a per-phase SAX mask list (+ optional 4CH)."""
    ms = MeasurementSet()
    cav_label = sax_masks[0].label_for("LV cavity")
    pair = detect_ed_es(sax_masks, cav_label)
    edv = pair.volumes_by_phase[pair.ed_phase]
    esv = pair.volumes_by_phase[pair.es_phase]
    tie_flags = ["ed-es-tie"] if pair.tie else []
    ms.add(Measurement("LVEDV", edv, "mL", "SAX", "ED", list(tie_flags)))
    ms.add(Measurement("LVESV", esv, "mL", "SAX", "ES", list(tie_flags)))
    fp = function_params(edv, esv, heart_rate)
    ms.add(Measurement("LVEF", fp["LVEF"], "%", "SAX", "static", list(fp["flags"])))
    ms.add(Measurement("SV", fp["SV"], "mL", "SAX", "static"))
    if "CO" in fp:
        ms.add(Measurement("CO", fp["CO"], "L/min", "SAX", "static"))
    ed_mask = sax_masks[pair.ed_phase]
    try:
        ms.add(Measurement("LVM", lv_mass(ed_mask), "g", "SAX", "ED"))
    except ValueError:
        pass
    try:
        ms.add(Measurement("LVEDD", lvedd(ed_mask), "mm", "SAX", "ED"))
    except ValueError:
        pass
    try:
        ms.add(Measurement("RVEDD", rvedd(ed_mask), "mm", "SAX", "ED", ["experimental"]))
    except ValueError:
        pass
    if ch4_mask is not None:
        for key, val in atrial_diameters(ch4_mask).items():
            ms.add(Measurement(key, val, "mm", "CH4", "static"))
        try:
            apex, flags = apex_thickness(ch4_mask)
            ms.add(Measurement("APEX_THICKNESS", apex, "mm", "CH4", "static", flags))
        except ValueError:
            pass
    return ms
