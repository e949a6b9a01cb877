"""Segmentation, classification, and agreement metrics.

Surface metrics operate on 6-connected boundary voxel sets and report
millimetres using the mask's anisotropic spacing.  Hausdorff is the true
maximum of the two directed max-min distances; a percentile variant is
available but never used in headline numbers.  ASD is one-directional
(ground truth -> prediction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .volume_io import LabelMask

__all__ = [
    "SurfaceSet",
    "ConfusionMatrix",
    "AgreementStats",
    "UndefinedMetricError",
    "surface_extract",
    "dsc",
    "hausdorff",
    "asd",
    "confusion_metrics",
    "weighted_f1",
    "roc_auc",
    "bland_altman",
]


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value (e.g. empty surface)."""


@dataclass
class SurfaceSet:
    """Boundary voxels of one label, with physical spacing."""

    voxels: np.ndarray  # (n, 3) int coordinates (z, y, x)
    spacing: tuple[float, float, float]
    empty_label: bool = False

    def __len__(self) -> int:
        return self.voxels.shape[0]

    def points_mm(self) -> np.ndarray:
        return self.voxels.astype(np.float64) * np.asarray(self.spacing, dtype=np.float64)


@dataclass
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.tn, self.fp) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


@dataclass
class AgreementStats:
    bias: float
    loa_low: float
    loa_high: float
    pearson_r: float | None
    n: int


def _binary(mask: LabelMask, label: int) -> np.ndarray:
    if label not in mask.schema:
        raise ValueError(f"label {label} absent from schema")
    return mask.labels == label


def surface_extract(mask: LabelMask, label: int) -> SurfaceSet:
    """Boundary voxels: labelled voxels with a 6-neighbor lacking the label.

    The volume border counts as background, so a labelled voxel on the
    edge of the array is always surface.
    """
    vol = _binary(mask, label)
    if not vol.any():
        return SurfaceSet(np.empty((0, 3), dtype=np.int64), mask.spacing, empty_label=True)
    padded = np.pad(vol, 1, constant_values=False)
    interior = np.ones_like(vol)
    for axis in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        interior &= padded[tuple(lo)] & padded[tuple(hi)]
    boundary = vol & ~interior
    coords = np.argwhere(boundary).astype(np.int64)
    return SurfaceSet(coords, mask.spacing)


def dsc(a: LabelMask, b: LabelMask, label: int) -> float:
    """Dice coefficient 2|A∩B| / (|A|+|B|); 1.0 when both sets empty."""
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch {a.shape} vs {b.shape}")
    va, vb = _binary(a, label), _binary(b, label)
    na, nb = int(va.sum()), int(vb.sum())
    if na + nb == 0:
        return 1.0
    inter = int((va & vb).sum())
    return 2.0 * inter / (na + nb)


def _surface_pair(a: LabelMask, b: LabelMask, label: int) -> tuple[np.ndarray, np.ndarray]:
    sa = surface_extract(a, label)
    sb = surface_extract(b, label)
    if len(sa) == 0 or len(sb) == 0:
        raise UndefinedMetricError(f"label {label}: surface distance undefined on empty surface")
    return sa.points_mm(), sb.points_mm()


def hausdorff(a: LabelMask, b: LabelMask, label: int, percentile: float | None = None) -> float:
    """Symmetric Hausdorff distance in mm between the two label surfaces.

    ``percentile`` switches to the HD-p variant (e.g. 95); headline
    metrics use the true maximum.
    """
    pa, pb = _surface_pair(a, b, label)
    d_ab = kernels.directed_min_dists(pa, pb)
    d_ba = kernels.directed_min_dists(pb, pa)
    if percentile is None:
        return max(float(d_ab.max()), float(d_ba.max()))
    return max(float(np.percentile(d_ab, percentile)),
               float(np.percentile(d_ba, percentile)))


def asd(pred: LabelMask, gt: LabelMask, label: int) -> float:
    """Average surface distance in mm, one-directional gt -> pred."""
    p_pred, p_gt = _surface_pair(pred, gt, label)
    return float(kernels.directed_min_dists(p_gt, p_pred).mean())


def confusion_metrics(cm: ConfusionMatrix) -> dict[str, float | None]:
    """Accuracy/sensitivity/specificity/precision/F1 from a binary table.

    Undefined quotients are reported as None, never coerced to 0.
    """
    acc = (cm.tp + cm.tn) / cm.total if cm.total else None
    sens = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    spec = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp else None
    prec = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    if prec is None or sens is None or prec + sens == 0:
        f1 = None
    else:
        f1 = 2 * prec * sens / (prec + sens)
    return {"accuracy": acc, "sensitivity": sens, "specificity": spec,
            "precision": prec, "f1": f1}


def weighted_f1(per_class: list[tuple[float, int]]) -> float:
    """Support-weighted mean of per-class F1 values."""
    supports = [s for _, s in per_class]
    if any(s < 0 for s in supports):
        raise ValueError("supports must be non-negative")
    total = sum(supports)
    if total == 0:
        raise ValueError("all supports zero")
    return sum(f * s for f, s in per_class) / total


def roc_auc(scores, labels, n_boot: int = 2000, seed: int = 0,
            alpha: float = 0.05) -> dict[str, float]:
    """AUC as the Mann-Whitney pair statistic, bootstrap percentile CI.

    ``labels`` are truthy for positives.  Ties in score count half.
    Bootstrap resamples cases with replacement; degenerate single-class
    resamples are redrawn.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores/labels length mismatch")
    pos = scores[labels]
    neg = scores[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need at least one positive and one negative")

    def _auc(p, n):
        diff = p[:, None] - n[None, :]
        return (np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)) / (len(p) * len(n))

    auc = _auc(pos, neg)
    rng = np.random.default_rng(seed)
    idx_all = np.arange(len(scores))
    boots = []
    attempts = 0
    while len(boots) < n_boot and attempts < 20 * n_boot:
        attempts += 1
        take = rng.choice(idx_all, size=len(idx_all), replace=True)
        lb = labels[take]
        if lb.all() or not lb.any():
            continue
        sc = scores[take]
        boots.append(_auc(sc[lb], sc[~lb]))
    boots = np.sort(np.asarray(boots))
    lo = float(np.percentile(boots, 100 * alpha / 2))
    hi = float(np.percentile(boots, 100 * (1 - alpha / 2)))
    return {"auc": float(auc), "ci_low": lo, "ci_high": hi}


def bland_altman(x, y) -> AgreementStats:
    """Bias and 95% limits of agreement of paired differences, plus Pearson r.

    Differences are y - x; LoA = bias +/- 1.96 * sample SD (ddof=1).
    Pearson r is None when either series has zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 pairs")
    d = y - x
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    sx = float(x.std(ddof=1))
    sy = float(y.std(ddof=1))
    if sx == 0.0 or sy == 0.0:
        r = None
    else:
        cov = float(((x - x.mean()) * (y - y.mean())).sum()) / (n - 1)
        r = cov / (sx * sy)
        r = max(-1.0, min(1.0, r))
    return AgreementStats(bias=bias, loa_low=bias - 1.96 * sd,
                          loa_high=bias + 1.96 * sd, pearson_r=r, n=n)
