"""Deterministic rule-table diagnoser used as the reference backend.

Thresholds are standard clinical cut-points (EF 40/50/55, wall 12/15 mm,
LVEDD 58 mm) chosen to make a reproducible testing backend; they make no
claim about any learned classifier.  Probabilities are a softened
one-hot (0.85 on the predicted class).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..aha17 import Bullseye17
from ..quantify import MeasurementSet

__all__ = ["DiagnosisResult", "STAGE1_CLASSES", "STAGE2_CLASSES", "rule_diagnoser"]

STAGE1_CLASSES = ["NH", "IHD", "NICM"]
STAGE2_CLASSES = ["HCM", "DCM", "RCM", "ACM", "Myocarditis"]


@dataclass
class DiagnosisResult:
    stage: int
    probabilities: dict[str, float]
    predicted: str
    evidence: list[str] = field(default_factory=list)

    def __post_init__(self):
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, not 1")
        classes = STAGE1_CLASSES if self.stage == 1 else STAGE2_CLASSES
        best = max(classes, key=lambda c: self.probabilities.get(c, 0.0))
        if self.predicted != best:
            raise ValueError("predicted label is not the argmax")

    def to_json(self) -> dict:
        return {"stage": self.stage, "probabilities": self.probabilities,
                "predicted": self.predicted, "evidence": self.evidence}

    @classmethod
    def from_json(cls, payload: dict) -> "DiagnosisResult":
        return cls(stage=payload["stage"], probabilities=payload["probabilities"],
                   predicted=payload["predicted"], evidence=list(payload.get("evidence", [])))


def _softened(classes: list[str], winner: str, confidence: float = 0.85) -> dict[str, float]:
    rest = (1.0 - confidence) / (len(classes) - 1)
    return {c: confidence if c == winner else rest for c in classes}


def _result(stage: int, classes: list[str], winner: str, evidence: list[str],
            confidence: float = 0.85) -> DiagnosisResult:
    return DiagnosisResult(stage=stage, probabilities=_softened(classes, winner, confidence),
                           predicted=winner, evidence=evidence)


def _wall_stats(thickness: Bullseye17) -> tuple[float, float]:
    """(max segment thickness, coefficient of variation across segments)."""
    vals = np.array([v for seg, v in thickness.values.items() if seg != 17])
    if len(vals) == 0:
        raise ValueError("thickness bullseye has no wall segments")
    cv = float(vals.std() / vals.mean()) if vals.mean() > 0 else 0.0
    return float(vals.max()), cv


def rule_diagnoser(measurements: MeasurementSet, thickness: Bullseye17,
                   lge: Bullseye17 | None = None, stage: int = 1,
                   feature_flags: set[str] | None = None) -> DiagnosisResult:
    """Apply the fixed rule table for stage-1 screening or stage-2 subtyping."""
    feature_flags = feature_flags or set()
    ef = measurements.value("LVEF")
    lvedd = measurements.value("LVEDD")
    if ef is None:
        raise ValueError("LVEF required")
    max_wall, cv = _wall_stats(thickness)
    if stage == 1:
        evidence = [f"LVEF={ef:.1f}%", f"max wall={max_wall:.1f}mm", f"thickness CV={cv:.2f}"]
        if lvedd is not None:
            evidence.append(f"LVEDD={lvedd:.1f}mm")
        if ef < 40 and lvedd is not None and lvedd > 58:
            return _result(1, STAGE1_CLASSES, "NICM", evidence + ["dilated, reduced EF"])
        if ef < 50 and cv > 0.25:
            return _result(1, STAGE1_CLASSES, "IHD", evidence + ["regional thinning pattern"])
        if ef >= 55 and max_wall <= 12:
            return _result(1, STAGE1_CLASSES, "NH", evidence + ["normal function and wall"])
        return _result(1, STAGE1_CLASSES, "NICM",
                       evidence + ["low-confidence: no rule matched"], confidence=0.4)
    if stage == 2:
        evidence = [f"LVEF={ef:.1f}%", f"max wall={max_wall:.1f}mm"]
        burden = 0.0
        if lge is not None and lge.values:
            burden = max(lge.values.values())
            evidence.append(f"max LGE burden={burden:.2f}")
        if "RCM" in feature_flags:
            return _result(2, STAGE2_CLASSES, "RCM", evidence + ["restrictive feature flag"])
        if "ACM" in feature_flags:
            return _result(2, STAGE2_CLASSES, "ACM", evidence + ["arrhythmogenic feature flag"])
        if max_wall >= 15:
            return _result(2, STAGE2_CLASSES, "HCM", evidence + ["hypertrophied wall"])
        if lvedd is not None and lvedd > 58 and ef < 40:
            return _result(2, STAGE2_CLASSES, "DCM", evidence + ["dilated, reduced EF"])
        if burden > 0:
            return _result(2, STAGE2_CLASSES, "Myocarditis",
                           evidence + ["LGE with normal geometry"])
        return _result(2, STAGE2_CLASSES, "Myocarditis",
                       evidence + ["low-confidence: no rule matched"], confidence=0.4)
    raise ValueError(f"unknown stage {stage}")
