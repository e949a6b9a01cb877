"""Structured CMR reports: assembly, narrative rendering, rubric scoring.

Every numeric value in a report traces back to an artifact id; rendering
is deterministic and template based.  Scoring follows a 100-point rubric
split into clinical accuracy (70) and technical completeness (30) with a
graded hallucination penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .aha17 import SEGMENT_NAMES, Bullseye17, bullseye_export, bullseye_from_json
from .backends.rule import DiagnosisResult
from .quantify import PARAM_ORDER, MeasurementSet

__all__ = [
    "StructuredReport", "RubricScore", "ReferenceFindings",
    "assemble_report", "render_report", "quant_deduction", "score_report",
]


@dataclass
class StructuredReport:
    patient_context: str | None = None
    function_quantification: MeasurementSet | None = None
    wall_assessment: Bullseye17 | None = None
    lge_findings: Bullseye17 | None = None
    diagnosis: list[DiagnosisResult] = field(default_factory=list)
    other_findings: list[str] = field(default_factory=list)
    impression: str | None = None
    provenance: dict[str, str] = field(default_factory=dict)  # section/name -> artifact id

    def to_json(self) -> dict:
        return {
            "patient_context": self.patient_context,
            "function_quantification": (self.function_quantification.to_json()
                                        if self.function_quantification else None),
            "wall_assessment": (bullseye_export(self.wall_assessment)
                                if self.wall_assessment else None),
            "lge_findings": bullseye_export(self.lge_findings) if self.lge_findings else None,
            "diagnosis": [d.to_json() for d in self.diagnosis],
            "other_findings": self.other_findings,
            "impression": self.impression,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "StructuredReport":
        return cls(
            patient_context=payload.get("patient_context"),
            function_quantification=(MeasurementSet.from_json(payload["function_quantification"])
                                     if payload.get("function_quantification") else None),
            wall_assessment=(bullseye_from_json(payload["wall_assessment"])
                             if payload.get("wall_assessment") else None),
            lge_findings=(bullseye_from_json(payload["lge_findings"])
                          if payload.get("lge_findings") else None),
            diagnosis=[DiagnosisResult.from_json(d) for d in payload.get("diagnosis", [])],
            other_findings=list(payload.get("other_findings", [])),
            impression=payload.get("impression"),
            provenance=dict(payload.get("provenance", {})),
        )


def assemble_report(artifacts: dict[str, dict]) -> StructuredReport:
    """Place session artifacts into their report sections, exactly once.

    ``artifacts`` maps artifact id -> {type, data}; recognized types are
    measurements, thickness_bullseye, lge_bullseye, diagnosis, finding.
    Missing sections stay absent; duplicates of a single-slot section are
    rejected.
    """
    if not artifacts:
        raise ValueError("no artifacts to report")
    report = StructuredReport()
    for aid, art in artifacts.items():
        kind, data = art["type"], art["data"]
        if kind == "measurements":
            if report.function_quantification is not None:
                raise ValueError("duplicate measurement artifact")
            report.function_quantification = data
            report.provenance["function_quantification"] = aid
        elif kind == "thickness_bullseye":
            if report.wall_assessment is not None:
                raise ValueError("duplicate wall-assessment artifact")
            report.wall_assessment = data
            report.provenance["wall_assessment"] = aid
        elif kind == "lge_bullseye":
            if report.lge_findings is not None:
                raise ValueError("duplicate LGE artifact")
            report.lge_findings = data
            report.provenance["lge_findings"] = aid
        elif kind == "diagnosis":
            report.diagnosis.append(data)
            report.provenance[f"diagnosis_stage{data.stage}"] = aid
        elif kind == "finding":
            report.other_findings.append(str(data))
            report.provenance[f"finding_{len(report.other_findings)}"] = aid
    if report.function_quantification is None:
        raise ValueError("a measurement set is required to assemble a report")
    if report.diagnosis:
        final = report.diagnosis[-1]
        report.impression = f"Impression: findings consistent with {final.predicted}."
    return report


def _fmt_value(v: float) -> str:
    return f"{v:.1f}"


def render_report(report: StructuredReport, template: str = "standard") -> str:
    """Deterministic plain-text rendering; every measurement appears once."""
    if template != "standard":
        raise ValueError(f"unknown template {template!r}")
    lines = ["CMR STRUCTURED REPORT", "====================="]
    if report.patient_context:
        lines += ["", f"Context: {report.patient_context}"]
    ms = report.function_quantification
    if ms:
        lines += ["", "Function and structure quantification:"]
        for name in PARAM_ORDER:
            m = ms.get(name)
            if m is None:
                continue
            flag_txt = f"  [{', '.join(m.flags)}]" if m.flags else ""
            lines.append(f"  {name}: {_fmt_value(m.value)} {m.unit}{flag_txt}")
    if report.wall_assessment:
        lines += ["", "Wall thickness (AHA 17-segment, mm):"]
        for seg in sorted(report.wall_assessment.values):
            name, ring = SEGMENT_NAMES[seg]
            lines.append(f"  seg {seg} ({ring} {name}): "
                         f"{_fmt_value(report.wall_assessment.values[seg])}")
    if report.lge_findings:
        lines += ["", "LGE burden (fraction of segmental myocardium):"]
        for seg in sorted(report.lge_findings.values):
            name, ring = SEGMENT_NAMES[seg]
            lines.append(f"  seg {seg} ({ring} {name}): "
                         f"{report.lge_findings.values[seg]:.2f}")
    if report.diagnosis:
        lines += ["", "Diagnosis:"]
        for d in report.diagnosis:
            lines.append(f"  stage {d.stage}: {d.predicted}"
                         f" (p={d.probabilities[d.predicted]:.2f})")
    if report.other_findings:
        lines += ["", "Other findings:"]
        lines += [f"  - {f}" for f in report.other_findings]
    if report.impression:
        lines += ["", report.impression]
    if report.provenance:
        lines += ["", "Provenance:"]
        lines += [f"  {section}: {aid}"
                  for section, aid in sorted(report.provenance.items())]
    return "\n".join(lines) + "\n"


def quant_deduction(relative_error: float) -> int:
    """Points deducted from the 15-point quantification budget.

    Bands: <5% -> 0, 5-10% -> 3, 10-20% -> 5, >20% -> 7; a boundary
    value belongs to the band it is the lower edge of (5% -> 3,
    10% -> 5), so 20% stays in the 10-20% band (-> 5).
    """
    if relative_error < 0:
        raise ValueError("relative error must be non-negative")
    if relative_error < 0.05:
        return 0
    if relative_error < 0.10:
        return 3
    if relative_error <= 0.20:
        return 5
    return 7


HALLUCINATION_PENALTIES = {"none": 0, "logical_conflict": -3, "mild": -6, "major": -10}


@dataclass
class ReferenceFindings:
    """Gold-standard checklist a candidate report is scored against."""

    expected_diagnosis: str
    reference_quantities: dict[str, float]  # at least LVEDV/LVESV/LVEF
    wall_items: list[str] = field(default_factory=list)
    lge_items: list[str] = field(default_factory=list)
    other_items: list[str] = field(default_factory=list)
    key_indicators: list[str] = field(default_factory=list)

    @classmethod
    def from_json(cls, payload: dict) -> "ReferenceFindings":
        return cls(expected_diagnosis=payload["expected_diagnosis"],
                   reference_quantities=dict(payload["reference_quantities"]),
                   wall_items=list(payload.get("wall_items", [])),
                   lge_items=list(payload.get("lge_items", [])),
                   other_items=list(payload.get("other_items", [])),
                   key_indicators=list(payload.get("key_indicators", [])))


@dataclass
class RubricScore:
    clinical_diagnosis: int
    quantification: int
    wall: int
    lge: int
    other_features: int
    completeness: int
    hallucination_penalty: int
    total: int

    def to_json(self) -> dict:
        return self.__dict__.copy()


def score_report(candidate: StructuredReport, reference: ReferenceFindings,
                 missing_wall_items: int = 0, missing_lge_items: int = 0,
                 missing_other_items: int = 0, redundant_items: int = 0,
                 missing_key_indicators: int = 0,
                 hallucination: str = "none") -> RubricScore:
    """Score a report against reference findings on the 100-point rubric.

    Checklist mismatches that require human judgement (missing/redundant
    items, hallucination grade) are passed in as counts; the numeric
    quantification error is computed from the report itself.
    """
    if hallucination not in HALLUCINATION_PENALTIES:
        raise ValueError(f"unknown hallucination grade {hallucination!r}")
    diag_ok = any(d.predicted == reference.expected_diagnosis for d in candidate.diagnosis)
    clinical = 20 if diag_ok else 0

    worst = 0
    ms = candidate.function_quantification
    for name in ("LVEDV", "LVESV", "LVEF"):
        ref = reference.reference_quantities.get(name)
        if ref is None:
            continue
        got = ms.value(name) if ms else None
        if got is None:
            worst = max(worst, 7)  # absent value treated as the worst error band
            continue
        rel = abs(got - ref) / abs(ref) if ref != 0 else (0.0 if got == 0 else 1.0)
        worst = max(worst, quant_deduction(rel))
    quant = 15 - worst

    wall = max(0, 10 - missing_wall_items)
    lge = max(0, 15 - missing_lge_items)
    other = max(0, 10 - missing_other_items)
    completeness = max(0, 30 - 2 * redundant_items - 2 * missing_key_indicators)
    penalty = HALLUCINATION_PENALTIES[hallucination]
    total = clinical + quant + wall + lge + other + completeness + penalty
    total = max(0, min(100, total))
    return RubricScore(clinical_diagnosis=clinical, quantification=quant, wall=wall,
                       lge=lge, other_features=other, completeness=completeness,
                       hallucination_penalty=penalty, total=total)
