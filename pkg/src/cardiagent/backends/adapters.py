"""Adapter boundary between the toolkit and expert-model backends.

``phantom_oracle_logic`` is the hermetic reference backend: it recovers
ground-truth masks from phantom intensities by thresholding and answers
diagnosis requests with the rule table, so every transport can be tested
without any neural model.
"""

from __future__ import annotations

import numpy as np

from ..aha17 import Bullseye17, assign_segments, lge_burden, locate_rv_insertions, \
    segment_wall_thickness
from ..preprocess import CROP_SPECS, diagnosis_preprocess
from ..quantify import quantify_study
from ..volume_io import LABEL_SCHEMAS, CineVolume, LabelMask, SequenceKind
from .phantom import mask_from_intensities
from .rule import DiagnosisResult, rule_diagnoser
from .transport import (TASK_KINDS, BackendError, mask_from_wire, mask_to_wire,
                        volume_from_wire, volume_to_wire)

__all__ = [
    "phantom_oracle_logic", "echo_logic",
    "segment_via_backend", "diagnose_stage1", "diagnose_stage2",
    "derive_stage1", "derive_stage2",
]


def _segment_phase_masks(volume: CineVolume, kind: SequenceKind) -> list[dict]:
    wires = []
    for p in range(volume.phases):
        mask = mask_from_intensities(volume.data[p], kind, volume.spacing)
        mask.phase = p
        wires.append(mask_to_wire(mask))
    return wires


def derive_stage1(sax_masks: list[LabelMask], heart_rate: float | None = None,
                  ch4_mask: LabelMask | None = None) -> DiagnosisResult:
    """Stage-1 rule diagnosis from SAX (+optional 4CH) masks."""
    ms = quantify_study(sax_masks, heart_rate=heart_rate, ch4_mask=ch4_mask)
    ed = sax_masks[0]
    insertions = locate_rv_insertions(ed)
    labeling = assign_segments(ed, insertions)
    thickness = segment_wall_thickness(labeling, ed)
    return rule_diagnoser(ms, thickness, stage=1)


def derive_stage2(sax_masks: list[LabelMask], lge_mask: LabelMask | None,
                  heart_rate: float | None = None,
                  feature_flags: set[str] | None = None) -> DiagnosisResult:
    """Stage-2 rule diagnosis; LGE burden measured when an LGE mask is given."""
    ms = quantify_study(sax_masks, heart_rate=heart_rate)
    ed = sax_masks[0]
    insertions = locate_rv_insertions(ed)
    labeling = assign_segments(ed, insertions)
    thickness = segment_wall_thickness(labeling, ed)
    lge: Bullseye17 | None = None
    if lge_mask is not None:
        lge_labeling = assign_segments(lge_mask, locate_rv_insertions(
            lge_mask, landmark_angle=insertions["anterior_angle"]))
        lge = lge_burden(lge_mask, lge_labeling)
    return rule_diagnoser(ms, thickness, lge=lge, stage=2,
                          feature_flags=feature_flags)


def phantom_oracle_logic(request: dict) -> dict:
    """Reference backend logic covering segmentation and both diagnosis stages."""
    task = request["task"]
    if task in TASK_KINDS:
        volume = volume_from_wire(request["study"])
        kind = TASK_KINDS[task]
        if volume.kind != kind:
            return {"status": "error",
                    "error": f"task {task} expects {kind.value}, got {volume.kind.value}"}
        return {"status": "ok", "masks": _segment_phase_masks(volume, kind)}
    if task in ("CDS", "NICMS"):
        masks = {k: [mask_from_wire(w) for w in wires]
                 for k, wires in request.get("masks", {}).items()}
        sax = masks.get(SequenceKind.SAX_CINE.value)
        if not sax:
            return {"status": "error", "error": "SAX masks required"}
        hr = request.get("heart_rate_bpm")
        if task == "CDS":
            ch4 = masks.get(SequenceKind.CH4_CINE.value)
            result = derive_stage1(sax, heart_rate=hr, ch4_mask=ch4[0] if ch4 else None)
        else:
            lge = masks.get(SequenceKind.SAX_LGE.value)
            result = derive_stage2(sax, lge[0] if lge else None, heart_rate=hr,
                                   feature_flags=set(request.get("feature_flags", [])))
        return {"status": "ok", **result.to_json()}
    return {"status": "error", "error": f"unknown task {task!r}"}


def echo_logic(request: dict) -> dict:
    """Transport test helper: segments by thresholding, like the oracle."""
    return phantom_oracle_logic(request)


def _preprocessing_doc(kind: SequenceKind) -> dict | None:
    spec = CROP_SPECS.get(kind)
    if spec is None:
        return None
    return {"kind": spec.kind.value, "phase_keep": spec.phase_keep,
            "xy_roi": list(spec.xy_roi), "final_dims": list(spec.final_dims)}


def segment_via_backend(volume: CineVolume, task: str, backend) -> list[LabelMask]:
    """Dispatch a segmentation task; returns one validated mask per phase."""
    if task not in backend.capabilities:
        raise BackendError(f"backend {backend.name!r} lacks capability {task}")
    kind = TASK_KINDS[task]
    if volume.kind != kind:
        raise BackendError(f"task {task} expects {kind.value}, got {volume.kind.value}")
    request = {"task": task, "study": volume_to_wire(volume),
               "preprocessing": _preprocessing_doc(kind)}
    response = backend.infer(request)
    if response.get("status") != "ok":
        raise BackendError(response.get("error", "backend failure"))
    masks = [mask_from_wire(w) for w in response["masks"]]
    if len(masks) != volume.phases:
        raise BackendError(f"backend returned {len(masks)} masks for {volume.phases} phases")
    spatial = volume.data.shape[1:]
    schema = LABEL_SCHEMAS[kind]
    for m in masks:
        if m.shape != spatial:
            raise BackendError(f"mask dims {m.shape} mismatch volume {spatial}")
        bad = set(np.unique(m.labels).tolist()) - {0} - set(schema)
        if bad:
            raise BackendError(f"mask labels {sorted(bad)} outside schema")
    return masks


def _diagnosis_request(task: str, volumes: dict[SequenceKind, CineVolume],
                       masks: dict[SequenceKind, list[LabelMask]],
                       feature_flags: set[str] | None = None) -> dict:
    studies = {}
    for kind, vol in volumes.items():
        pre = diagnosis_preprocess(vol, masks[kind][0])
        studies[kind.value] = volume_to_wire(pre)
    hr = next((v.heart_rate for v in volumes.values() if v.heart_rate), None)
    return {"task": task,
            "studies": studies,
            "masks": {k.value: [mask_to_wire(m) for m in v] for k, v in masks.items()},
            "heart_rate_bpm": hr,
            "feature_flags": sorted(feature_flags or []),
            "preprocessing": {k.value: _preprocessing_doc(k) for k in volumes}}


def diagnose_stage1(cines: dict[SequenceKind, CineVolume],
                    masks: dict[SequenceKind, list[LabelMask]], backend) -> DiagnosisResult:
    """Stage-1 screening (NH / IHD / NICM) over the three cine views."""
    required = (SequenceKind.SAX_CINE, SequenceKind.CH2_CINE, SequenceKind.CH4_CINE)
    missing = [k.value for k in required if k not in cines or k not in masks]
    if missing:
        raise BackendError(f"stage 1 requires all cine views; missing {missing}")
    if "CDS" not in backend.capabilities:
        raise BackendError("backend lacks CDS capability")
    response = backend.infer(_diagnosis_request("CDS", cines, masks))
    if response.get("status") != "ok":
        raise BackendError(response.get("error", "backend failure"))
    return DiagnosisResult.from_json(response)


def diagnose_stage2(cines: dict[SequenceKind, CineVolume],
                    masks: dict[SequenceKind, list[LabelMask]], backend,
                    stage1: DiagnosisResult | None = None, override: bool = False,
                    feature_flags: set[str] | None = None) -> DiagnosisResult:
    """Stage-2 NICM subtyping; gated on a stage-1 NICM outcome unless overridden."""
    if not override and (stage1 is None or stage1.predicted != "NICM"):
        raise BackendError("stage-2 gate: requires a stage-1 NICM outcome or override")
    if SequenceKind.SAX_LGE not in cines or SequenceKind.SAX_LGE not in masks:
        raise BackendError("stage 2 requires the LGE study")
    if "NICMS" not in backend.capabilities:
        raise BackendError("backend lacks NICMS capability")
    response = backend.infer(_diagnosis_request("NICMS", cines, masks, feature_flags))
    if response.get("status") != "ok":
        raise BackendError(response.get("error", "backend failure"))
    return DiagnosisResult.from_json(response)
