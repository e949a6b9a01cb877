"""Two-turn tool-use dialogue state machine.

One user turn produces exactly one tool-use command (thoughts, actions,
value), its ordered results, and one synthesized answer whose command
carries an empty action list.  The reference planner is rule based and
fully deterministic; a remote planner can be plugged in over the planner
wire protocol and is validated against the registry.
"""

from __future__ import annotations

import json
import re
import time
import uuid
from dataclasses import dataclass, field

from ..backends import (BackendError, DiagnosisResult, KnowledgeBase,
                        diagnose_stage1, diagnose_stage2, segment_via_backend)
from ..aha17 import assign_segments, lge_burden, locate_rv_insertions, segment_wall_thickness
from ..quantify import MeasurementSet, quantify_study
from ..reporting import StructuredReport, assemble_report, render_report
from ..volume_io import CineVolume, SequenceKind

__all__ = [
    "AgentMessage", "ToolUseCommand", "ToolAction", "ToolResult", "SessionState",
    "ToolRegistry", "bootstrap_registry", "ReferencePlanner", "RemotePlanner",
    "plan", "execute_tools", "synthesize", "run_turn", "invocation_report",
    "ProtocolViolation",
]

STANDARD_TOOLS = ["SAXCS", "2CHCS", "4CHCS", "SAXLGES", "CDS", "NICMS", "RAG", "MRG", "QUANT"]

SEGMENTATION_TASKS = {"SAXCS": SequenceKind.SAX_CINE, "2CHCS": SequenceKind.CH2_CINE,
                      "4CHCS": SequenceKind.CH4_CINE, "SAXLGES": SequenceKind.SAX_LGE}


class ProtocolViolation(RuntimeError):
    pass


@dataclass
class AgentMessage:
    role: str  # user | agent | tool
    text: str
    image_refs: list[str] = field(default_factory=list)
    stop: bool = True

    def __post_init__(self):
        if self.role == "agent" and self.image_refs:
            raise ProtocolViolation("agent messages never carry raw images")

    def to_json(self) -> dict:
        return {"role": self.role, "text": self.text,
                "image_refs": self.image_refs, "stop": self.stop}

    @classmethod
    def from_json(cls, payload: dict) -> "AgentMessage":
        return cls(role=payload["role"], text=payload["text"],
                   image_refs=list(payload.get("image_refs", [])),
                   stop=payload.get("stop", True))


@dataclass
class ToolAction:
    api_name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"api_name": self.api_name, "params": self.params}


@dataclass
class ToolUseCommand:
    thoughts: str
    actions: list[ToolAction]
    value: str

    def to_json(self) -> dict:
        return {"thoughts": self.thoughts,
                "actions": [a.to_json() for a in self.actions],
                "value": self.value}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, payload: dict) -> "ToolUseCommand":
        if set(payload) != {"thoughts", "actions", "value"}:
            raise ProtocolViolation(f"command keys must be thoughts/actions/value, got {sorted(payload)}")
        actions = [ToolAction(api_name=a["api_name"], params=dict(a.get("params", {})))
                   for a in payload["actions"]]
        return cls(thoughts=payload["thoughts"], actions=actions, value=payload["value"])


@dataclass
class ToolResult:
    api_name: str
    status: str  # ok | error | aborted | skipped
    payload: dict | None = None  # {artifact_id, summary, numbers: {...}}
    error: str | None = None
    latency_ms: float = 0.0

    def __post_init__(self):
        if self.status == "ok" and self.payload is None:
            raise ProtocolViolation("ok result requires a payload")

    def to_json(self) -> dict:
        return {"api_name": self.api_name, "status": self.status,
                "payload": self.payload, "error": self.error,
                "latency_ms": self.latency_ms}


@dataclass
class ToolDescriptor:
    api_name: str
    required_sequences: list[SequenceKind]
    param_schema: dict = field(default_factory=dict)
    description: str = ""


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, ToolDescriptor] = {}

    def register_tool(self, descriptor: ToolDescriptor) -> None:
        if descriptor.api_name in self._tools:
            raise ValueError(f"duplicate tool id {descriptor.api_name!r}")
        self._tools[descriptor.api_name] = descriptor

    def __contains__(self, api_name: str) -> bool:
        return api_name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def get(self, api_name: str) -> ToolDescriptor:
        return self._tools[api_name]

    def names(self) -> list[str]:
        return list(self._tools)


def bootstrap_registry() -> ToolRegistry:
    """Register the standard 9-tool repertoire."""
    reg = ToolRegistry()
    seq = {
        "SAXCS": [SequenceKind.SAX_CINE],
        "2CHCS": [SequenceKind.CH2_CINE],
        "4CHCS": [SequenceKind.CH4_CINE],
        "SAXLGES": [SequenceKind.SAX_LGE],
        "CDS": [SequenceKind.SAX_CINE, SequenceKind.CH2_CINE, SequenceKind.CH4_CINE],
        "NICMS": [SequenceKind.SAX_CINE, SequenceKind.CH4_CINE, SequenceKind.SAX_LGE],
        "QUANT": [SequenceKind.SAX_CINE],
        "RAG": [],
        "MRG": [SequenceKind.SAX_CINE],
    }
    for name in STANDARD_TOOLS:
        reg.register_tool(ToolDescriptor(api_name=name, required_sequences=seq[name]))
    return reg


@dataclass
class SessionState:
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    studies: dict[SequenceKind, CineVolume] = field(default_factory=dict)
    artifacts: dict[str, dict] = field(default_factory=dict)  # id -> {type, data}
    transcript: list[dict] = field(default_factory=list)  # append-only protocol events
    backend: object = None
    kb: KnowledgeBase | None = None
    registry: ToolRegistry = field(default_factory=bootstrap_registry)
    insertion_landmark: float | None = None

    def add_artifact(self, kind: str, data, prefix: str) -> str:
        aid = f"{prefix}-{len(self.artifacts):04d}"
        self.artifacts[aid] = {"type": kind, "data": data}
        return aid

    def record(self, event_type: str, payload: dict) -> dict:
        event = {"seq": len(self.transcript), "event": event_type, **payload}
        self.transcript.append(event)
        return event

    def masks_for(self, kind: SequenceKind):
        for art in self.artifacts.values():
            if art["type"] == "masks" and art["data"]["kind"] == kind:
                return art["data"]["masks"]
        return None

    def latest(self, art_type: str):
        found = None
        for aid, art in self.artifacts.items():
            if art["type"] == art_type:
                found = (aid, art["data"])
        return found


# ---------------------------------------------------------------------------
# planning

_SEG_PATTERNS = [
    (re.compile(r"\blge\b|late gadolinium|scar|viabilit", re.I), "SAXLGES"),
    (re.compile(r"\b(2|two)[- ]?ch(amber)?\b", re.I), "2CHCS"),
    (re.compile(r"\b(4|four)[- ]?ch(amber)?\b", re.I), "4CHCS"),
    (re.compile(r"short[- ]?axis|\bsax\b", re.I), "SAXCS"),
]
_RE_SEGMENT = re.compile(r"segment|delineat|contour|mask", re.I)
_RE_QUANT = re.compile(r"quantif|measur|function|ejection|volume|\bef\b|\blvef\b|mass|diameter",
                       re.I)
_RE_DIAG = re.compile(r"diagnos|classif|screen|disease|abnormal", re.I)
_RE_SUBTYPE = re.compile(r"subtype|fine[- ]?grained|nicm subtype|which cardiomyopathy", re.I)
_RE_RAG = re.compile(r"guideline|literature|evidence|recommend|reference|look up", re.I)
_RE_REPORT = re.compile(r"report", re.I)
_RE_WALL = re.compile(r"wall thickness|17[- ]?segment|bullseye|aha", re.I)


class ReferencePlanner:
    """Deterministic keyword-intent planner over available sequences."""

    name = "reference"

    def plan(self, instruction: str, session: SessionState) -> ToolUseCommand:
        text = instruction.strip()
        have = set(session.studies)
        reg = session.registry

        def gated(tools: list[ToolAction], needs: list[str]) -> ToolUseCommand | None:
            missing = []
            for t in [*needs, *(a.api_name for a in tools)]:
                for kind in reg.get(t).required_sequences:
                    if kind not in have:
                        missing.append(kind.value)
            if missing:
                wanted = ", ".join(sorted(set(missing)))
                return ToolUseCommand(
                    thoughts=f"The request needs sequences that are not uploaded: {wanted}.",
                    actions=[],
                    value=f"Please upload the following sequences first: {wanted}.")
            return None

        if not text:
            return ToolUseCommand(thoughts="Empty instruction; nothing to plan.",
                                  actions=[],
                                  value="Please describe what you would like me to do "
                                        "with the uploaded study.")

        if _RE_REPORT.search(text):
            actions = []
            for task, kind in SEGMENTATION_TASKS.items():
                if kind in have:
                    actions.append(ToolAction(task))
            if SequenceKind.SAX_CINE in have:
                actions.append(ToolAction("QUANT"))
            if all(k in have for k in (SequenceKind.SAX_CINE, SequenceKind.CH2_CINE,
                                       SequenceKind.CH4_CINE)):
                actions.append(ToolAction("CDS"))
                if SequenceKind.SAX_LGE in have:
                    actions.append(ToolAction("NICMS", {"conditional": True}))
            actions.append(ToolAction("MRG"))
            clarify = gated(actions, [])
            if clarify:
                return clarify
            return ToolUseCommand(
                thoughts="Full report requested: segment every available sequence, "
                         "quantify, run staged diagnosis, then generate the report.",
                actions=actions,
                value="Running the full analysis pipeline and generating the report.")

        if _RE_SUBTYPE.search(text):
            actions = [ToolAction(t) for t, k in SEGMENTATION_TASKS.items() if k in have]
            if all(k in have for k in (SequenceKind.SAX_CINE, SequenceKind.CH2_CINE,
                                       SequenceKind.CH4_CINE)):
                actions.append(ToolAction("CDS"))
            actions.append(ToolAction("NICMS", {"conditional": True}))
            clarify = gated(actions, [])
            if clarify:
                return clarify
            return ToolUseCommand(
                thoughts="Fine-grained NICM subtyping: staged diagnosis with the LGE study.",
                actions=actions,
                value="Running staged diagnosis for cardiomyopathy subtyping.")

        if _RE_DIAG.search(text):
            actions = [ToolAction(t) for t in ("SAXCS", "2CHCS", "4CHCS")
                       if SEGMENTATION_TASKS[t] in have and session.masks_for(SEGMENTATION_TASKS[t]) is None]
            actions.append(ToolAction("CDS"))
            clarify = gated(actions, [])
            if clarify:
                return clarify
            return ToolUseCommand(
                thoughts="Screening diagnosis over the three cine views.",
                actions=actions,
                value="Segmenting the cine views and running the screening diagnosis.")

        if _RE_WALL.search(text) or _RE_QUANT.search(text):
            actions = []
            if session.masks_for(SequenceKind.SAX_CINE) is None:
                actions.append(ToolAction("SAXCS"))
            if SequenceKind.CH4_CINE in have and session.masks_for(SequenceKind.CH4_CINE) is None:
                actions.append(ToolAction("4CHCS"))
            actions.append(ToolAction("QUANT"))
            clarify = gated(actions, [])
            if clarify:
                return clarify
            return ToolUseCommand(
                thoughts="Quantification requested: ensure segmentations exist, then measure.",
                actions=actions,
                value="Measuring cardiac structural and functional parameters.")

        if _RE_SEGMENT.search(text):
            for pattern, task in _SEG_PATTERNS:
                if pattern.search(text):
                    kind = SEGMENTATION_TASKS[task]
                    if kind not in have:
                        return ToolUseCommand(
                            thoughts=f"Segmentation of {kind.value} requested but no such "
                                     "study is uploaded.",
                            actions=[],
                            value=f"Please upload a {kind.value} study first.")
                    return ToolUseCommand(
                        thoughts=f"Segmentation of the {kind.value} sequence.",
                        actions=[ToolAction(task)],
                        value=f"Segmenting the {kind.value} sequence.")
            avail = [t for t, k in SEGMENTATION_TASKS.items() if k in have]
            if len(avail) == 1:
                return ToolUseCommand(
                    thoughts="Generic segmentation request with one uploaded sequence.",
                    actions=[ToolAction(avail[0])],
                    value=f"Segmenting the {SEGMENTATION_TASKS[avail[0]].value} sequence.")
            return ToolUseCommand(
                thoughts="Ambiguous segmentation request.",
                actions=[],
                value="Which sequence should I segment (SAX, 2CH, 4CH, or LGE)?")

        if _RE_RAG.search(text):
            return ToolUseCommand(
                thoughts="Knowledge lookup over the local guideline corpus.",
                actions=[ToolAction("RAG", {"query": text, "k": 3})],
                value="Retrieving relevant guideline passages.")

        return ToolUseCommand(
            thoughts="No tool intent recognized in the instruction.",
            actions=[],
            value="I could not map this request to a tool. I can segment sequences, "
                  "quantify function, run diagnosis, retrieve guidelines, or "
                  "generate a report.")


class RemotePlanner:
    """Delegates planning over the wire protocol and validates the answer."""

    name = "remote"

    def __init__(self, transport):
        self.transport = transport  # callable(request: dict) -> dict

    def plan(self, instruction: str, session: SessionState) -> ToolUseCommand:
        request = {
            "instruction": instruction,
            "available_sequences": [k.value for k in session.studies],
            "artifact_summary": [{"id": aid, "type": art["type"]}
                                 for aid, art in session.artifacts.items()],
        }
        response = self.transport(request)
        cmd = ToolUseCommand.from_json(response)
        for action in cmd.actions:
            if action.api_name not in session.registry:
                raise ProtocolViolation(
                    f"remote planner returned unregistered api_name {action.api_name!r}")
        return cmd


def plan(instruction: str, session: SessionState, planner=None) -> ToolUseCommand:
    planner = planner or ReferencePlanner()
    cmd = planner.plan(instruction, session)
    for action in cmd.actions:
        if action.api_name not in session.registry:
            raise ProtocolViolation(f"planned api_name {action.api_name!r} not registered")
    return cmd


# ---------------------------------------------------------------------------
# execution

def _num(v: float) -> float:
    return round(float(v), 1)


def _run_segmentation(action: ToolAction, session: SessionState) -> dict:
    kind = SEGMENTATION_TASKS[action.api_name]
    volume = session.studies.get(kind)
    if volume is None:
        raise BackendError(f"no {kind.value} study uploaded")
    masks = segment_via_backend(volume, action.api_name, session.backend)
    aid = session.add_artifact("masks", {"kind": kind, "masks": masks}, "mask")
    voxels = int(sum((m.labels > 0).sum() for m in masks))
    return {"artifact_id": aid,
            "summary": f"{kind.value} segmented: {len(masks)} phase mask(s)",
            "numbers": {"phases": len(masks), "foreground_voxels": voxels}}


def _run_quant(action: ToolAction, session: SessionState) -> dict:
    sax_masks = session.masks_for(SequenceKind.SAX_CINE)
    if sax_masks is None:
        raise BackendError("QUANT requires SAX cine segmentation first")
    ch4 = session.masks_for(SequenceKind.CH4_CINE)
    hr = session.studies[SequenceKind.SAX_CINE].heart_rate
    ms = quantify_study(sax_masks, heart_rate=hr, ch4_mask=ch4[0] if ch4 else None)
    aid = session.add_artifact("measurements", ms, "meas")
    ed = sax_masks[0]
    extras = {}
    try:
        insertions = locate_rv_insertions(ed, landmark_angle=session.insertion_landmark)
        labeling = assign_segments(ed, insertions)
        thickness = segment_wall_thickness(labeling, ed)
        tid = session.add_artifact("thickness_bullseye", thickness, "wall")
        extras["thickness_artifact"] = tid
        lge_masks = session.masks_for(SequenceKind.SAX_LGE)
        if lge_masks is not None:
            lge_labeling = assign_segments(lge_masks[0], locate_rv_insertions(
                lge_masks[0], landmark_angle=insertions["anterior_angle"]))
            burden = lge_burden(lge_masks[0], lge_labeling)
            bid = session.add_artifact("lge_bullseye", burden, "lge")
            extras["lge_artifact"] = bid
    except ValueError:
        pass  # wall analysis is best-effort; measurements stand alone
    numbers = {name: _num(m.value) for name, m in ms.entries.items()}
    summary = ", ".join(f"{n} {numbers[n]} {ms.entries[n].unit}" for n in numbers)
    return {"artifact_id": aid, "summary": f"Quantification: {summary}",
            "numbers": numbers, **extras}


def _run_cds(action: ToolAction, session: SessionState) -> dict:
    cines, masks = {}, {}
    for kind in (SequenceKind.SAX_CINE, SequenceKind.CH2_CINE, SequenceKind.CH4_CINE):
        vol = session.studies.get(kind)
        m = session.masks_for(kind)
        if vol is None or m is None:
            raise BackendError(f"CDS requires {kind.value} study and segmentation")
        cines[kind], masks[kind] = vol, m
    result = diagnose_stage1(cines, masks, session.backend)
    aid = session.add_artifact("diagnosis", result, "diag")
    return {"artifact_id": aid,
            "summary": f"Stage-1 diagnosis: {result.predicted}",
            "numbers": {"p": round(result.probabilities[result.predicted], 2)},
            "predicted": result.predicted}


def _latest_stage1(session: SessionState) -> DiagnosisResult | None:
    result = None
    for art in session.artifacts.values():
        if art["type"] == "diagnosis" and art["data"].stage == 1:
            result = art["data"]
    return result


def _run_nicms(action: ToolAction, session: SessionState) -> dict:
    stage1 = _latest_stage1(session)
    override = bool(action.params.get("override"))
    conditional = bool(action.params.get("conditional"))
    if not override and (stage1 is None or stage1.predicted != "NICM"):
        if conditional:
            return {"skipped": ("stage-1 outcome is not NICM; fine-grained subtyping "
                                "not indicated")}
        raise BackendError("NICMS gate: no stage-1 NICM outcome (use override for research)")
    cines, masks = {}, {}
    for kind in (SequenceKind.SAX_CINE, SequenceKind.CH4_CINE, SequenceKind.SAX_LGE):
        vol = session.studies.get(kind)
        m = session.masks_for(kind)
        if vol is None or m is None:
            raise BackendError(f"NICMS requires {kind.value} study and segmentation")
        cines[kind], masks[kind] = vol, m
    result = diagnose_stage2(cines, masks, session.backend, stage1=stage1, override=override,
                             feature_flags=set(action.params.get("feature_flags", [])))
    aid = session.add_artifact("diagnosis", result, "diag")
    return {"artifact_id": aid,
            "summary": f"Stage-2 diagnosis: {result.predicted}",
            "numbers": {"p": round(result.probabilities[result.predicted], 2)},
            "predicted": result.predicted}


def _run_rag(action: ToolAction, session: SessionState) -> dict:
    if session.kb is None or not session.kb.docs:
        raise BackendError("no knowledge corpus loaded")
    query = action.params.get("query", "")
    k = int(action.params.get("k", 3))
    snippets = session.kb.retrieve(query, k=k)
    aid = session.add_artifact("snippets", snippets, "rag")
    titles = "; ".join(s.title or s.doc_id for s in snippets) or "no match"
    return {"artifact_id": aid,
            "summary": f"Retrieved {len(snippets)} passage(s): {titles}",
            "numbers": {"hits": len(snippets)}}


def _run_mrg(action: ToolAction, session: SessionState) -> dict:
    reportable: dict[str, dict] = {}
    single_slot: dict[str, str] = {}  # type -> artifact id currently holding the slot
    for aid, art in session.artifacts.items():
        if art["type"] in ("measurements", "thickness_bullseye", "lge_bullseye"):
            # later artifacts supersede earlier ones for single-slot sections
            if art["type"] in single_slot:
                del reportable[single_slot[art["type"]]]
            single_slot[art["type"]] = aid
            reportable[aid] = art
        elif art["type"] in ("diagnosis", "finding"):
            reportable[aid] = art
    if not any(a["type"] == "measurements" for a in reportable.values()):
        raise BackendError("MRG requires a measurement set (run QUANT first)")
    report = assemble_report(reportable)
    text = render_report(report)
    aid = session.add_artifact("report", {"report": report, "text": text}, "report")
    return {"artifact_id": aid,
            "summary": f"Structured report generated (artifact {aid})",
            "numbers": {"sections": sum(1 for v in (report.function_quantification,
                                                    report.wall_assessment,
                                                    report.lge_findings) if v)
                        + (1 if report.diagnosis else 0)}}


_EXECUTORS = {
    "SAXCS": _run_segmentation, "2CHCS": _run_segmentation,
    "4CHCS": _run_segmentation, "SAXLGES": _run_segmentation,
    "QUANT": _run_quant, "CDS": _run_cds, "NICMS": _run_nicms,
    "RAG": _run_rag, "MRG": _run_mrg,
}


def execute_tools(cmd: ToolUseCommand, session: SessionState) -> list[ToolResult]:
    """Run the command's actions in order; a failure aborts the remainder."""
    results: list[ToolResult] = []
    failed = False
    for action in cmd.actions:
        if action.api_name not in session.registry:
            raise ProtocolViolation(f"action {action.api_name!r} not registered")
        if failed:
            results.append(ToolResult(api_name=action.api_name, status="aborted",
                                      error="aborted by earlier failure"))
            continue
        start = time.perf_counter()
        try:
            payload = _EXECUTORS[action.api_name](action, session)
            latency = (time.perf_counter() - start) * 1000.0
            if "skipped" in payload:
                results.append(ToolResult(api_name=action.api_name, status="skipped",
                                          error=payload["skipped"], latency_ms=latency))
            else:
                results.append(ToolResult(api_name=action.api_name, status="ok",
                                          payload=payload, latency_ms=latency))
        except (BackendError, ValueError) as exc:
            latency = (time.perf_counter() - start) * 1000.0
            results.append(ToolResult(api_name=action.api_name, status="error",
                                      error=str(exc), latency_ms=latency))
            failed = True
    for result in results:
        session.record("tool_result", {"data": result.to_json()})
    return results


def synthesize(results: list[ToolResult], instruction: str,
               session: SessionState) -> tuple[ToolUseCommand, AgentMessage]:
    """Build the final answer: payload summaries in result order, no invention."""
    parts: list[str] = []
    for result in results:
        if result.status == "ok":
            parts.append(result.payload["summary"])
        elif result.status == "skipped":
            parts.append(f"{result.api_name} skipped: {result.error}")
        elif result.status == "error":
            parts.append(f"{result.api_name} failed: {result.error}")
        else:
            parts.append(f"{result.api_name} not run ({result.error})")
    if not parts:
        parts.append("No tools were run.")
    text = " ".join(p if p.endswith(".") else p + "." for p in parts)
    command = ToolUseCommand(
        thoughts="All tool results collected; composing the final response.",
        actions=[], value=text)
    return command, AgentMessage(role="agent", text=text)


def run_turn(session: SessionState, user_msg: AgentMessage,
             planner=None) -> list[dict]:
    """plan -> execute -> synthesize as one atomic turn; returns the transcript delta."""
    start_seq = len(session.transcript)
    session.record("user_message", {"data": user_msg.to_json()})
    cmd = plan(user_msg.text, session, planner)
    session.record("tool_use", {"data": cmd.to_json()})
    results = execute_tools(cmd, session)
    synth_cmd, answer = synthesize(results, user_msg.text, session)
    session.record("synthesis", {"data": synth_cmd.to_json()})
    session.record("agent_message", {"data": answer.to_json()})
    return session.transcript[start_seq:]


def invocation_report(transcripts: list[list[dict]]) -> dict:
    """Per-tool attempts/successes/rate over a set of transcripts."""
    per_tool: dict[str, dict] = {}
    for transcript in transcripts:
        for event in transcript:
            if event["event"] != "tool_result":
                continue
            rec = event["data"]
            if rec["status"] in ("aborted", "skipped"):
                continue  # never attempted / intentionally not indicated
            slot = per_tool.setdefault(rec["api_name"], {"attempts": 0, "successes": 0})
            slot["attempts"] += 1
            if rec["status"] == "ok":
                slot["successes"] += 1
    for slot in per_tool.values():
        slot["rate"] = slot["successes"] / slot["attempts"]
    attempts = sum(s["attempts"] for s in per_tool.values())
    successes = sum(s["successes"] for s in per_tool.values())
    return {"tools": per_tool, "attempts": attempts, "successes": successes,
            "rate": successes / attempts if attempts else None}
