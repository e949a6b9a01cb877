"""HTTP service exposing sessions, studies, messages, and reports under /v1.

State is directory-per-session under a data root.  Artifacts are written
before the transcript event that references them (write-ahead), so a crash
between the two leaves an orphaned artifact, never a dangling reference.
"""

from __future__ import annotations

import json
import uuid
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse

from .agent import AgentMessage, SessionState, run_turn
from .agent.persistence import append_session_event, load_session_events
from .backends import KnowledgeBase, LocalBackend, phantom_oracle_logic
from .volume_io import SequenceKind, VolumeFormatError, load_volume, validate_sequence

__all__ = ["create_app", "ServiceError"]


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: str | None = None):
        super().__init__(message)
        self.status, self.code, self.message, self.detail = status, code, message, detail


def _load_default_kb() -> KnowledgeBase:
    kb = KnowledgeBase()
    payload = json.loads(resources.files("cardiagent.data")
                         .joinpath("kb_corpus.json").read_text())
    kb.ingest(payload["documents"])
    return kb


class ServiceState:
    """All live sessions plus their on-disk mirrors."""

    def __init__(self, data_root: str | Path, backend=None, kb: KnowledgeBase | None = None):
        self.data_root = Path(data_root)
        self.data_root.mkdir(parents=True, exist_ok=True)
        self.backend = backend or LocalBackend(logic=phantom_oracle_logic)
        self.kb = kb or _load_default_kb()
        self.sessions: dict[str, SessionState] = {}
        self.reports: dict[str, dict] = {}  # rid -> {session_id, artifact_id}
        self._load_report_index()

    # -- persistence helpers ------------------------------------------------

    def session_dir(self, sid: str) -> Path:
        return self.data_root / "sessions" / sid

    def _report_index_path(self) -> Path:
        return self.data_root / "reports.json"

    def _load_report_index(self) -> None:
        path = self._report_index_path()
        if path.exists():
            self.reports = json.loads(path.read_text())

    def _save_report_index(self) -> None:
        path = self._report_index_path()
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.reports, indent=1))
        tmp.replace(path)

    # -- operations ---------------------------------------------------------

    def create_session(self) -> SessionState:
        session = SessionState(backend=self.backend, kb=self.kb)
        sdir = self.session_dir(session.session_id)
        (sdir / "studies").mkdir(parents=True)
        (sdir / "artifacts").mkdir()
        (sdir / "transcript.jsonl").touch()
        self.sessions[session.session_id] = session
        return session

    def get_session(self, sid: str) -> SessionState:
        session = self.sessions.get(sid)
        if session is None:
            raise ServiceError(404, "session_not_found", f"no session {sid!r}")
        return session

    def persist_events(self, session: SessionState, events: list[dict]) -> None:
        sdir = self.session_dir(session.session_id)
        # write-ahead: referenced report artifacts hit disk before the transcript
        for event in events:
            if event["event"] != "tool_result" or event["data"]["status"] != "ok":
                continue
            payload = event["data"]["payload"]
            aid = payload.get("artifact_id", "")
            art = session.artifacts.get(aid)
            if art and art["type"] == "report":
                rid = uuid.uuid4().hex
                report_json = art["data"]["report"].to_json()
                (sdir / "artifacts" / f"{aid}.json").write_text(
                    json.dumps(report_json, indent=1))
                (sdir / "artifacts" / f"{aid}.txt").write_text(art["data"]["text"])
                self.reports[rid] = {"session_id": session.session_id, "artifact_id": aid}
                self._save_report_index()
                payload["report_id"] = rid
        transcript = sdir / "transcript.jsonl"
        for event in events:
            append_session_event(transcript, event)


def _error_response(exc: ServiceError) -> JSONResponse:
    return JSONResponse(status_code=exc.status,
                        content={"code": exc.code, "message": exc.message,
                                 "detail": exc.detail})


def create_app(data_root: str | Path = "./cardiagent-data", backend=None,
               kb: KnowledgeBase | None = None) -> FastAPI:
    app = FastAPI(title="cardiagent", version="1.0")
    state = ServiceState(data_root, backend=backend, kb=kb)
    app.state.service = state

    @app.exception_handler(ServiceError)
    async def handle_service_error(request: Request, exc: ServiceError):
        return _error_response(exc)

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(state.sessions)}

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session = state.create_session()
        return {"session_id": session.session_id}

    @app.post("/v1/sessions/{sid}/studies", status_code=201)
    async def upload_study(sid: str, kind: str = Form(...),
                           header: UploadFile = File(...),
                           payload: UploadFile = File(...)):
        session = state.get_session(sid)
        try:
            seq_kind = SequenceKind(kind)
        except ValueError:
            raise ServiceError(422, "unknown_kind", f"unknown sequence kind {kind!r}")
        sdir = state.session_dir(sid) / "studies"
        stem = seq_kind.value.lower()
        header_path = sdir / f"{stem}.json"
        header_bytes = await header.read()
        payload_bytes = await payload.read()
        # the header names its payload file; rewrite to the stored name
        try:
            header_doc = json.loads(header_bytes)
            header_doc["payload"] = f"{stem}.raw"
        except (json.JSONDecodeError, TypeError) as exc:
            raise ServiceError(422, "bad_study", "malformed desk header", str(exc))
        header_path.write_text(json.dumps(header_doc, indent=1))
        (sdir / f"{stem}.raw").write_bytes(payload_bytes)
        try:
            volume = load_volume(header_path, format="desk")
        except VolumeFormatError as exc:
            raise ServiceError(422, "bad_study", "study failed to parse", str(exc))
        descriptor = validate_sequence(volume, seq_kind)
        if descriptor.mismatch:
            raise ServiceError(422, "sequence_mismatch", descriptor.mismatch)
        session.studies[seq_kind] = volume
        return {"kind": seq_kind.value, "phases": descriptor.phases,
                "slices": descriptor.slices}

    @app.post("/v1/sessions/{sid}/messages")
    def post_message(sid: str, body: dict):
        session = state.get_session(sid)
        text = body.get("text")
        if not isinstance(text, str):
            raise ServiceError(422, "bad_message", "body must contain a string 'text'")
        events = run_turn(session, AgentMessage(role="user", text=text))
        state.persist_events(session, events)
        answer = next(e["data"]["text"] for e in reversed(events)
                      if e["event"] == "agent_message")
        report_ids = [e["data"]["payload"]["report_id"] for e in events
                      if e["event"] == "tool_result" and e["data"]["status"] == "ok"
                      and "report_id" in (e["data"]["payload"] or {})]
        return {"answer": answer, "events": events, "report_ids": report_ids}

    @app.get("/v1/sessions/{sid}/transcript")
    def get_transcript(sid: str):
        state.get_session(sid)
        path = state.session_dir(sid) / "transcript.jsonl"
        return {"session_id": sid, "events": load_session_events(path)}

    @app.get("/v1/reports/{rid}")
    def get_report(rid: str, format: str = "json"):
        entry = state.reports.get(rid)
        if entry is None:
            raise ServiceError(404, "report_not_found", f"no report {rid!r}")
        base = state.session_dir(entry["session_id"]) / "artifacts" / entry["artifact_id"]
        if format == "text":
            return PlainTextResponse(base.with_suffix(".txt").read_text())
        if format == "json":
            return json.loads(base.with_suffix(".json").read_text())
        raise ServiceError(422, "bad_format", f"unknown report format {format!r}")

    return app
