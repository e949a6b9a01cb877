"""Backend transports: in-process, directory-exchange, and HTTP.

Every transport carries the same JSON request/response shape:

    request  = {task, study: {header, payload_b64}, masks: {kind: [...]},
                preprocessing: {...} | null, stage?, feature_flags?}
    response = {status: "ok"|"error", masks?: [...], probabilities?,
                predicted?, stage?, evidence?, error?}

Directory exchange writes ``req-<uuid>.json`` into a watched folder and
waits for ``res-<uuid>.json``; it is the hermetic default for tests.
"""

from __future__ import annotations

import base64
import json
import threading
import time
import urllib.request
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from ..volume_io import LABEL_SCHEMAS, CineVolume, LabelMask, SequenceKind

__all__ = [
    "BackendError", "BackendTimeout",
    "LocalBackend", "DirectoryExchangeBackend", "HttpBackend",
    "DirectoryResponder", "serve_http_backend",
    "volume_to_wire", "volume_from_wire", "mask_to_wire", "mask_from_wire",
    "TASK_KINDS",
]

TASK_KINDS = {
    "SAXCS": SequenceKind.SAX_CINE,
    "2CHCS": SequenceKind.CH2_CINE,
    "4CHCS": SequenceKind.CH4_CINE,
    "SAXLGES": SequenceKind.SAX_LGE,
}


class BackendError(RuntimeError):
    pass


class BackendTimeout(BackendError):
    pass


def volume_to_wire(volume: CineVolume) -> dict:
    data = np.ascontiguousarray(volume.data)
    return {
        "kind": volume.kind.value,
        "dims": list(data.shape),
        "spacing_mm": list(volume.spacing),
        "heart_rate_bpm": volume.heart_rate,
        "datatype": data.dtype.name,
        "payload_b64": base64.b64encode(data.astype(data.dtype.newbyteorder("<")).tobytes()).decode(),
    }


def volume_from_wire(wire: dict) -> CineVolume:
    dtype = np.dtype(wire["datatype"]).newbyteorder("<")
    data = np.frombuffer(base64.b64decode(wire["payload_b64"]), dtype=dtype)
    data = data.reshape(wire["dims"]).astype(np.dtype(wire["datatype"]))
    return CineVolume(kind=SequenceKind(wire["kind"]), data=data,
                      spacing=tuple(wire["spacing_mm"]),
                      heart_rate=wire.get("heart_rate_bpm"))


def mask_to_wire(mask: LabelMask) -> dict:
    data = np.ascontiguousarray(mask.labels.astype(np.int16))
    return {
        "kind": mask.kind.value if mask.kind else None,
        "dims": list(data.shape),
        "spacing_mm": list(mask.spacing),
        "phase": mask.phase,
        "payload_b64": base64.b64encode(data.astype("<i2").tobytes()).decode(),
    }


def mask_from_wire(wire: dict) -> LabelMask:
    kind = SequenceKind(wire["kind"])
    data = np.frombuffer(base64.b64decode(wire["payload_b64"]), dtype="<i2")
    labels = data.reshape(wire["dims"]).astype(np.int16)
    return LabelMask(labels=labels, spacing=tuple(wire["spacing_mm"]),
                     schema=LABEL_SCHEMAS[kind], kind=kind, phase=wire.get("phase", 0))


@dataclass
class LocalBackend:
    """In-process backend; the logic callable sees the wire-format request."""

    logic: callable
    capabilities: set[str] = field(default_factory=lambda: set(TASK_KINDS) | {"CDS", "NICMS"})
    name: str = "local"

    def infer(self, request: dict) -> dict:
        return self.logic(request)


@dataclass
class DirectoryExchangeBackend:
    """Request/response files in a watched folder."""

    root: Path
    capabilities: set[str] = field(default_factory=lambda: set(TASK_KINDS) | {"CDS", "NICMS"})
    timeout_ms: int = 10000
    poll_s: float = 0.02
    name: str = "directory"

    def infer(self, request: dict) -> dict:
        root = Path(self.root)
        root.mkdir(parents=True, exist_ok=True)
        rid = uuid.uuid4().hex
        req_path = root / f"req-{rid}.json"
        res_path = root / f"res-{rid}.json"
        tmp = root / f".req-{rid}.tmp"
        tmp.write_text(json.dumps(request))
        tmp.rename(req_path)  # atomic publish
        deadline = time.monotonic() + self.timeout_ms / 1000.0
        while time.monotonic() < deadline:
            if res_path.exists():
                try:
                    return json.loads(res_path.read_text())
                except json.JSONDecodeError:
                    time.sleep(self.poll_s)  # writer still flushing
                    continue
            time.sleep(self.poll_s)
        raise BackendTimeout(f"no response for request {rid} within {self.timeout_ms} ms")


class DirectoryResponder:
    """Answers directory-exchange requests with a logic callable."""

    def __init__(self, root: Path, logic):
        self.root = Path(root)
        self.logic = logic
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def serve_once(self) -> int:
        handled = 0
        self.root.mkdir(parents=True, exist_ok=True)
        for req_path in sorted(self.root.glob("req-*.json")):
            rid = req_path.stem[len("req-"):]
            res_path = self.root / f"res-{rid}.json"
            if res_path.exists():
                continue
            request = json.loads(req_path.read_text())
            try:
                response = self.logic(request)
            except Exception as exc:  # backend faults become error responses
                response = {"status": "error", "error": str(exc)}
            tmp = self.root / f".res-{rid}.tmp"
            tmp.write_text(json.dumps(response))
            tmp.rename(res_path)
            handled += 1
        return handled

    def start(self):
        def loop():
            while not self._stop.is_set():
                self.serve_once()
                time.sleep(0.01)
        self._thread = threading.Thread(target=loop, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=2)


@dataclass
class HttpBackend:
    """POST /infer against a remote expert-model server."""

    endpoint: str  # base URL
    capabilities: set[str] = field(default_factory=lambda: set(TASK_KINDS) | {"CDS", "NICMS"})
    timeout_ms: int = 10000
    name: str = "http"

    def infer(self, request: dict) -> dict:
        url = self.endpoint.rstrip("/") + "/infer"
        req = urllib.request.Request(url, data=json.dumps(request).encode(),
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_ms / 1000.0) as resp:
                return json.loads(resp.read().decode())
        except TimeoutError as exc:
            raise BackendTimeout(str(exc)) from exc
        except OSError as exc:
            if "timed out" in str(exc).lower():
                raise BackendTimeout(str(exc)) from exc
            raise BackendError(f"backend unreachable: {exc}") from exc


def serve_http_backend(logic, port: int = 0) -> tuple[ThreadingHTTPServer, int]:
    """Serve a logic callable over HTTP; returns (server, bound port)."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/infer":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            request = json.loads(self.rfile.read(length).decode())
            try:
                response = logic(request)
            except Exception as exc:
                response = {"status": "error", "error": str(exc)}
            body = json.dumps(response).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):  # keep test output clean
            pass

    server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server, server.server_address[1]
