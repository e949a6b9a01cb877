"""Append-only JSONL persistence for session transcripts.

Events are written one JSON object per line in transcript order; reloading
and re-serializing is byte-stable because keys are sorted and floats are
round-tripped through ``json`` unchanged.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

__all__ = ["save_session_events", "append_session_event", "load_session_events"]


def _dumps(event: dict) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


def save_session_events(path: str | os.PathLike, events: list[dict]) -> None:
    """Write the whole transcript atomically (tmp file + rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(_dumps(event) + "\n")
    os.replace(tmp, path)


def append_session_event(path: str | os.PathLike, event: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(_dumps(event) + "\n")


def load_session_events(path: str | os.PathLike) -> list[dict]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    return events
