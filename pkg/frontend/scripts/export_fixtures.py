"""Export UI test fixtures by replaying corpus dialogues against the service.

Writes frontend/tests/fixtures/<dialogue-id>.json, each holding the
per-turn message responses, the final server transcript, and every
report document the dialogue produced. Run from the repository root:

    python3 frontend/scripts/export_fixtures.py
"""

import json
from importlib import resources
from pathlib import Path
from tempfile import TemporaryDirectory

from fastapi.testclient import TestClient

from cardiagent.backends.phantom import PhantomSpec, phantom_generate
from cardiagent.service import create_app
from cardiagent.volume_io import save_volume

DIALOGUE_IDS = ["dlg-001", "dlg-010", "dlg-027"]
OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def export_dialogue(client, tmp, dialogue, phantom):
    sid = client.post("/v1/sessions").json()["session_id"]
    volumes = {"SAX_CINE": phantom.sax_cine, "CH2_CINE": phantom.ch2_cine,
               "CH4_CINE": phantom.ch4_cine, "SAX_LGE": phantom.lge_volume}
    for kind in dialogue["sequences"]:
        save_volume(volumes[kind], tmp / "v.json")
        resp = client.post(f"/v1/sessions/{sid}/studies", data={"kind": kind},
                           files={"header": ("v.json", (tmp / "v.json").read_bytes()),
                                  "payload": ("v.raw", (tmp / "v.raw").read_bytes())})
        resp.raise_for_status()
    turns, reports = [], {}
    for turn in dialogue["turns"]:
        body = client.post(f"/v1/sessions/{sid}/messages",
                           json={"text": turn["user"]}).json()
        turns.append({"user": turn["user"], "response": body})
        for rid in body["report_ids"]:
            reports[rid] = client.get(f"/v1/reports/{rid}",
                                      params={"format": "json"}).json()
    transcript = client.get(f"/v1/sessions/{sid}/transcript").json()
    return {"id": dialogue["id"], "sequences": dialogue["sequences"],
            "turns": turns, "transcript": transcript["events"], "reports": reports}


def main():
    corpus = json.loads(resources.files("cardiagent.data")
                        .joinpath("dialogue_corpus.json").read_text())
    by_id = {d["id"]: d for d in corpus["dialogues"]}
    phantom = phantom_generate(PhantomSpec(seed=3, lge_segment=8))
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with TemporaryDirectory() as tmp_str:
        tmp = Path(tmp_str)
        app = create_app(data_root=tmp / "svc")
        with TestClient(app) as client:
            for did in DIALOGUE_IDS:
                fixture = export_dialogue(client, tmp, by_id[did], phantom)
                out = OUT_DIR / f"{did}.json"
                out.write_text(json.dumps(fixture, indent=1, sort_keys=True))
                print(f"wrote {out} ({len(fixture['transcript'])} events, "
                      f"{len(fixture['reports'])} reports)")


if __name__ == "__main__":
    main()
