import json
from importlib import resources

import pytest

from cardiagent.agent import AgentMessage, SessionState, run_turn
from cardiagent.backends import KnowledgeBase, LocalBackend, phantom_oracle_logic
from cardiagent.volume_io import SequenceKind


@pytest.fixture(scope="module")
def corpus():
    text = resources.files("cardiagent.data").joinpath("dialogue_corpus.json").read_text()
    return json.loads(text)["dialogues"]


@pytest.fixture(scope="module")
def kb():
    k = KnowledgeBase()
    k.ingest([{"id": "g1", "title": "guidelines",
               "text": "guideline recommendation evidence hcm dcm myocarditis "
                       "lge management reference", "source": "s"}])
    return k


def _session(dialogue, phantom_plain, phantom_lge, kb):
    phantom = phantom_lge if "SAX_LGE" in dialogue["sequences"] else phantom_plain
    vols = {"SAX_CINE": phantom.sax_cine, "CH2_CINE": phantom.ch2_cine,
            "CH4_CINE": phantom.ch4_cine, "SAX_LGE": phantom.lge_volume}
    s = SessionState(backend=LocalBackend(logic=phantom_oracle_logic), kb=kb)
    s.studies = {SequenceKind(k): vols[k] for k in dialogue["sequences"]}
    return s


def test_corpus_has_50_dialogues(corpus):
    assert len(corpus) == 50


def test_corpus_replay_routing_100pct(corpus, phantom_plain, phantom_lge, kb):
    failures = []
    for dialogue in corpus:
        session = _session(dialogue, phantom_plain, phantom_lge, kb)
        for i, turn in enumerate(dialogue["turns"]):
            events = run_turn(session, AgentMessage(role="user", text=turn["user"]))
            cmd = next(e["data"] for e in events if e["event"] == "tool_use")
            got = [a["api_name"] for a in cmd["actions"]]
            if got != turn["expected_actions"]:
                failures.append((dialogue["id"], i, got, turn["expected_actions"]))
            if (not cmd["actions"]) != turn["clarification"]:
                failures.append((dialogue["id"], i, "clarification mismatch"))
            bad = [e["data"] for e in events if e["event"] == "tool_result"
                   and e["data"]["status"] in ("error", "aborted")]
            if bad:
                failures.append((dialogue["id"], i, "execution failure", bad))
    assert not failures, failures


def test_corpus_expectations_use_registered_tools(corpus):
    from cardiagent.agent import STANDARD_TOOLS
    for dialogue in corpus:
        for turn in dialogue["turns"]:
            assert set(turn["expected_actions"]) <= set(STANDARD_TOOLS)
