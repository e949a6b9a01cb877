import json
import re

import pytest

from cardiagent.agent import (AgentMessage, ProtocolViolation, ReferencePlanner,
                              RemotePlanner, SessionState, STANDARD_TOOLS, ToolAction,
                              ToolResult, ToolUseCommand, bootstrap_registry,
                              execute_tools, invocation_report, load_session_events,
                              plan, run_turn, save_session_events, synthesize)
from cardiagent.backends import KnowledgeBase, LocalBackend, phantom_oracle_logic
from cardiagent.volume_io import SequenceKind


def _session(phantom, sequences=("SAX_CINE", "CH2_CINE", "CH4_CINE"), kb=True):
    vols = {"SAX_CINE": phantom.sax_cine, "CH2_CINE": phantom.ch2_cine,
            "CH4_CINE": phantom.ch4_cine, "SAX_LGE": phantom.lge_volume}
    knowledge = KnowledgeBase()
    if kb:
        knowledge.ingest([{"id": "g1", "title": "guidelines",
                           "text": "guideline ejection fraction wall thickness lge",
                           "source": "s"}])
    s = SessionState(backend=LocalBackend(logic=phantom_oracle_logic), kb=knowledge)
    s.studies = {SequenceKind(k): vols[k] for k in sequences if vols[k] is not None}
    return s


class TestProtocolRecords:
    def test_command_keys_exact(self):
        with pytest.raises(ProtocolViolation, match="thoughts/actions/value"):
            ToolUseCommand.from_json({"thoughts": "t", "actions": [], "value": "v",
                                      "extra": 1})

    def test_command_byte_stable_round_trip(self):
        cmd = ToolUseCommand(thoughts="t", value="v",
                             actions=[ToolAction("SAXCS", {"a": 1})])
        wire = cmd.serialize()
        again = ToolUseCommand.from_json(json.loads(wire)).serialize()
        assert wire == again

    def test_agent_message_never_carries_images(self):
        with pytest.raises(ProtocolViolation):
            AgentMessage(role="agent", text="x", image_refs=["img-1"])

    def test_ok_result_requires_payload(self):
        with pytest.raises(ProtocolViolation):
            ToolResult(api_name="SAXCS", status="ok", payload=None)


class TestRegistry:
    def test_bootstrap_has_nine_tools(self):
        reg = bootstrap_registry()
        assert len(reg) == 9
        assert set(reg.names()) == set(STANDARD_TOOLS)

    def test_duplicate_rejected(self):
        reg = bootstrap_registry()
        with pytest.raises(ValueError, match="duplicate"):
            reg.register_tool(reg.get("RAG"))

    def test_unregistered_action_rejected(self, phantom_lge):
        s = _session(phantom_lge)

        class BadPlanner:
            def plan(self, text, session):
                return ToolUseCommand(thoughts="", value="",
                                      actions=[ToolAction("NOT_A_TOOL")])

        with pytest.raises(ProtocolViolation, match="not registered"):
            plan("anything", s, BadPlanner())


class TestPlannerRouting:
    def test_clarification_lists_missing_sequences(self, phantom_lge):
        s = _session(phantom_lge, sequences=("CH2_CINE",))
        cmd = plan("Generate a report.", s)
        assert cmd.actions == []
        assert "SAX_CINE" in cmd.value

    def test_ambiguous_segmentation_asks(self, phantom_lge):
        s = _session(phantom_lge)
        cmd = plan("Segment it.", s)
        assert cmd.actions == []
        assert "Which sequence" in cmd.value

    def test_remote_planner_validates(self, phantom_lge):
        s = _session(phantom_lge)
        remote = RemotePlanner(lambda req: {"thoughts": "t", "value": "v",
                                            "actions": [{"api_name": "BOGUS",
                                                         "params": {}}]})
        with pytest.raises(ProtocolViolation, match="unregistered"):
            remote.plan("x", s)


class TestExecution:
    def test_failure_aborts_remainder(self, phantom_lge):
        s = _session(phantom_lge, sequences=("SAX_CINE",))
        cmd = ToolUseCommand(thoughts="", value="", actions=[
            ToolAction("QUANT"),  # fails: no segmentation yet
            ToolAction("SAXCS"),
        ])
        results = execute_tools(cmd, s)
        assert results[0].status == "error"
        assert results[1].status == "aborted"

    def test_nicms_gate_blocks_without_nicm(self, phantom_lge):
        s = _session(phantom_lge, sequences=("SAX_CINE", "CH4_CINE", "SAX_LGE"))
        for t in ("SAXCS", "4CHCS", "SAXLGES"):
            execute_tools(ToolUseCommand(thoughts="", value="",
                                         actions=[ToolAction(t)]), s)
        results = execute_tools(ToolUseCommand(
            thoughts="", value="", actions=[ToolAction("NICMS")]), s)
        assert results[0].status == "error"
        assert "gate" in results[0].error

    def test_conditional_nicms_skips(self, phantom_lge):
        s = _session(phantom_lge, sequences=("SAX_CINE", "CH4_CINE", "SAX_LGE"))
        results = execute_tools(ToolUseCommand(
            thoughts="", value="",
            actions=[ToolAction("NICMS", {"conditional": True})]), s)
        assert results[0].status == "skipped"

    def test_rag_requires_corpus(self, phantom_lge):
        s = _session(phantom_lge, kb=False)
        results = execute_tools(ToolUseCommand(
            thoughts="", value="", actions=[ToolAction("RAG", {"query": "x"})]), s)
        assert results[0].status == "error"


class TestSynthesis:
    def test_synthesis_command_has_empty_actions(self, phantom_lge):
        s = _session(phantom_lge)
        run_turn(s, AgentMessage(role="user", text="Quantify function."))
        synth = [e for e in s.transcript if e["event"] == "synthesis"]
        assert synth and synth[-1]["data"]["actions"] == []

    def test_numbers_come_from_payloads(self, phantom_lge):
        s = _session(phantom_lge)
        events = run_turn(s, AgentMessage(role="user", text="Quantify function."))
        answer = next(e["data"]["text"] for e in events if e["event"] == "agent_message")
        payload_text = json.dumps([e["data"]["payload"] for e in events
                                   if e["event"] == "tool_result"
                                   and e["data"]["status"] == "ok"])
        for num in re.findall(r"\d+(?:\.\d+)?", answer):
            assert num in payload_text, num


class TestPersistence:
    def test_jsonl_round_trip_byte_stable(self, tmp_path, phantom_lge):
        s = _session(phantom_lge)
        run_turn(s, AgentMessage(role="user", text="Quantify function."))
        p = tmp_path / "t.jsonl"
        save_session_events(p, s.transcript)
        first = p.read_bytes()
        save_session_events(p, load_session_events(p))
        assert p.read_bytes() == first


class TestInvocationReport:
    def test_counts(self, phantom_lge):
        s = _session(phantom_lge)
        run_turn(s, AgentMessage(role="user", text="Quantify function."))
        rep = invocation_report([s.transcript])
        assert rep["rate"] == 1.0
        assert rep["tools"]["QUANT"]["attempts"] == 1

    def test_skipped_not_counted(self):
        transcript = [{"seq": 0, "event": "tool_result",
                       "data": {"api_name": "NICMS", "status": "skipped",
                                "payload": None, "error": "x", "latency_ms": 0.0}}]
        rep = invocation_report([transcript])
        assert rep["attempts"] == 0 and rep["rate"] is None
