"""Agentic dialogue layer: protocol records, tool registry, planner, executor."""

from .core import (AgentMessage, ProtocolViolation, ReferencePlanner, RemotePlanner,
                   SessionState, ToolAction, ToolRegistry, ToolResult, ToolUseCommand,
                   STANDARD_TOOLS, bootstrap_registry, execute_tools, invocation_report,
                   plan, run_turn, synthesize)
from .persistence import load_session_events, save_session_events

__all__ = [
    "AgentMessage", "ProtocolViolation", "ReferencePlanner", "RemotePlanner",
    "SessionState", "ToolAction", "ToolRegistry", "ToolResult", "ToolUseCommand",
    "STANDARD_TOOLS", "bootstrap_registry", "execute_tools", "invocation_report",
    "plan", "run_turn", "synthesize", "load_session_events", "save_session_events",
]
