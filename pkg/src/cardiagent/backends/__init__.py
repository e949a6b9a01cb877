"""Pluggable expert-model backends, reference oracles, and the knowledge store."""

from .adapters import (derive_stage1, derive_stage2, diagnose_stage1, diagnose_stage2,
                       echo_logic, phantom_oracle_logic, segment_via_backend)
from .kb import KnowledgeBase, Snippet
from .phantom import Phantom, PhantomSpec, mask_from_intensities, phantom_generate
from .rule import STAGE1_CLASSES, STAGE2_CLASSES, DiagnosisResult, rule_diagnoser
from .transport import (BackendError, BackendTimeout, DirectoryExchangeBackend,
                        DirectoryResponder, HttpBackend, LocalBackend, mask_from_wire,
                        mask_to_wire, serve_http_backend, volume_from_wire, volume_to_wire)

__all__ = [
    "derive_stage1", "derive_stage2", "diagnose_stage1", "diagnose_stage2",
    "echo_logic", "phantom_oracle_logic", "segment_via_backend",
    "KnowledgeBase", "Snippet",
    "Phantom", "PhantomSpec", "mask_from_intensities", "phantom_generate",
    "STAGE1_CLASSES", "STAGE2_CLASSES", "DiagnosisResult", "rule_diagnoser",
    "BackendError", "BackendTimeout", "DirectoryExchangeBackend", "DirectoryResponder",
    "HttpBackend", "LocalBackend", "serve_http_backend",
    "mask_to_wire", "mask_from_wire", "volume_to_wire", "volume_from_wire",
]
