import threading

import numpy as np
import pytest

from cardiagent.backends import (BackendError, DiagnosisResult, DirectoryExchangeBackend,
                                 DirectoryResponder, HttpBackend, KnowledgeBase,
                                 LocalBackend, derive_stage1, derive_stage2,
                                 diagnose_stage1, diagnose_stage2, echo_logic,
                                 mask_from_wire, mask_to_wire, phantom_oracle_logic,
                                 rule_diagnoser, segment_via_backend, serve_http_backend,
                                 volume_from_wire, volume_to_wire)
from cardiagent.backends.phantom import PhantomSpec, phantom_generate
from cardiagent.quantify import MeasurementSet, Measurement
from cardiagent.volume_io import SequenceKind


def _measurements(**over):
    vals = dict(LVEDV=150.0, LVESV=60.0, LVEF=60.0, LVEDD=50.0)
    vals.update(over)
    ms = MeasurementSet()
    units = {"LVEDV": "mL", "LVESV": "mL", "LVEF": "%", "LVEDD": "mm"}
    for name, v in vals.items():
        ms.add(Measurement(name=name, value=v, unit=units.get(name, ""),
                           source="SAX", phase="static"))
    return ms


def _thickness(values):
    from cardiagent.aha17 import Bullseye17
    return Bullseye17(values=dict(values), quantity="LVEDWT", statistic="mean",
                      extras={"max": dict(values)})


UNIFORM = {i: 8.0 for i in range(1, 18)}


class TestRuleDiagnoser:
    def test_nh(self):
        r = rule_diagnoser(_measurements(LVEF=62.0), _thickness(UNIFORM), stage=1)
        assert r.predicted == "NH"
        assert r.stage == 1
        assert sum(r.probabilities.values()) == pytest.approx(1.0)

    def test_nicm(self):
        r = rule_diagnoser(_measurements(LVEF=30.0, LVEDD=62.0),
                           _thickness(UNIFORM), stage=1)
        assert r.predicted == "NICM"
        assert r.probabilities["NICM"] == pytest.approx(0.85)

    def test_ihd_on_thickness_cv(self):
        vals = dict(UNIFORM)
        for i in range(1, 7):
            vals[i] = 16.0  # strongly heterogeneous wall
        r = rule_diagnoser(_measurements(LVEF=45.0, LVEDD=50.0),
                           _thickness(vals), stage=1)
        assert r.predicted == "IHD"

    def test_low_confidence_fallback(self):
        r = rule_diagnoser(_measurements(LVEF=48.0), _thickness(UNIFORM), stage=1)
        assert r.predicted == "NICM"
        assert max(r.probabilities.values()) < 0.5

    def test_stage2_hcm(self):
        vals = dict(UNIFORM)
        vals[2] = 18.0
        r = rule_diagnoser(_measurements(LVEF=60.0), _thickness(vals), stage=2)
        assert r.predicted == "HCM"

    def test_stage2_dcm(self):
        r = rule_diagnoser(_measurements(LVEF=30.0, LVEDD=62.0),
                           _thickness(UNIFORM), stage=2)
        assert r.predicted == "DCM"

    def test_stage2_feature_flags(self):
        r = rule_diagnoser(_measurements(), _thickness(UNIFORM), stage=2,
                           feature_flags={"RCM"})
        assert r.predicted == "RCM"
        r = rule_diagnoser(_measurements(), _thickness(UNIFORM), stage=2,
                           feature_flags={"ACM"})
        assert r.predicted == "ACM"

    def test_probabilities_validated(self):
        with pytest.raises(ValueError):
            DiagnosisResult(stage=1, probabilities={"NH": 0.5, "IHD": 0.2, "NICM": 0.2},
                            predicted="NH", evidence=[])


class TestKnowledgeBase:
    def _kb(self):
        kb = KnowledgeBase()
        kb.ingest([
            {"id": "a", "title": "EF ranges", "text": "ejection fraction normal range",
             "source": "s"},
            {"id": "b", "title": "HCM", "text": "hypertrophic cardiomyopathy wall thickness",
             "source": "s"},
        ])
        return kb

    def test_retrieve_ranked(self):
        hits = self._kb().retrieve("wall thickness hypertrophic", k=2)
        assert hits and hits[0].doc_id == "b"

    def test_no_match_empty(self):
        assert self._kb().retrieve("zzz qqq", k=3) == []

    def test_duplicate_id_rejected(self):
        kb = self._kb()
        with pytest.raises(ValueError, match="duplicate"):
            kb.ingest([{"id": "a", "title": "x", "text": "y", "source": "s"}])

    def test_deterministic(self):
        a = self._kb().retrieve("ejection fraction", k=2)
        b = self._kb().retrieve("ejection fraction", k=2)
        assert [s.doc_id for s in a] == [s.doc_id for s in b]


class TestWireFormat:
    def test_volume_round_trip(self, phantom_plain):
        v = phantom_plain.sax_cine
        back = volume_from_wire(volume_to_wire(v))
        assert back.data.tobytes() == v.data.tobytes()
        assert back.kind == v.kind

    def test_mask_round_trip(self, phantom_plain):
        m = phantom_plain.sax_masks[0]
        back = mask_from_wire(mask_to_wire(m))
        assert np.array_equal(back.labels, m.labels)
        assert back.kind == m.kind


class TestTransports:
    def test_local_unknown_task_is_error(self):
        b = LocalBackend(logic=echo_logic)
        out = b.infer({"task": "NOPE"})
        assert out["status"] == "error"

    def test_directory_exchange(self, tmp_path, phantom_plain):
        backend = DirectoryExchangeBackend(root=tmp_path, timeout_ms=10000)
        responder = DirectoryResponder(root=tmp_path, logic=phantom_oracle_logic).start()
        try:
            masks = segment_via_backend(phantom_plain.sax_cine, "SAXCS", backend)
        finally:
            responder.stop()
        assert len(masks) == phantom_plain.sax_cine.phases
        assert np.array_equal(masks[0].labels, phantom_plain.sax_masks[0].labels)

    def test_directory_timeout(self, tmp_path):
        from cardiagent.backends import BackendTimeout
        backend = DirectoryExchangeBackend(root=tmp_path, timeout_ms=200)
        with pytest.raises(BackendTimeout):
            backend.infer({"task": "SAXCS"})

    def test_http_round_trip(self, phantom_plain):
        server, port = serve_http_backend(phantom_oracle_logic)
        try:
            backend = HttpBackend(endpoint=f"http://127.0.0.1:{port}")
            masks = segment_via_backend(phantom_plain.sax_cine, "SAXCS", backend)
            assert np.array_equal(masks[0].labels, phantom_plain.sax_masks[0].labels)
        finally:
            server.shutdown()


class TestOracleBackendDiagnosis:
    def _setup(self, phantom):
        backend = LocalBackend(logic=phantom_oracle_logic)
        cines = {SequenceKind.SAX_CINE: phantom.sax_cine,
                 SequenceKind.CH2_CINE: phantom.ch2_cine,
                 SequenceKind.CH4_CINE: phantom.ch4_cine}
        masks = {SequenceKind.SAX_CINE: phantom.sax_masks,
                 SequenceKind.CH2_CINE: [phantom.ch2_mask],
                 SequenceKind.CH4_CINE: [phantom.ch4_mask]}
        return backend, cines, masks

    def test_stage1_runs(self, phantom_plain):
        backend, cines, masks = self._setup(phantom_plain)
        r = diagnose_stage1(cines, masks, backend)
        assert r.stage == 1
        assert r.predicted in ("NH", "IHD", "NICM")

    def test_stage2_gate(self, phantom_plain):
        backend, cines, masks = self._setup(phantom_plain)
        nh = DiagnosisResult(stage=1, predicted="NH", evidence=[],
                             probabilities={"NH": 0.85, "IHD": 0.075, "NICM": 0.075})
        with pytest.raises(BackendError, match="gate"):
            diagnose_stage2(cines, masks, backend, stage1=nh)

    def test_stage2_with_lge(self, phantom_lge):
        backend, cines, masks = self._setup(phantom_lge)
        cines[SequenceKind.SAX_LGE] = phantom_lge.lge_volume
        masks[SequenceKind.SAX_LGE] = [phantom_lge.lge_mask]
        r = diagnose_stage2(cines, masks, backend, override=True)
        assert r.stage == 2
        assert r.predicted in ("HCM", "DCM", "RCM", "ACM", "Myocarditis")

    def test_missing_view_rejected(self, phantom_plain):
        backend, cines, masks = self._setup(phantom_plain)
        del cines[SequenceKind.CH2_CINE]
        with pytest.raises(BackendError, match="missing"):
            diagnose_stage1(cines, masks, backend)


class TestDerivedDiagnosis:
    def test_nh_phantom(self):
        ph = phantom_generate(PhantomSpec(seed=1, es_axes=(21.0, 21.0, 21.0)))
        r = derive_stage1(ph.sax_masks, heart_rate=70.0)
        assert r.predicted == "NH"

    def test_hcm_phantom(self):
        ph = phantom_generate(PhantomSpec(seed=1, shell_thickness=18.0,
                                          es_axes=(21.0, 21.0, 21.0)))
        r = derive_stage2(ph.sax_masks, lge_mask=ph.lge_mask)
        assert r.predicted == "HCM"


class TestPhantomGeometry:
    def test_analytic_volumes(self):
        ph = phantom_generate(PhantomSpec(seed=0))
        a, b, c = 30.0, 30.0, 30.0
        assert ph.analytic.value("LVEDV") == pytest.approx(4 / 3 * np.pi * a * b * c / 1000.0)
        assert ph.analytic.value("LVEDD") == pytest.approx(60.0)

    def test_noise_does_not_change_oracle_masks(self):
        clean = phantom_generate(PhantomSpec(seed=5, noise_level=0.0))
        noisy = phantom_generate(PhantomSpec(seed=5, noise_level=40.0))
        assert np.array_equal(clean.sax_masks[0].labels, noisy.sax_masks[0].labels)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            PhantomSpec(es_axes=(40.0, 40.0, 40.0))
        with pytest.raises(ValueError):
            PhantomSpec(noise_level=80.0)
