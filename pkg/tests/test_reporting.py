import pytest

from cardiagent.aha17 import Bullseye17
from cardiagent.backends import DiagnosisResult
from cardiagent.quantify import Measurement, MeasurementSet
from cardiagent.reporting import (HALLUCINATION_PENALTIES, ReferenceFindings,
                                  StructuredReport, assemble_report, quant_deduction,
                                  render_report, score_report)


def _ms(edv=120.0, esv=48.0, ef=60.0):
    ms = MeasurementSet()
    for name, v, unit in (("LVEDV", edv, "mL"), ("LVESV", esv, "mL"), ("LVEF", ef, "%")):
        ms.add(Measurement(name=name, value=v, unit=unit, source="SAX", phase="static"))
    return ms


def _diag(predicted="NH", stage=1):
    classes = (["NH", "IHD", "NICM"] if stage == 1
               else ["HCM", "DCM", "RCM", "ACM", "Myocarditis"])
    p = {c: (0.85 if c == predicted else 0.15 / (len(classes) - 1)) for c in classes}
    return DiagnosisResult(stage=stage, probabilities=p, predicted=predicted, evidence=[])


def _wall():
    return Bullseye17(values={i: 8.0 for i in range(1, 18)}, quantity="LVEDWT",
                      statistic="mean", extras={})


def _ref(**over):
    base = dict(expected_diagnosis="NH",
                reference_quantities={"LVEDV": 120.0, "LVESV": 48.0, "LVEF": 60.0})
    base.update(over)
    return ReferenceFindings(**base)


class TestAssembleReport:
    def _arts(self):
        return {
            "meas-0": {"type": "measurements", "data": _ms()},
            "wall-1": {"type": "thickness_bullseye", "data": _wall()},
            "diag-2": {"type": "diagnosis", "data": _diag()},
        }

    def test_sections_and_provenance(self):
        r = assemble_report(self._arts())
        assert r.function_quantification is not None
        assert r.wall_assessment is not None
        assert r.diagnosis[0].predicted == "NH"
        assert r.provenance["function_quantification"] == "meas-0"
        assert r.provenance["wall_assessment"] == "wall-1"
        assert "NH" in r.impression

    def test_requires_measurements(self):
        arts = self._arts()
        del arts["meas-0"]
        with pytest.raises(ValueError, match="measurement"):
            assemble_report(arts)

    def test_duplicate_single_slot_rejected(self):
        arts = self._arts()
        arts["meas-9"] = {"type": "measurements", "data": _ms()}
        with pytest.raises(ValueError, match="duplicate"):
            assemble_report(arts)

    def test_round_trip(self):
        r = assemble_report(self._arts())
        back = StructuredReport.from_json(r.to_json())
        assert back.to_json() == r.to_json()


class TestRenderReport:
    def test_contains_all_parameters_and_provenance(self):
        r = assemble_report({
            "meas-0": {"type": "measurements", "data": _ms()},
            "diag-1": {"type": "diagnosis", "data": _diag()},
        })
        text = render_report(r)
        assert "LVEDV: 120.0 mL" in text
        assert "LVEF: 60.0 %" in text
        assert "meas-0" in text  # provenance listing

    def test_deterministic(self):
        arts = {"meas-0": {"type": "measurements", "data": _ms()}}
        assert render_report(assemble_report(arts)) == render_report(assemble_report(arts))


class TestQuantDeduction:
    @pytest.mark.parametrize("err,points", [
        (0.04, 0), (0.07, 3), (0.12, 5), (0.25, 7),
        (0.0, 0), (0.05, 3), (0.10, 5), (0.20, 5), (0.21, 7),
    ])
    def test_bands(self, err, points):
        assert quant_deduction(err) == points

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            quant_deduction(-0.01)


class TestScoreReport:
    def _report(self, **ms_over):
        return assemble_report({
            "meas-0": {"type": "measurements", "data": _ms(**ms_over)},
            "diag-1": {"type": "diagnosis", "data": _diag()},
        })

    def test_perfect_report_scores_100(self):
        s = score_report(self._report(), _ref())
        assert s.total == 100

    def test_ef_error_12pct(self):
        s = score_report(self._report(ef=60.0 * 1.12), _ref())
        assert s.quantification == 10
        assert s.total == 95

    def test_wrong_diagnosis_costs_20(self):
        s = score_report(self._report(), _ref(expected_diagnosis="IHD"))
        assert s.clinical_diagnosis == 0
        assert s.total == 80

    def test_composed_deductions(self):
        s = score_report(self._report(), _ref(), missing_wall_items=1,
                         redundant_items=1, hallucination="mild")
        assert s.total == 100 - 1 - 2 - 6

    def test_hallucination_grades(self):
        assert HALLUCINATION_PENALTIES == {"none": 0, "logical_conflict": -3,
                                           "mild": -6, "major": -10}
        s = score_report(self._report(), _ref(), hallucination="major")
        assert s.total == 90
        with pytest.raises(ValueError):
            score_report(self._report(), _ref(), hallucination="wild")

    def test_floor_at_zero(self):
        # worst case of every subscore: 0+8+0+0+0+0-10 clamps to 0
        s = score_report(self._report(ef=60.0 * 1.30), _ref(expected_diagnosis="IHD"),
                         missing_wall_items=10, missing_lge_items=15,
                         missing_other_items=10, redundant_items=15,
                         hallucination="major")
        assert s.total == 0
