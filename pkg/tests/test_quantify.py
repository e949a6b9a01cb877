import numpy as np
import pytest

from cardiagent import quantify
from cardiagent.quantify import (MYOCARDIAL_DENSITY_G_PER_ML, MeasurementSet,
                                 cavity_volume, detect_ed_es, function_params,
                                 lv_mass, quantify_study)
from cardiagent.volume_io import LABEL_SCHEMAS, LabelMask, SequenceKind


def _sax(labels, spacing=(8.0, 1.0, 1.0)):
    return LabelMask(labels=np.asarray(labels, dtype=np.int16), spacing=spacing,
                     schema=LABEL_SCHEMAS[SequenceKind.SAX_CINE],
                     kind=SequenceKind.SAX_CINE)


def _block_mask(n_cavity, spacing=(8.0, 1.0, 1.0)):
    labels = np.zeros((2, 20, 20), dtype=np.int16)
    flat = labels.reshape(2, -1)
    flat[0, :n_cavity] = 1
    return _sax(labels, spacing)


class TestCavityVolume:
    def test_voxel_count_times_spacing(self):
        m = _block_mask(100, spacing=(8.0, 1.0, 1.0))
        ml, absent = cavity_volume(m, m.label_for("LV cavity"))
        assert not absent
        assert ml == pytest.approx(100 * 8.0 / 1000.0)

    def test_absent_flag(self):
        ml, absent = cavity_volume(_block_mask(0), 1)
        assert absent and ml == 0.0


class TestDetectEdEs:
    def _series(self, counts):
        return [_block_mask(c) for c in counts]

    def test_argmax_argmin(self):
        pair = detect_ed_es(self._series([50, 80, 20, 40]), 1)
        assert pair.ed_phase == 1 and pair.es_phase == 2
        assert not pair.tie

    def test_first_occurrence(self):
        pair = detect_ed_es(self._series([80, 80, 20, 20]), 1)
        assert pair.ed_phase == 0 and pair.es_phase == 2

    def test_constant_series_tie(self):
        pair = detect_ed_es(self._series([30, 30, 30]), 1)
        assert pair.tie
        assert pair.ed_phase == 0 and pair.es_phase == 2

    def test_needs_two_phases(self):
        with pytest.raises(ValueError):
            detect_ed_es(self._series([10]), 1)


class TestFunctionParams:
    def test_frozen_values(self):
        out = function_params(120.0, 48.0, heart_rate=75.0)
        assert out["SV"] == pytest.approx(72.0)
        assert out["LVEF"] == pytest.approx(60.0)
        assert out["CO"] == pytest.approx(72.0 * 75.0 / 1000.0)
        assert out["flags"] == []

    def test_no_heart_rate_no_co(self):
        out = function_params(120.0, 48.0, heart_rate=None)
        assert "CO" not in out

    def test_negative_ef_flagged(self):
        out = function_params(40.0, 50.0, heart_rate=None)
        assert "negative-EF" in out["flags"]

    def test_nonpositive_edv_rejected(self):
        with pytest.raises(ValueError):
            function_params(0.0, 0.0)


class TestLvMass:
    def test_density_factor(self):
        labels = np.zeros((1, 10, 10), dtype=np.int16)
        labels[0, :5] = 2  # 50 voxels of myocardium
        m = _sax(labels, spacing=(10.0, 1.0, 1.0))
        mass = lv_mass(m)
        assert mass == pytest.approx(50 * 10.0 / 1000.0 * MYOCARDIAL_DENSITY_G_PER_ML)
        assert MYOCARDIAL_DENSITY_G_PER_ML == 1.05

    def test_empty_myocardium_rejected(self):
        with pytest.raises(ValueError, match="no myocardial voxels"):
            lv_mass(_block_mask(10))


class TestPhantomAgreement:
    """Measured values against the closed-form phantom reference."""

    def test_volumes_within_2pct(self, phantom_plain):
        ms = quantify_study(phantom_plain.sax_masks,
                            heart_rate=phantom_plain.sax_cine.heart_rate,
                            ch4_mask=phantom_plain.ch4_mask)
        ref = phantom_plain.analytic
        for name in ("LVEDV", "LVESV", "LVM"):
            got, want = ms.value(name), ref.value(name)
            assert abs(got - want) / want < 0.02, name

    def test_ef_within_half_point(self, phantom_plain):
        ms = quantify_study(phantom_plain.sax_masks)
        assert abs(ms.value("LVEF") - phantom_plain.analytic.value("LVEF")) < 0.5

    def test_diameters_within_one_voxel(self, phantom_plain):
        ms = quantify_study(phantom_plain.sax_masks,
                            ch4_mask=phantom_plain.ch4_mask)
        ref = phantom_plain.analytic
        for name in ("LVEDD", "LAT4CHD", "RAT4CHD"):
            assert abs(ms.value(name) - ref.value(name)) <= 1.0, name

    def test_apex_thickness(self, phantom_plain):
        ms = quantify_study(phantom_plain.sax_masks,
                            ch4_mask=phantom_plain.ch4_mask)
        assert abs(ms.value("APEX_THICKNESS")
                   - phantom_plain.analytic.value("APEX_THICKNESS")) <= 1.0


class TestMeasurementSetSerialization:
    def test_round_trip(self, phantom_plain):
        ms = quantify_study(phantom_plain.sax_masks, heart_rate=70.0)
        back = MeasurementSet.from_json(ms.to_json())
        assert back.to_json() == ms.to_json()
