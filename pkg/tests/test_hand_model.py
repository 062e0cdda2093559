import json
import math

import pytest
from hypothesis import given, strategies as st

from dash_teleop.errors import ValidationError
from dash_teleop.hand_model import (
    DEFAULT_JOINT_LIMITS,
    FINGER_ORDER,
    CalibrationWeights,
    DesignParams,
    FingerId,
    JointAngles,
    JointLimits,
    LimitRange,
    MotorCommand,
    MotorTriple,
    denormalize,
    load_design_params,
    load_hand_versions,
    load_weights_bundle,
    normalize,
)
from conftest import REFERENCE_WEIGHT_TABLE


class TestNormalize:
    def test_lower_bound_maps_to_zero(self):
        assert normalize(-30.0, DEFAULT_JOINT_LIMITS.mcp_side) == 0.0

    def test_upper_bound_maps_to_one(self):
        assert normalize(30.0, DEFAULT_JOINT_LIMITS.mcp_side) == 1.0

    def test_midpoint(self):
        assert normalize(45.0, LimitRange(0.0, 90.0)) == 0.5

    def test_out_of_range_clamps(self):
        assert normalize(120.0, LimitRange(0.0, 90.0)) == 1.0
        assert normalize(-5.0, LimitRange(0.0, 90.0)) == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            normalize(float("nan"), LimitRange(0.0, 90.0))
        with pytest.raises(ValidationError):
            normalize(float("inf"), LimitRange(0.0, 90.0))


class TestDenormalize:
    def test_endpoints(self):
        r = LimitRange(0.0, 90.0)
        assert denormalize(0.0, r) == 0.0
        assert denormalize(1.0, r) == 90.0

    def test_midpoint(self):
        assert denormalize(0.5, LimitRange(0.0, 90.0)) == 45.0

    def test_outside_unit_interval_rejected(self):
        with pytest.raises(ValidationError):
            denormalize(1.5, LimitRange(0.0, 90.0))
        with pytest.raises(ValidationError):
            denormalize(-0.1, LimitRange(0.0, 90.0))

    @given(st.floats(min_value=-30.0, max_value=30.0, allow_nan=False))
    def test_round_trip_identity(self, raw):
        r = LimitRange(-30.0, 30.0)
        back = denormalize(normalize(raw, r), r)
        assert back == pytest.approx(raw, rel=1e-12, abs=1e-12)


class TestLimits:
    def test_ranges_must_be_ordered(self):
        with pytest.raises(ValidationError):
            LimitRange(10.0, 10.0)
        with pytest.raises(ValidationError):
            LimitRange(20.0, 10.0)

    def test_dict_round_trip(self):
        limits = JointLimits(pip=LimitRange(0.0, 110.0))
        assert JointLimits.from_dict(limits.as_dict()) == limits

    def test_unknown_joint_key_rejected(self):
        with pytest.raises(ValidationError):
            JointLimits.from_dict({"elbow": [0, 90]})


class TestValueTypes:
    def test_joint_angles_validate_unit_interval(self):
        JointAngles(0.0, 1.0, 0.5, 0.25)
        with pytest.raises(ValidationError):
            JointAngles(1.2, 0.0, 0.0, 0.0)
        with pytest.raises(ValidationError):
            JointAngles(0.0, -0.1, 0.0, 0.0)

    def test_joint_angles_from_raw_clamp(self):
        j = JointAngles.from_raw_degrees((0.0, 45.0, 200.0, -10.0), DEFAULT_JOINT_LIMITS)
        assert j.as_tuple() == (0.5, 0.5, 1.0, 0.0)

    def test_motor_triple_validates(self):
        with pytest.raises(ValidationError):
            MotorTriple(-0.07, 0.0, 0.0)

    def test_command_requires_all_four_fingers(self):
        triple = MotorTriple(0.5, 0.5, 0.5)
        MotorCommand({f: triple for f in FINGER_ORDER}, timestamp_ms=0)
        with pytest.raises(ValidationError):
            MotorCommand({FingerId.THUMB: triple}, timestamp_ms=0)

    def test_weights_must_be_finite(self):
        with pytest.raises(ValidationError):
            CalibrationWeights(*([float("nan")] + [0.0] * 9))

    def test_design_params_validation(self):
        with pytest.raises(ValidationError):
            DesignParams(
                palm_size_mm=(84, 84),
                finger_length_mm=-1,
                mcp_diameter_mm=6,
                mcp_height_mm=8,
                dip_crease_width_mm=10.3,
                thumb_angle_deg=45,
                fingertip_edge_mm=3.5,
                fingertip_thickness_mm=13.2,
                finger_strength_n=40,
            )
        with pytest.raises(ValidationError):
            DesignParams(
                palm_size_mm=(84, 84),
                finger_length_mm=100,
                mcp_diameter_mm=6,
                mcp_height_mm=8,
                dip_crease_width_mm=10.3,
                thumb_angle_deg=95,
                fingertip_edge_mm=3.5,
                fingertip_thickness_mm=13.2,
                finger_strength_n=40,
            )


class TestWeightBundle:
    def test_all_versions_match_reference_table(self):
        bundle = load_weights_bundle()
        assert set(bundle) == set(REFERENCE_WEIGHT_TABLE)
        for name, expected in REFERENCE_WEIGHT_TABLE.items():
            w, b = bundle[name].as_wb()
            assert (w + b) == pytest.approx(expected, abs=1e-12)

    def test_v1_mcp_block_is_invertible(self, v1_weights):
        # (-1.05)(0.83) - (0.1)(0.01) = -0.8725
        assert v1_weights.det == pytest.approx(-0.8725, abs=1e-12)
        assert v1_weights.mcp_invertible

    def test_all_versions_invertible(self, weights_by_version):
        for name, w in weights_by_version.items():
            assert abs(w.det) > 0.1, name

    def _write(self, tmp_path, records):
        path = tmp_path / "weights.json"
        path.write_text(json.dumps(records))
        return path

    def test_missing_field_rejected(self, tmp_path):
        path = self._write(tmp_path, [{"version": "v1", "w": [1, 2, 3, 4, 5, 6]}])
        with pytest.raises(ValidationError, match="exactly fields"):
            load_weights_bundle(path)

    def test_extra_field_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            [{"version": "v1", "w": [0] * 6, "b": [0] * 4, "comment": "x"}],
        )
        with pytest.raises(ValidationError, match="exactly fields"):
            load_weights_bundle(path)

    def test_wrong_length_rejected(self, tmp_path):
        path = self._write(tmp_path, [{"version": "v1", "w": [0] * 5, "b": [0] * 4}])
        with pytest.raises(ValidationError, match="6 gains"):
            load_weights_bundle(path)

    def test_duplicate_version_rejected(self, tmp_path):
        rec = {"version": "v1", "w": [0] * 6, "b": [0] * 4}
        path = self._write(tmp_path, [rec, rec])
        with pytest.raises(ValidationError, match="duplicate"):
            load_weights_bundle(path)


class TestVersionRegistry:
    def test_calibrated_versions_cover_all_fingers(self, versions):
        for name in ("v1", "v2", "v3", "v4", "v5"):
            hv = versions[name]
            assert set(hv.weights) == set(FINGER_ORDER)
            assert hv.design is not None

    def test_baseline_has_no_weights_or_design(self, versions):
        baseline = versions["allegro"]
        assert baseline.weights is None
        assert baseline.design is None

    def test_design_records_match_table(self):
        designs = load_design_params()
        assert designs["v1"].palm_size_mm == (94.0, 102.0)
        assert designs["v1"].finger_length_mm == 90
        assert designs["v2"].finger_length_mm == 100
        assert designs["v3"].thumb_angle_deg == 0
        assert designs["v4"].finger_strength_n == 51.8
        assert designs["v5"].dip_crease_width_mm == 13.0
        # v2..v5 share the 100 mm finger the simulator defaults to
        assert all(designs[v].finger_length_mm == 100 for v in ("v2", "v3", "v4", "v5"))
