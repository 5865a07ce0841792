import json
import math

import pytest
from hypothesis import given, strategies as st

from fleettwin.model import (
    BatteryState,
    C3Event,
    CameraSpec,
    ClassificationError,
    Detection,
    PlatformDescriptor,
    Pose2D,
    SerializationError,
    canonical_deserialize,
    canonical_serialize,
    classify_interaction,
    normalize_heading,
    validate_platform,
)

QUAD_CAMS = tuple(
    CameraSpec(cid, b, 1.2, 10.0)
    for cid, b in [("front-left", 0.35), ("front-right", -0.35),
                   ("left", math.pi / 2), ("right", -math.pi / 2),
                   ("back", math.pi)])


def make_quadruped(cams=QUAD_CAMS, manipulator=True):
    return PlatformDescriptor("spot", "quadruped", cams,
                              has_manipulator=manipulator, max_speed=1.0)


class TestClassifier:
    def test_independent_verification_is_corroboration(self):
        assert classify_interaction("aerial", "quadruped",
                                    "independent_verification") == "corroboration"

    def test_assistance_on_fault_is_collaboration(self):
        assert classify_interaction("quadruped", "wheeled",
                                    "assistance_on_fault") == "collaboration"

    def test_joint_task_step_is_cooperation(self):
        assert classify_interaction("aerial", "quadruped",
                                    "joint_task_step") == "cooperation"

    def test_unknown_pattern_raises(self):
        with pytest.raises(ClassificationError):
            classify_interaction("aerial", "quadruped", "handshake")

    def test_range_is_exactly_the_three_kinds(self):
        kinds = {classify_interaction("aerial", "wheeled", p)
                 for p in ("joint_task_step", "assistance_on_fault",
                           "independent_verification")}
        assert kinds == {"cooperation", "collaboration", "corroboration"}


class TestPose:
    def test_heading_normalized(self):
        assert Pose2D(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)
        assert Pose2D(0, 0, -math.pi).heading == pytest.approx(math.pi)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Pose2D(float("nan"), 0, 0)

    @given(st.floats(-100, 100))
    def test_normalize_range(self, theta):
        h = normalize_heading(theta)
        assert -math.pi < h <= math.pi


class TestValidatePlatform:
    def test_valid_quadruped_ok(self):
        assert validate_platform(make_quadruped()) == []

    def test_four_cameras_flagged(self):
        desc = make_quadruped(cams=QUAD_CAMS[:4])
        assert any("camera count" in v for v in validate_platform(desc))

    def test_fixed_camera_with_speed_flagged(self):
        desc = PlatformDescriptor("c", "fixed_camera", (), max_speed=1.0)
        assert any("fixed camera immobile" in v for v in validate_platform(desc))

    def test_duplicate_id_flagged(self):
        desc = make_quadruped()
        assert any("duplicate" in v
                   for v in validate_platform(desc, registry={"spot"}))


class TestDomainInvariants:
    def test_battery_thresholds_ordered(self):
        with pytest.raises(ValueError):
            BatteryState(level=0.5, alert_threshold=0.05,
                         immobilize_threshold=0.20)

    def test_detection_confidence_bounds(self):
        with pytest.raises(ValueError):
            Detection("battery_box", 1.5, 1.0, 0.0, "cam", 0)

    def test_c3_kind_closed_set(self):
        with pytest.raises(ValueError):
            C3Event(1, "symbiosis", "a", "b", 0)


# --- canonical serialization -------------------------------------------------

plain_json = st.recursive(
    st.none() | st.booleans()
    | st.integers(-2**53, 2**53)
    | st.floats(allow_nan=False, allow_infinity=False, width=64)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20)


class TestCanonicalSerialize:
    def test_empty_payload(self):
        assert canonical_serialize({}) == b"{}"

    def test_deterministic(self):
        rec = Detection("battery_box", 0.7, 3.0, 0.1, "front-left", 12)
        assert canonical_serialize(rec) == canonical_serialize(rec)

    def test_key_order_irrelevant(self):
        assert (canonical_serialize({"b": 1, "a": 2})
                == canonical_serialize({"a": 2, "b": 1}))

    def test_non_finite_rejected(self):
        with pytest.raises(SerializationError):
            canonical_serialize({"x": float("inf")})

    @given(plain_json)
    def test_round_trip_fixpoint(self, value):
        # independent re-parse: stdlib json, then re-serialize
        data = canonical_serialize(value)
        reparsed = json.loads(data.decode("utf-8"))
        assert canonical_serialize(reparsed) == data

    @given(plain_json, plain_json)
    def test_injective_on_distinct_values(self, a, b):
        if a != b:
            assert canonical_serialize(a) != canonical_serialize(b)

    def test_domain_record_round_trip(self):
        rec = C3Event(3, "cooperation", "tello", "spot", 42,
                      mission="M1-001", detail={"activity": "follow"})
        data = canonical_serialize(rec)
        assert canonical_serialize(canonical_deserialize(data)) == data
