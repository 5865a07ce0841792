"""Core domain types shared by every component.

Includes the interaction classifier (cooperation / collaboration /
corroboration), platform descriptors, detections, mission instances and the
canonical byte serialization used for both the wire protocol and the log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Any, Optional

PLATFORM_KINDS = ("quadruped", "wheeled", "aerial", "fixed_camera", "operator")
TARGET_CLASSES = ("battery_box", "wheeled_platform")
INTERACTION_KINDS = ("cooperation", "collaboration", "corroboration")
INTERACTION_PATTERNS = (
    "joint_task_step",
    "assistance_on_fault",
    "independent_verification",
)
MISSION_TYPES = ("M1", "M2", "M3")

# Fleet-wide default: a detection only counts when at least this confident.
DETECTION_THRESHOLD = 0.60

QUADRUPED_CAMERA_IDS = ("front-left", "front-right", "left", "right", "back")


class ClassificationError(ValueError):
    """Unknown interaction pattern."""


class SerializationError(ValueError):
    """Record cannot be canonically serialized."""


def normalize_heading(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t > math.pi:
        t -= 2.0 * math.pi
    elif t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)
                and math.isfinite(self.heading)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def bearing_to(self, other: "Pose2D") -> float:
        """Absolute bearing of `other` as seen from this pose."""
        return math.atan2(other.y - self.y, other.x - self.x)


@dataclass(frozen=True)
class CameraSpec:
    camera_id: str
    mount_bearing: float  # radians relative to body heading
    fov: float            # radians, full cone angle
    max_range: float      # meters

    def __post_init__(self):
        if not (0.0 < self.fov <= math.pi):
            raise ValueError("fov must be in (0, pi]")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class BatteryState:
    level: float
    drain_rate: float = 0.0        # fraction per sim-second
    alert_threshold: float = 0.20
    immobilize_threshold: float = 0.05

    def __post_init__(self):
        if not (0.0 <= self.immobilize_threshold < self.alert_threshold < 1.0):
            raise ValueError("need 0 <= immobilize < alert < 1")
        if not (0.0 <= self.level <= 1.0):
            raise ValueError("level must be in [0,1]")

    def immobilized(self) -> bool:
        return self.level <= self.immobilize_threshold


@dataclass(frozen=True)
class PlatformDescriptor:
    agent_id: str
    kind: str
    cameras: tuple = ()
    has_manipulator: bool = False
    battery_capable: bool = False
    max_speed: float = 0.0

    def __post_init__(self):
        if self.kind not in PLATFORM_KINDS:
            raise ValueError("unknown platform kind %r" % (self.kind,))
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def camera(self, camera_id: str) -> CameraSpec:
        for cam in self.cameras:
            if cam.camera_id == camera_id:
                return cam
        raise KeyError(camera_id)


def validate_platform(desc: PlatformDescriptor,
                      registry: Optional[set] = None) -> list:
    """Return a list of invariant violations (empty means ok)."""
    violations = []
    if desc.kind == "quadruped":
        ids = tuple(c.camera_id for c in desc.cameras)
        if sorted(ids) != sorted(QUADRUPED_CAMERA_IDS):
            violations.append("camera count: quadruped needs the five body "
                              "cameras %s, got %s" % (QUADRUPED_CAMERA_IDS, ids))
        if not desc.has_manipulator:
            violations.append("quadruped requires a manipulator")
    if desc.kind == "fixed_camera" and desc.max_speed != 0.0:
        violations.append("fixed camera immobile: max_speed must be 0")
    if registry is not None and desc.agent_id in registry:
        violations.append("duplicate agent_id %r" % (desc.agent_id,))
    return violations


@dataclass(frozen=True)
class Detection:
    target_class: str
    confidence: float
    range: float
    bearing: float        # relative to observer body heading
    camera_id: str
    tick: int
    target_id: str = ""   # object id or agent id actually seen

    def __post_init__(self):
        if self.target_class not in TARGET_CLASSES:
            raise ValueError("unknown target class %r" % (self.target_class,))
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0,1]")


@dataclass(frozen=True)
class C3Event:
    """One classified inter-agent interaction, as written to the log."""
    event_id: int
    kind: str
    initiator: str
    responder: str
    tick: int
    mission: Optional[str] = None
    detail: dict = field(default_factory=dict)
    symbiosis_mode: Optional[str] = None  # mutualism etc.; unset by default

    def __post_init__(self):
        if self.kind not in INTERACTION_KINDS:
            raise ValueError("unknown interaction kind %r" % (self.kind,))


@dataclass
class MissionInstance:
    mission_id: str
    mission_type: str
    state: str
    participants: list
    history: list = field(default_factory=list)  # (tick, state, cause)

    def record(self, tick: int, state: str, cause: str):
        self.history.append((tick, state, cause))
        self.state = state


@dataclass(frozen=True)
class CorroborationRequest:
    request_id: str
    mission_id: str
    subject: str
    corroborators: tuple
    deadline_tick: int

    def __post_init__(self):
        object.__setattr__(self, "corroborators", tuple(self.corroborators))
        if not self.corroborators:
            raise ValueError("corroborator set must not be empty")


@dataclass(frozen=True)
class CorroborationVerdict:
    request_id: str
    verifier: str
    verdict: str  # confirmed | denied
    tick: int

    def __post_init__(self):
        if self.verdict not in ("confirmed", "denied"):
            raise ValueError("verdict must be confirmed or denied")


def classify_interaction(initiator_kind: str, responder_kind: str,
                         interaction_pattern: str) -> str:
    """Map an interaction pattern onto one of the three governance kinds.

    Joint execution of a task step is cooperation, assisting another system
    through a fault is collaboration, and independently verifying another
    system's state or actions is corroboration.
    """
    mapping = {
        "joint_task_step": "cooperation",
        "assistance_on_fault": "collaboration",
        "independent_verification": "corroboration",
    }
    try:
        return mapping[interaction_pattern]
    except KeyError:
        raise ClassificationError(
            "unknown interaction pattern %r" % (interaction_pattern,)) from None


# --- canonical serialization -------------------------------------------------

def to_plain(value: Any) -> Any:
    """Convert domain values into plain JSON-compatible structures."""
    if isinstance(value, (Pose2D, CameraSpec, BatteryState, PlatformDescriptor,
                          Detection, C3Event, MissionInstance,
                          CorroborationRequest, CorroborationVerdict)):
        return to_plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def canonical_serialize(record: Any) -> bytes:
    """Deterministic UTF-8 bytes: sorted keys, no insignificant whitespace,
    floats in shortest round-trip decimal form. Rejects non-finite numbers."""
    plain = to_plain(record)
    try:
        text = json.dumps(plain, sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False, allow_nan=False)
    except ValueError as e:
        raise SerializationError(str(e)) from None
    return text.encode("utf-8")


def canonical_deserialize(data: bytes) -> Any:
    return json.loads(data.decode("utf-8"))
