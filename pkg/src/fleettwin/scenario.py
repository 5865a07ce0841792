"""Scenario files: the single source of world truth for a run.

JSON schema (informal): world bounds, obstacles, agents with descriptors /
poses / battery parameters, battery-box objects, detection settings, the
mission schedule and the seed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Optional

from .model import BatteryState, CameraSpec, DETECTION_THRESHOLD, Pose2D, PlatformDescriptor, validate_platform
from .world import AgentBody, Rect, WorldObject, WorldState

QUADRUPED_DEFAULT_CAMERAS = [
    {"camera_id": "front-left", "mount_bearing": 0.35, "fov": 1.2,
     "max_range": 10.0},
    {"camera_id": "front-right", "mount_bearing": -0.35, "fov": 1.2,
     "max_range": 10.0},
    {"camera_id": "left", "mount_bearing": math.pi / 2, "fov": 1.2,
     "max_range": 10.0},
    {"camera_id": "right", "mount_bearing": -math.pi / 2, "fov": 1.2,
     "max_range": 10.0},
    {"camera_id": "back", "mount_bearing": math.pi, "fov": 1.2,
     "max_range": 10.0},
]


class ScenarioError(ValueError):
    pass


class Scenario:
    def __init__(self, data: dict):
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        for key in ("agents", "objects", "missions"):
            val = data.get(key, [])
            if not (isinstance(val, list)
                    and all(isinstance(x, dict) for x in val)):
                raise ScenarioError("%r must be a list of objects" % (key,))
        self.data = data
        self.name = data.get("name", "unnamed")
        self.seed = data.get("seed", 0)
        self.tick_dt = data.get("tick_dt", 0.1)
        self.detection_threshold = data.get("detection_threshold",
                                            DETECTION_THRESHOLD)
        self.detection_jitter = data.get("detection_jitter", 0.0)
        self.max_ticks = data.get("max_ticks", 4000)
        self.min_ticks = data.get("min_ticks", 0)
        self.auto_approve = data.get("auto_approve", False)
        self.m3_enabled = data.get("m3_enabled", True)
        self.search_motion = data.get("search_motion", "rotate")
        self.schedule = list(data.get("missions", []))
        self.agents = list(data.get("agents", []))
        self.objects = list(data.get("objects", []))
        self.validate()

    def validate(self):
        problems = []
        kinds = [a.get("kind") for a in self.agents]
        ids = [a.get("agent_id") for a in self.agents]
        if len(set(ids)) != len(ids):
            problems.append("duplicate agent ids")
        for entry in self.schedule:
            mt = entry.get("mission_type")
            if mt not in ("M1", "M2"):
                problems.append("unschedulable mission type %r" % (mt,))
                continue
            if "quadruped" not in kinds:
                problems.append("%s requires a quadruped executor" % mt)
            if "aerial" not in kinds:
                problems.append("%s requires an aerial corroborator" % mt)
            if mt == "M2" and not entry.get("waypoints"):
                problems.append("M2 requires waypoints")
        if self.m3_enabled and any(a.get("battery_capable")
                                   for a in self.agents):
            if "quadruped" not in kinds:
                problems.append("M3 enabled but no quadruped helper")
            if "wheeled" not in kinds:
                problems.append("M3 enabled but no wheeled beneficiary")
            if not any(o.get("class") == "battery_box" for o in self.objects):
                problems.append("M3 enabled but no battery box in the world")
        for a in self.agents:
            try:
                desc = self.descriptor(a)
            except (KeyError, TypeError, ValueError) as e:
                problems.append("bad agent entry %r: %s"
                                % (a.get("agent_id"), e))
                continue
            problems.extend(validate_platform(desc))
        if problems:
            raise ScenarioError("; ".join(problems))

    def descriptor(self, entry: dict) -> PlatformDescriptor:
        cams = entry.get("cameras", [])
        if cams == "quadruped_default" or (
                not cams and entry["kind"] == "quadruped"):
            cams = QUADRUPED_DEFAULT_CAMERAS
        return PlatformDescriptor(
            agent_id=entry["agent_id"],
            kind=entry["kind"],
            cameras=tuple(CameraSpec(**c) for c in cams),
            has_manipulator=entry.get("has_manipulator", False),
            battery_capable=entry.get("battery_capable", False),
            max_speed=entry.get("max_speed", 0.0),
        )

    def descriptor_payload(self, entry: dict) -> dict:
        from .model import to_plain
        return to_plain(self.descriptor(entry))

    def build_world(self) -> WorldState:
        b = self.data.get("bounds", [-20, -20, 20, 20])
        world = WorldState(
            tick=0,
            tick_dt=self.tick_dt,
            bounds=Rect(*b),
            obstacles=[Rect(*o) for o in self.data.get("obstacles", [])],
            rng_seed=self.seed,
            detection_jitter=self.detection_jitter,
        )
        for entry in self.agents:
            desc = self.descriptor(entry)
            x, y, h = entry.get("pose", [0, 0, 0])
            bat = entry.get("battery", {})
            world.agents[desc.agent_id] = AgentBody(
                descriptor=desc,
                pose=Pose2D(x, y, h),
                battery=BatteryState(
                    level=bat.get("level", 1.0),
                    drain_rate=bat.get("drain_rate", 0.0),
                    alert_threshold=bat.get("alert_threshold", 0.20),
                    immobilize_threshold=bat.get("immobilize_threshold", 0.05),
                ),
            )
        for entry in self.objects:
            x, y, h = entry.get("pose", [0, 0, 0])
            world.objects[entry["object_id"]] = WorldObject(
                object_id=entry["object_id"],
                object_class=entry["class"],
                pose=Pose2D(x, y, h),
            )
        return world


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError("cannot read scenario %s: %s" % (path, e))
    return Scenario(data)
