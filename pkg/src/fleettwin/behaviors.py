"""Per-platform controllers.

Each controller is a sequential task that talks to the rest of the system
only through protocol frames plus its own body's motion commands. In
deterministic mode the scheduler steps controllers in ascending agent_id
order once per tick.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

from . import world as worldmod
from .model import DETECTION_THRESHOLD, Detection, Pose2D, to_plain
from .protocol import Frame
from .world import MoveCommand, WorldState, perceive, plan_path, trace_circle, trace_square, visible

TELEMETRY_INTERVAL = 5
ARM_TRACE_SAMPLES = 40
SCAN_ROTATE_STEP = math.pi / 4.0
APPROACH_STANDOFF = 0.6       # stop this close to a grasp target (< reach)
PLACE_DISTANCE = 2.0          # box goes this far in front of the partner
FOLLOW_DISTANCE = 2.0


class Controller:
    """Base: frame IO bookkeeping shared by every platform controller."""

    def __init__(self, agent_id: str, descriptor_payload: dict):
        self.agent_id = agent_id
        self.descriptor_payload = descriptor_payload
        self.seq = 0
        self.inbox: List[Frame] = []
        self.outbox: List[Frame] = []
        self.moves: List[MoveCommand] = []

    def hello_frame(self, tick: int) -> Frame:
        return self._frame("HELLO", "hub", self.descriptor_payload, tick)

    def _frame(self, type_: str, dst: str, payload: dict, tick: int) -> Frame:
        self.seq += 1
        return Frame(type=type_, seq=self.seq, tick=tick, src=self.agent_id,
                     dst=dst, payload=payload)

    def send(self, type_: str, dst: str, payload: dict, tick: int):
        self.outbox.append(self._frame(type_, dst, payload, tick))

    def move(self, verb: str, target: Optional[Tuple[float, float]] = None,
             heading: Optional[float] = None):
        self.moves.append(MoveCommand(agent_id=self.agent_id, verb=verb,
                                      target=target, heading=heading))

    def drain_output(self) -> Tuple[List[Frame], List[MoveCommand]]:
        frames, self.outbox = self.outbox, []
        moves, self.moves = self.moves, []
        return frames, moves

    def step(self, world: WorldState, tick: int):
        raise NotImplementedError


def _arrived(pose: Pose2D, target: Tuple[float, float],
             tol: float = 1e-6) -> bool:
    return math.hypot(pose.x - target[0], pose.y - target[1]) <= tol


class QuadrupedController(Controller):
    """Executes M1 traces, M2 waypoint routes and the M3 search/grasp/deliver
    sequence on command from the hub."""

    def __init__(self, agent_id: str, descriptor_payload: dict,
                 detection_threshold: float = DETECTION_THRESHOLD,
                 search_motion: str = "rotate"):
        super().__init__(agent_id, descriptor_payload)
        self.threshold = detection_threshold
        self.search_motion = search_motion
        self.mission_id: Optional[str] = None
        self.mission_type: Optional[str] = None
        self.phase = "idle"
        self.script: List[str] = []
        self.square: List[Tuple[float, float]] = []
        self.square_idx = 0
        self.corners_hit: List[List[float]] = []
        self.arm_points: List[Tuple[float, float]] = []
        self.arm_idx = 0
        self.arm_batch: List[List[float]] = []
        self.waypoints: List[Tuple[float, float]] = []
        self.wp_idx = 0
        self.awaiting_proceed = False
        self.path: List[Tuple[float, float]] = []
        self.target_object: Optional[str] = None
        self.partner_id: Optional[str] = None
        self.place_point: Optional[Tuple[float, float]] = None
        self.rotate_steps = 0
        self.serpentine: List[Tuple[float, float]] = []
        self.serp_idx = 0
        self.grasp_world: Optional[WorldState] = None

    # -- command handling ------------------------------------------------------

    def _handle_inbox(self, world: WorldState, tick: int):
        for frame in self.inbox:
            if frame.type != "COMMAND":
                continue
            verb = frame.payload.get("verb")
            if verb == "mission_assign":
                self._assign(frame.payload, world, tick)
            elif verb == "proceed":
                self.awaiting_proceed = False
        self.inbox = []

    def _assign(self, payload: dict, world: WorldState, tick: int):
        self.mission_id = payload["mission_id"]
        self.mission_type = payload["mission_type"]
        roles = payload.get("roles", {})
        self.partner_id = roles.get("beneficiary")
        pose = world.agent(self.agent_id).pose
        if self.mission_type == "M1":
            self.script = ["motors_on", "stood", "arm_unstowed",
                           "trace_started"]
            self.phase = "m1_script"
            self.square = trace_square(pose, 1.0)
            self.square_idx = 0
            self.corners_hit = []
            self.arm_points = trace_circle((0.0, 0.0), 1.0, ARM_TRACE_SAMPLES)
            self.arm_idx = 0
            self.arm_batch = []
        elif self.mission_type == "M2":
            self.waypoints = [tuple(w) for w in payload.get("waypoints", [])]
            self.wp_idx = 0
            self.awaiting_proceed = False
            self.phase = "m2_start"
        elif self.mission_type == "M3":
            self.phase = "m3_search_box"
            self.rotate_steps = 0
            self._build_serpentine(world, pose)
            self.serp_idx = 0

    def _build_serpentine(self, world: WorldState, pose: Pose2D):
        # Coarse lawnmower rows over the world bounds; walked only when
        # rotating in place finds nothing.
        b = world.bounds
        rows = []
        y = b.ymin + 2.0
        left_to_right = True
        while y < b.ymax:
            xs = (b.xmin + 2.0, b.xmax - 2.0)
            if not left_to_right:
                xs = (xs[1], xs[0])
            rows.append((xs[0], y))
            rows.append((xs[1], y))
            left_to_right = not left_to_right
            y += 4.0
        self.serpentine = rows

    # -- mission events --------------------------------------------------------

    def _status(self, event: str, tick: int, **extra):
        payload = {"mission_id": self.mission_id, "event": event}
        payload.update(extra)
        self.send("MISSION_STATUS", "hub", payload, tick)

    def _scan(self, world: WorldState, target_class: str,
              tick: int) -> Optional[Detection]:
        """Check every camera; best qualifying detection or None."""
        best: Optional[Detection] = None
        cams = world.agent(self.agent_id).descriptor.cameras
        for cam in cams:
            for det in perceive(world, self.agent_id, cam.camera_id):
                if det.target_class != target_class:
                    continue
                if det.confidence < self.threshold:
                    continue
                if (best is None or det.confidence > best.confidence
                        or (det.confidence == best.confidence
                            and det.range < best.range)):
                    best = det
        return best

    def _search_step(self, world: WorldState):
        """Rotate in place by pi/4 after all cameras fail; after a full
        rotation optionally walk a lawnmower row and rotate again."""
        pose = world.agent(self.agent_id).pose
        if self.rotate_steps < 8:
            self.rotate_steps += 1
            self.move("turn", heading=pose.heading + SCAN_ROTATE_STEP)
            return
        if self.search_motion != "lawnmower" or not self.serpentine:
            self.rotate_steps = 0
            return
        target = self.serpentine[self.serp_idx % len(self.serpentine)]
        if _arrived(pose, target, tol=0.05):
            self.serp_idx += 1
            self.rotate_steps = 0
        else:
            self.move("goto", target=target)

    def step(self, world: WorldState, tick: int):
        self._handle_inbox(world, tick)
        body = world.agent(self.agent_id)
        pose = body.pose

        if tick % TELEMETRY_INTERVAL == 0:
            payload = {"pose": to_plain(pose), "battery": body.battery.level,
                       "phase": self.phase}
            if self.arm_batch:
                payload["arm_center"] = [0.0, 0.0]
                payload["arm_trace"] = self.arm_batch
                self.arm_batch = []
            self.send("TELEMETRY", "hub", payload, tick)

        if self.phase == "idle":
            return

        if body.battery.immobilized() and self.phase not in ("idle",):
            self._status("fault", tick, cause="immobilized")
            self.phase = "idle"
            return

        if self.phase == "m1_script":
            event = self.script.pop(0)
            self._status(event, tick)
            if not self.script:
                self.phase = "m1_trace"
            return

        if self.phase == "m1_trace":
            # Arm circle sample and body square walking run concurrently.
            if self.arm_idx < len(self.arm_points):
                self.arm_batch.append(list(self.arm_points[self.arm_idx]))
                self.arm_idx += 1
            if self.square_idx < len(self.square):
                corner = self.square[self.square_idx]
                if _arrived(pose, corner):
                    self.corners_hit.append([pose.x, pose.y])
                    self.square_idx += 1
                else:
                    self.move("goto", target=corner)
            if (self.arm_idx >= len(self.arm_points)
                    and self.square_idx >= len(self.square)):
                if self.arm_batch:
                    self.send("TELEMETRY", "hub",
                              {"pose": to_plain(pose),
                               "arm_center": [0.0, 0.0],
                               "arm_trace": self.arm_batch}, tick)
                    self.arm_batch = []
                self._status("trace_complete", tick,
                             corners=self.corners_hit,
                             square=[list(c) for c in self.square])
                self.phase = "idle"
            return

        if self.phase == "m2_start":
            self._status("start", tick)
            self.phase = "m2_route"
            return

        if self.phase == "m2_route":
            if self.awaiting_proceed:
                return
            if self.wp_idx >= len(self.waypoints):
                self._status("route_complete", tick)
                self.phase = "idle"
                return
            wp = self.waypoints[self.wp_idx]
            if _arrived(pose, wp):
                self._status("checkpoint_reached", tick, checkpoint=self.wp_idx,
                             position=[pose.x, pose.y])
                self.awaiting_proceed = True
                self.wp_idx += 1
            else:
                self.move("goto", target=wp)
            return

        if self.phase == "m3_search_box":
            det = self._scan(world, "battery_box", tick)
            if det is not None:
                self.send("DETECTION", "hub", to_plain(det), tick)
                self._status("battery_detected", tick,
                             target_id=det.target_id,
                             confidence=det.confidence)
                self.target_object = det.target_id
                self.phase = "m3_approach_box"
                return
            self._search_step(world)
            return

        if self.phase == "m3_approach_box":
            obj = world.objects[self.target_object]
            dist = pose.distance_to(obj.pose)
            if dist <= APPROACH_STANDOFF:
                self._status("reached_box", tick)
                self.phase = "m3_grasp"
                return
            self._goto_via_path(world, pose, (obj.pose.x, obj.pose.y))
            return

        if self.phase == "m3_grasp":
            ok = worldmod.grasp(world, self.agent_id, self.target_object)
            if ok:
                self._status("grasp_success", tick)
                self.phase = "m3_search_partner"
                self.rotate_steps = 0
            else:
                self._status("grasp_fail", tick)
            return

        if self.phase == "m3_search_partner":
            det = self._scan(world, "wheeled_platform", tick)
            if det is not None and det.target_id == self.partner_id:
                self.send("DETECTION", "hub", to_plain(det), tick)
                self._status("partner_detected", tick,
                             target_id=det.target_id,
                             confidence=det.confidence)
                partner = world.agent(self.partner_id).pose
                self.place_point = (
                    partner.x + PLACE_DISTANCE * math.cos(partner.heading),
                    partner.y + PLACE_DISTANCE * math.sin(partner.heading))
                self.phase = "m3_approach_partner"
                return
            self._search_step(world)
            return

        if self.phase == "m3_approach_partner":
            if _arrived(pose, self.place_point, tol=1e-6):
                self._status("reached_partner", tick)
                self.phase = "m3_place"
                return
            self._goto_via_path(world, pose, self.place_point)
            return

        if self.phase == "m3_place":
            worldmod.release(world, self.agent_id, at=self.place_point)
            self._status("placed", tick,
                         position=list(self.place_point),
                         partner=self.partner_id)
            self.phase = "idle"
            return

    def _goto_via_path(self, world: WorldState, pose: Pose2D,
                       goal: Tuple[float, float]):
        # Replanned every tick; cheap at this scale and self-correcting.
        path = plan_path(world, pose, goal)
        while path and _arrived(pose, path[0], tol=1e-6):
            path.pop(0)
        if path:
            self.move("goto", target=path[0])


class WheeledController(Controller):
    """Battery lifecycle: single-shot low-battery alert, immobilization,
    and resumption after a swap."""

    def __init__(self, agent_id: str, descriptor_payload: dict):
        super().__init__(agent_id, descriptor_payload)
        self.alerted = False
        self.prev_level: Optional[float] = None

    def step(self, world: WorldState, tick: int):
        self.inbox = []
        body = world.agent(self.agent_id)
        bat = body.battery
        if (not self.alerted and self.prev_level is not None
                and self.prev_level > bat.alert_threshold >= bat.level):
            self.alerted = True
            self.send("ALERT", "hub",
                      {"alert": "battery_low", "level": bat.level,
                       "threshold": bat.alert_threshold}, tick)
        if self.alerted and bat.level > bat.alert_threshold:
            self.alerted = False  # swapped; re-arm for the next depletion
        self.prev_level = bat.level
        if tick % TELEMETRY_INTERVAL == 0:
            self.send("TELEMETRY", "hub",
                      {"pose": to_plain(body.pose),
                       "battery": bat.level,
                       "immobilized": bat.immobilized()}, tick)


class AerialController(Controller):
    """Operator-steered: follows a target or holds, and answers
    corroboration requests by geometric visibility."""

    def __init__(self, agent_id: str, descriptor_payload: dict):
        super().__init__(agent_id, descriptor_payload)
        self.follow_target: Optional[str] = None
        self.pending_verdicts: List[dict] = []

    def step(self, world: WorldState, tick: int):
        for frame in self.inbox:
            if frame.type == "COMMAND":
                verb = frame.payload.get("verb")
                if verb == "follow":
                    self.follow_target = frame.payload.get("target")
                elif verb == "hold":
                    self.follow_target = None
            elif frame.type == "CORR_REQUEST":
                self.pending_verdicts.append(frame.payload)
        self.inbox = []

        body = world.agent(self.agent_id)
        if self.follow_target and self.follow_target in world.agents:
            target = world.agents[self.follow_target].pose
            if body.pose.distance_to(target) > FOLLOW_DISTANCE:
                self.move("goto", target=(target.x, target.y))
            else:
                self.move("turn",
                          heading=body.pose.bearing_to(target))

        for req in self.pending_verdicts:
            subject = req.get("subject_agent")
            ok = False
            if subject and subject in world.agents:
                ok = any(visible(world, self.agent_id, cam.camera_id, subject)
                         for cam in body.descriptor.cameras)
            self.send("CORR_VERDICT", "hub",
                      {"request_id": req["request_id"],
                       "verdict": "confirmed" if ok else "denied"}, tick)
        self.pending_verdicts = []

        if tick % TELEMETRY_INTERVAL == 0:
            self.send("TELEMETRY", "hub",
                      {"pose": to_plain(body.pose),
                       "following": self.follow_target}, tick)


class FixedCameraController(Controller):
    """Static sensor: reports qualifying detections and auto-corroborates
    checkpoint requests by visibility."""

    SCAN_INTERVAL = 10
    HEARTBEAT_INTERVAL = 50

    def __init__(self, agent_id: str, descriptor_payload: dict,
                 detection_threshold: float = DETECTION_THRESHOLD):
        super().__init__(agent_id, descriptor_payload)
        self.threshold = detection_threshold

    def step(self, world: WorldState, tick: int):
        requests = [f.payload for f in self.inbox if f.type == "CORR_REQUEST"]
        self.inbox = []
        body = world.agent(self.agent_id)

        for req in requests:
            subject = req.get("subject_agent")
            ok = False
            if subject and subject in world.agents:
                ok = any(visible(world, self.agent_id, cam.camera_id, subject)
                         for cam in body.descriptor.cameras)
            self.send("CORR_VERDICT", "hub",
                      {"request_id": req["request_id"],
                       "verdict": "confirmed" if ok else "denied"}, tick)

        if tick % self.SCAN_INTERVAL == 0:
            for cam in body.descriptor.cameras:
                for det in perceive(world, self.agent_id, cam.camera_id):
                    if det.confidence >= self.threshold:
                        self.send("DETECTION", "hub", to_plain(det), tick)
        if tick % self.HEARTBEAT_INTERVAL == 0:
            self.send("TELEMETRY", "hub", {"pose": to_plain(body.pose)}, tick)


class ScriptedOperator(Controller):
    """Headless stand-in for the console: triggers scheduled missions,
    approves collaboration proposals, confirms corroborations addressed to
    the operator, and steers the aerial platform."""

    APPROVAL_RETRY = 25
    VERDICT_DELAY = 2

    def __init__(self, agent_id: str, schedule: List[dict],
                 aerial_id: Optional[str], approve_proposals: bool = True):
        super().__init__(agent_id, {"agent_id": agent_id, "kind": "operator"})
        self.schedule = list(schedule)
        self.aerial_id = aerial_id
        self.approve_proposals = approve_proposals
        self.mission_states: Dict[str, dict] = {}
        self.pending_proposal: Optional[dict] = None
        self.last_approval_try = -10**9
        self.last_trigger_try = -10**9
        self.pending_requests: List[Tuple[int, dict]] = []
        self.followed_for: set = set()
        self.triggered_waiting: Optional[str] = None

    def _active_missions(self) -> List[dict]:
        return [m for m in self.mission_states.values()
                if m["state"] not in ("Completed", "Unverified", "Aborted")]

    def step(self, world: WorldState, tick: int):
        for frame in self.inbox:
            if frame.type == "MISSION_STATUS":
                p = frame.payload
                self.mission_states[p["mission_id"]] = p
                if (self.triggered_waiting
                        and p["mission_type"] == self.triggered_waiting):
                    self.triggered_waiting = None
                    if (self.schedule and self.schedule[0]["mission_type"]
                            == p["mission_type"]):
                        self.schedule.pop(0)
                if (self.pending_proposal
                        and p["mission_type"] == "M3"
                        and self.pending_proposal["beneficiary"]
                        in p.get("participants", [])):
                    self.pending_proposal = None
            elif frame.type == "EVENT":
                p = frame.payload
                if (p.get("event") == "collaboration_proposal"
                        and p.get("feasible") and self.approve_proposals):
                    self.pending_proposal = p
            elif frame.type == "CORR_REQUEST":
                if frame.dst in ("operator", self.agent_id, "*"):
                    self.pending_requests.append((tick, frame.payload))
            elif frame.type == "ERROR":
                # trigger rejections surface here; retries are time-based
                pass
        self.inbox = []

        # Scheduled missions, one at a time, in order. The head entry stays
        # queued (and is retried) until its MISSION_STATUS confirms it.
        if self.schedule and not self._active_missions():
            entry = self.schedule[0]
            due = tick >= entry.get("at_tick", 0)
            retry_ok = tick - self.last_trigger_try >= self.APPROVAL_RETRY
            if due and (self.triggered_waiting is None or retry_ok):
                payload = {"mission_type": entry["mission_type"]}
                if "waypoints" in entry:
                    payload["waypoints"] = entry["waypoints"]
                self.send("MISSION_TRIGGER", "hub", payload, tick)
                self.triggered_waiting = entry["mission_type"]
                self.last_trigger_try = tick
                self.last_approval_try = tick  # back off approvals briefly

        # Collaboration proposal approval (retried while the executor is busy).
        if (self.pending_proposal
                and tick - self.last_approval_try >= self.APPROVAL_RETRY):
            self.last_approval_try = tick
            self.send("MISSION_TRIGGER", "hub",
                      {"mission_type": "M3",
                       "beneficiary": self.pending_proposal["beneficiary"],
                       "approval_of": self.pending_proposal["proposal_id"]},
                      tick)

        # Corroboration verdicts after a short review delay.
        still_pending = []
        for arrived, req in self.pending_requests:
            if tick - arrived >= self.VERDICT_DELAY:
                self.send("CORR_VERDICT", "hub",
                          {"request_id": req["request_id"],
                           "verdict": "confirmed"}, tick)
            else:
                still_pending.append((arrived, req))
        self.pending_requests = still_pending

        # Steer the aerial platform to follow the executor of any active
        # mission it corroborates.
        if self.aerial_id:
            for m in self._active_missions():
                key = m["mission_id"]
                executor = m.get("executor")
                if key in self.followed_for or not executor:
                    continue
                self.followed_for.add(key)
                self.send("COMMAND", self.aerial_id,
                          {"verb": "follow", "target": executor}, tick)
