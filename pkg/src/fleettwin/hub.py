"""The digital-twin hub: session registry, frame router, mission
orchestration glue and snapshot provider.

All state mutation happens on one logical queue; transports (in-process
deterministic bus or network sockets) only feed frames in and carry
deliveries out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from . import world as worldmod
from .eventlog import EventLog
from .governance import (
    CORROBORATION_DEADLINE_TICKS,
    GovernanceEngine,
    TERMINAL_STATES,
    TriggerRejected,
)
from .model import (
    CameraSpec,
    CorroborationVerdict,
    DETECTION_THRESHOLD,
    PlatformDescriptor,
    validate_platform,
)
from .protocol import Frame
from .world import WorldState

HEARTBEAT_TICKS = 600


@dataclass
class SessionRecord:
    agent_id: str
    descriptor: PlatformDescriptor
    connected_tick: int
    last_seq_in: int = 0
    last_seq_out: int = 0
    last_heard_tick: int = 0


def descriptor_from_payload(payload: dict) -> PlatformDescriptor:
    cams = tuple(CameraSpec(camera_id=c["camera_id"],
                            mount_bearing=c["mount_bearing"],
                            fov=c["fov"], max_range=c["max_range"])
                 for c in payload.get("cameras", ()))
    return PlatformDescriptor(
        agent_id=payload["agent_id"],
        kind=payload["kind"],
        cameras=cams,
        has_manipulator=payload.get("has_manipulator", False),
        battery_capable=payload.get("battery_capable", False),
        max_speed=payload.get("max_speed", 0.0),
    )


class Hub:
    """Routes frames, drives governance, owns the canonical log."""

    def __init__(self, world: WorldState, log: Optional[EventLog] = None,
                 auto_approve: bool = False,
                 detection_threshold: float = DETECTION_THRESHOLD,
                 deliver: Optional[Callable[[str, Frame], None]] = None):
        self.world = world
        self.log = log or EventLog()
        self.sessions: Dict[str, SessionRecord] = {}
        self.detection_threshold = detection_threshold
        self.governance = GovernanceEngine(emit=self.log.append,
                                           auto_approve=auto_approve)
        self._hub_seq = 0
        # deliver(agent_id, frame): transport callback; never raises back.
        self._deliver = deliver or (lambda aid, fr: None)
        self.last_telemetry: Dict[str, dict] = {}
        # missions where the aerial follow cooperation was already logged
        self._cooperation_logged: set = set()
        self._alert_proposal_logged: set = set()

    # -- outbound ------------------------------------------------------------

    def _send(self, dst: str, type_: str, payload: dict) -> Frame:
        self._hub_seq += 1
        frame = Frame(type=type_, seq=self._hub_seq, tick=self.world.tick,
                      src="hub", dst=dst, payload=payload)
        self.log.append(frame)
        if dst == "*":
            for aid in sorted(self.sessions):
                sess = self.sessions[aid]
                sess.last_seq_out = frame.seq
                self._deliver(aid, frame)
        elif dst in self.sessions:
            self.sessions[dst].last_seq_out = frame.seq
            self._deliver(dst, frame)
        return frame

    # -- registration --------------------------------------------------------

    def register_agent(self, hello: Frame) -> Frame:
        """Handle a HELLO; returns the WELCOME or ERROR frame sent back."""
        try:
            desc = descriptor_from_payload(hello.payload)
        except (KeyError, ValueError) as e:
            return self._reply_error(hello.src, "invalid descriptor: %s" % e)
        if desc.agent_id in self.sessions:
            return self._reply_error(desc.agent_id, "duplicate id",
                                     refuse=True)
        violations = validate_platform(desc, set(self.sessions))
        if violations:
            return self._reply_error(desc.agent_id,
                                     "; ".join(violations), refuse=True)
        sess = SessionRecord(agent_id=desc.agent_id, descriptor=desc,
                             connected_tick=self.world.tick,
                             last_seq_in=hello.seq,
                             last_heard_tick=self.world.tick)
        self.sessions[desc.agent_id] = sess
        self.governance.register(desc.agent_id, desc.kind)
        self.log.append(hello)
        welcome = self._send(desc.agent_id, "WELCOME", {
            "agent_id": desc.agent_id,
            "tick_dt": self.world.tick_dt,
            "detection_threshold": self.detection_threshold,
        })
        # Realize bidirectionality from the start: every agent gets a command.
        self._send(desc.agent_id, "COMMAND",
                   {"verb": "telemetry_start", "interval_ticks": 5})
        return welcome

    def _reply_error(self, dst: str, reason: str, refuse: bool = False) -> Frame:
        self._hub_seq += 1
        frame = Frame(type="ERROR", seq=self._hub_seq, tick=self.world.tick,
                      src="hub", dst=dst,
                      payload={"reason": reason, "refused": refuse})
        self.log.append(frame)
        self._deliver(dst, frame)
        return frame

    def close_session(self, agent_id: str, cause: str):
        if agent_id not in self.sessions:
            return
        del self.sessions[agent_id]
        self.governance.unregister(agent_id)
        for inst in self.governance.missions.values():
            if inst.state not in TERMINAL_STATES and agent_id in inst.participants:
                inst.record(self.world.tick, "Aborted",
                            "participant lost: %s (%s)" % (agent_id, cause))
                self._broadcast_status(inst, "participant_lost")

    def check_heartbeats(self):
        for aid in sorted(self.sessions):
            if (self.world.tick - self.sessions[aid].last_heard_tick
                    > HEARTBEAT_TICKS):
                self._reply_error(aid, "heartbeat expired")
                self.close_session(aid, "heartbeat expired")

    # -- routing -------------------------------------------------------------

    def route(self, frame: Frame) -> List[str]:
        """Route one inbound frame; returns the delivery set (agent ids)."""
        if frame.type == "HELLO":
            self.register_agent(frame)
            return [frame.src]
        sess = self.sessions.get(frame.src)
        if sess is None:
            self._reply_error(frame.src, "no session")
            return []
        if frame.seq != sess.last_seq_in + 1:
            self._reply_error(frame.src,
                              "sequence violation: expected %d got %d"
                              % (sess.last_seq_in + 1, frame.seq))
            self.close_session(frame.src, "sequence violation")
            return []
        sess.last_seq_in = frame.seq
        sess.last_heard_tick = self.world.tick
        self.log.append(frame)

        if frame.type == "BYE":
            self.close_session(frame.src, "bye")
            return []
        if frame.dst == "hub":
            self._dispatch(frame)
            return []
        if frame.dst == "*":
            delivered = []
            for aid in sorted(self.sessions):
                if aid != frame.src:
                    self._deliver(aid, frame)
                    delivered.append(aid)
            return delivered
        if frame.dst in self.sessions:
            self._deliver(frame.dst, frame)
            return [frame.dst]
        self._reply_error(frame.src, "unknown dst %r" % (frame.dst,))
        return []

    # -- hub-addressed frames -------------------------------------------------

    def _dispatch(self, frame: Frame):
        handler = getattr(self, "_on_" + frame.type.lower(), None)
        if handler is None:
            self._reply_error(frame.src, "unhandled type %s" % frame.type)
            return
        handler(frame)

    def _on_telemetry(self, frame: Frame):
        self.last_telemetry[frame.src] = dict(frame.payload, tick=frame.tick)

    def _on_detection(self, frame: Frame):
        pass  # logged; gates are evidenced by these lines

    def _on_event(self, frame: Frame):
        pass

    def _on_alert(self, frame: Frame):
        proposal = self.governance.handle_alert(frame.src, self.world.tick)
        if proposal is None:
            return
        self._send("*", "EVENT", {"event": "collaboration_proposal",
                                  **proposal})
        if self.governance.auto_approve and proposal["feasible"]:
            self._trigger("M3", {"beneficiary": proposal["beneficiary"],
                                 "approval_of": proposal["proposal_id"]},
                          "operator")

    def _on_mission_trigger(self, frame: Frame):
        payload = frame.payload
        self._trigger(payload.get("mission_type", ""), payload, frame.src)

    def _trigger(self, mission_type: str, payload: dict, initiated_by: str):
        params = {}
        if payload.get("beneficiary"):
            params["beneficiary"] = payload["beneficiary"]
        try:
            inst = self.governance.trigger_mission(
                mission_type, params, initiated_by, self.world.tick)
        except TriggerRejected as e:
            self._reply_error(initiated_by, "trigger rejected: %s" % e)
            return
        roles = self.governance.mission_roles[inst.mission_id]
        if payload.get("approval_of"):
            # HITL approval of an alert: the operator independently verified
            # the alerting platform's predicament before committing help.
            self.governance.resolve_proposal(roles.get("beneficiary", ""))
            self.governance.log_interaction(
                "independent_verification", initiated_by, roles["executor"],
                self.world.tick, mission=inst.mission_id,
                detail={"approved": payload["approval_of"]})
        if mission_type == "M3":
            self.governance.advance(inst.mission_id, "alert_received",
                                    self.world.tick)
            self.governance.advance(inst.mission_id, "approval_requested",
                                    self.world.tick)
            self.governance.advance(inst.mission_id, "approved",
                                    self.world.tick,
                                    "approved by %s" % initiated_by)
        self._broadcast_status(inst, "triggered")
        assign = {"verb": "mission_assign", "mission_id": inst.mission_id,
                  "mission_type": mission_type, "roles": roles}
        if mission_type == "M2":
            assign["waypoints"] = payload.get("waypoints", [])
        self._send(roles["executor"], "COMMAND", assign)

    def _on_mission_status(self, frame: Frame):
        """Mission event reported by a participant; drives the state machine."""
        payload = frame.payload
        mission_id = payload.get("mission_id", "")
        event = payload.get("event", "")
        inst = self.governance.missions.get(mission_id)
        if inst is None:
            self._reply_error(frame.src, "unknown mission %r" % (mission_id,))
            return
        if inst.state in TERMINAL_STATES:
            return
        before = inst.state
        self.governance.advance(mission_id, event, self.world.tick,
                                payload.get("cause", ""))
        self._after_transition(inst, before, event, payload)
        self._broadcast_status(inst, event)

    def _after_transition(self, inst, before: str, event: str, payload: dict):
        roles = self.governance.mission_roles[inst.mission_id]
        state = inst.state
        if state == "AwaitCorroboration" or state == "AwaitFinalCorroboration":
            corrs = [a for a in sorted(self.sessions)
                     if self.sessions[a].descriptor.kind == "aerial"]
            corrs.append("operator")
            self._open_request(inst, "%s:%s" % (inst.mission_type, before),
                               corrs, roles["executor"], payload)
        elif state == "AtCheckpoint":
            corrs = [a for a in sorted(self.sessions)
                     if self.sessions[a].descriptor.kind
                     in ("fixed_camera", "aerial")]
            if corrs:
                self._open_request(
                    inst, "checkpoint:%s" % payload.get("checkpoint", ""),
                    corrs, roles["executor"], payload)
        elif state == "SwapInProgress" and event == "placed":
            self.governance.log_interaction(
                "assistance_on_fault", roles["executor"],
                roles.get("beneficiary", "hub"), self.world.tick,
                mission=inst.mission_id,
                detail={"position": payload.get("position")})

    def _open_request(self, inst, subject: str, corroborators: List[str],
                      executor: str, payload: dict):
        req = self.governance.request_corroboration(
            inst.mission_id, subject, corroborators, self.world.tick)
        for c in corroborators:
            self._send(c, "CORR_REQUEST", {
                "request_id": req.request_id,
                "mission_id": inst.mission_id,
                "subject": subject,
                "subject_agent": executor,
                "deadline_tick": req.deadline_tick,
            })

    def _on_corr_verdict(self, frame: Frame):
        payload = frame.payload
        verdict = CorroborationVerdict(
            request_id=payload["request_id"],
            verifier=frame.src,
            verdict=payload["verdict"],
            tick=self.world.tick)
        try:
            req = self.governance.submit_verdict(verdict)
        except ValueError as e:
            self._reply_error(frame.src, str(e))
            return
        if req is None:
            return
        resolution = self.governance.request_resolution(req.request_id)
        if resolution is None:
            return
        inst = self.governance.missions.get(req.mission_id)
        if inst is None or inst.state in TERMINAL_STATES:
            return
        if inst.state == "AtCheckpoint":
            event = ("checkpoint_confirmed" if resolution == "confirmed"
                     else "checkpoint_denied")
        else:
            event = resolution
        before = inst.state
        self.governance.advance(req.mission_id, event, self.world.tick,
                                "corroboration %s" % resolution)
        self._broadcast_status(inst, event)
        if before == "AtCheckpoint" and inst.state == "EnRoute":
            roles = self.governance.mission_roles[inst.mission_id]
            self._send(roles["executor"], "COMMAND",
                       {"verb": "proceed", "mission_id": inst.mission_id})

    def _on_command(self, frame: Frame):
        # Operator commands addressed to the hub (e.g. steering relays) are
        # forwarded; currently only follow/hold for the aerial platform.
        target = frame.payload.get("target_agent")
        if target and target in self.sessions:
            self._send(target, "COMMAND", frame.payload)
        else:
            self._reply_error(frame.src, "no such target agent")

    # -- cooperation bookkeeping ----------------------------------------------

    def note_cooperation(self, follower: str, followed: str):
        """Log a joint-task cooperation once per (mission, follower)."""
        for inst in self.governance.missions.values():
            if inst.state in TERMINAL_STATES:
                continue
            roles = self.governance.mission_roles[inst.mission_id]
            if roles.get("executor") == followed:
                key = (inst.mission_id, follower)
                if key not in self._cooperation_logged:
                    self._cooperation_logged.add(key)
                    self.governance.log_interaction(
                        "joint_task_step", follower, followed,
                        self.world.tick, mission=inst.mission_id,
                        detail={"activity": "follow"})

    def _broadcast_status(self, inst, event: str):
        roles = self.governance.mission_roles.get(inst.mission_id, {})
        self._send("*", "MISSION_STATUS", {
            "mission_id": inst.mission_id,
            "mission_type": inst.mission_type,
            "state": inst.state,
            "event": event,
            "participants": list(inst.participants),
            "executor": roles.get("executor"),
        })

    # -- world events ---------------------------------------------------------

    def process_world_events(self, events: List[dict]):
        for ev in events:
            if ev["type"] == "swap_complete":
                for inst in self.governance.missions.values():
                    if (inst.mission_type == "M3"
                            and inst.state == "SwapInProgress"
                            and ev["agent"] in inst.participants):
                        self.governance.advance(inst.mission_id,
                                                "swap_complete",
                                                self.world.tick)
                        self._broadcast_status(inst, "swap_complete")
            elif ev["type"] == "swap_started":
                self._send("*", "EVENT", {"event": "swap_started",
                                          "agent": ev["agent"],
                                          "box": ev["box"]})

    def retry_proposals(self):
        """Re-attempt auto-approved collaboration proposals once the helper
        frees up (a trigger may have been rejected while it was busy)."""
        if not self.governance.auto_approve:
            return
        busy = self.governance._busy_executors()
        for beneficiary in sorted(self.governance.proposals):
            prop = self.governance.proposals[beneficiary]
            if prop["feasible"] and prop["helper"] not in busy:
                self._trigger("M3", {"beneficiary": beneficiary,
                                     "approval_of": prop["proposal_id"]},
                              "operator")

    def check_timeouts(self):
        for inst in self.governance.check_timeouts(self.world.tick):
            self._broadcast_status(inst, "timeout")

    # -- snapshot -------------------------------------------------------------

    def snapshot(self) -> dict:
        """Immutable, internally consistent view at the current tick boundary."""
        from .model import to_plain
        return {
            "tick": self.world.tick,
            "world": self.world.to_plain(),
            "missions": [
                {
                    "mission_id": m.mission_id,
                    "mission_type": m.mission_type,
                    "state": m.state,
                    "participants": list(m.participants),
                    "history": [list(h) for h in m.history],
                }
                for _, m in sorted(self.governance.missions.items())
            ],
            "sessions": [
                {
                    "agent_id": s.agent_id,
                    "kind": s.descriptor.kind,
                    "connected_tick": s.connected_tick,
                    "last_seq_in": s.last_seq_in,
                    "last_seq_out": s.last_seq_out,
                }
                for _, s in sorted(self.sessions.items())
            ],
            "proposals": [self.governance.proposals[k]
                          for k in sorted(self.governance.proposals)],
            "open_requests": [
                to_plain(r) for _, r in sorted(self.governance.requests.items())
                if self.governance.request_resolution(r.request_id) is None
                and r.deadline_tick >= self.world.tick
            ],
            "telemetry": {k: self.last_telemetry[k]
                          for k in sorted(self.last_telemetry)},
        }
