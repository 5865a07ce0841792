"""Mission governance: state machines for M1/M2/M3, corroboration
request/verdict lifecycle, battery-alert collaboration proposals, and
resilience reporting computed from logs.

Transition graphs are plain data so they stay inspectable and overridable
from the scenario file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .model import (
    C3Event,
    CorroborationRequest,
    CorroborationVerdict,
    MissionInstance,
    classify_interaction,
)

TERMINAL_STATES = ("Completed", "Unverified", "Aborted")

GRASP_RETRY_CAP = 3
SEARCH_TIMEOUT_TICKS = 1200
CORROBORATION_DEADLINE_TICKS = 300

# (state, event) -> next state. Any undefined pair aborts the mission with a
# protocol-violation cause.
M1_GRAPH: Dict[Tuple[str, str], str] = {
    ("Triggered", "motors_on"): "MotorsOn",
    ("MotorsOn", "stood"): "Standing",
    ("Standing", "arm_unstowed"): "ArmUnstowed",
    ("ArmUnstowed", "trace_started"): "ConcurrentTrace",
    ("ConcurrentTrace", "trace_complete"): "AwaitCorroboration",
    ("ConcurrentTrace", "fault"): "Aborted",
    ("AwaitCorroboration", "confirmed"): "Completed",
    ("AwaitCorroboration", "denied"): "Aborted",
    ("AwaitCorroboration", "timeout"): "Unverified",
}

M2_GRAPH: Dict[Tuple[str, str], str] = {
    ("Triggered", "start"): "EnRoute",
    ("EnRoute", "checkpoint_reached"): "AtCheckpoint",
    ("EnRoute", "route_complete"): "AwaitFinalCorroboration",
    ("EnRoute", "fault"): "Aborted",
    ("AtCheckpoint", "checkpoint_confirmed"): "EnRoute",
    ("AtCheckpoint", "checkpoint_denied"): "Aborted",
    ("AtCheckpoint", "timeout"): "Unverified",
    ("AwaitFinalCorroboration", "confirmed"): "Completed",
    ("AwaitFinalCorroboration", "denied"): "Aborted",
    ("AwaitFinalCorroboration", "timeout"): "Unverified",
}

M3_GRAPH: Dict[Tuple[str, str], str] = {
    ("Triggered", "alert_received"): "AlertReceived",
    ("AlertReceived", "approval_requested"): "AwaitHITLApproval",
    ("AwaitHITLApproval", "approved"): "SearchBattery",
    ("AwaitHITLApproval", "denied"): "Aborted",
    ("SearchBattery", "battery_detected"): "ApproachBox",
    ("SearchBattery", "search_timeout"): "Aborted",
    ("ApproachBox", "reached_box"): "Grasp",
    ("ApproachBox", "box_lost"): "SearchBattery",
    ("Grasp", "grasp_success"): "SearchPartner",
    ("Grasp", "grasp_fail"): "Grasp",
    ("Grasp", "retries_exhausted"): "Aborted",
    ("SearchPartner", "partner_detected"): "ApproachPartner",
    ("SearchPartner", "search_timeout"): "Aborted",
    ("ApproachPartner", "reached_partner"): "Place",
    ("ApproachPartner", "partner_lost"): "SearchPartner",
    ("Place", "placed"): "SwapInProgress",
    ("SwapInProgress", "swap_complete"): "Completed",
    ("SwapInProgress", "fault"): "Aborted",
}


@dataclass
class MissionDefinition:
    mission_type: str
    graph: Dict[Tuple[str, str], str]
    roles: Dict[str, str] = field(default_factory=dict)
    # per awaiting-state timeout in ticks
    timeouts: Dict[str, int] = field(default_factory=dict)

    def states(self) -> set:
        out = set(TERMINAL_STATES)
        for (s, _), t in self.graph.items():
            out.add(s)
            out.add(t)
        return out


def default_definitions() -> Dict[str, MissionDefinition]:
    return {
        "M1": MissionDefinition(
            "M1", dict(M1_GRAPH),
            timeouts={"AwaitCorroboration": CORROBORATION_DEADLINE_TICKS}),
        "M2": MissionDefinition(
            "M2", dict(M2_GRAPH),
            timeouts={"AtCheckpoint": CORROBORATION_DEADLINE_TICKS,
                      "AwaitFinalCorroboration": CORROBORATION_DEADLINE_TICKS}),
        "M3": MissionDefinition(
            "M3", dict(M3_GRAPH),
            timeouts={"SearchBattery": SEARCH_TIMEOUT_TICKS,
                      "SearchPartner": SEARCH_TIMEOUT_TICKS}),
    }


class TriggerRejected(ValueError):
    pass


class GovernanceEngine:
    """Single-queue mission executive.

    Owns mission instances, the ordered interaction-event log, open
    corroboration requests and pending collaboration proposals. Never called
    concurrently; the hub serializes all access.
    """

    ROLE_REQUIREMENTS = {
        "M1": {"executor": "quadruped", "corroborator": "aerial"},
        "M2": {"executor": "quadruped", "corroborator": "aerial"},
        "M3": {"executor": "quadruped", "beneficiary": "wheeled"},
    }

    def __init__(self, definitions: Optional[Dict[str, MissionDefinition]] = None,
                 emit: Optional[Callable[[object], None]] = None,
                 auto_approve: bool = False):
        self.definitions = definitions or default_definitions()
        self.missions: Dict[str, MissionInstance] = {}
        self.requests: Dict[str, CorroborationRequest] = {}
        self.verdicts: Dict[str, List[CorroborationVerdict]] = {}
        self.proposals: Dict[str, dict] = {}   # beneficiary -> proposal
        self.grasp_failures: Dict[str, int] = {}
        self.mission_roles: Dict[str, Dict[str, str]] = {}
        self._mission_counter = 0
        self._request_counter = 0
        self._event_id = 0
        self._emit = emit or (lambda record: None)
        self.auto_approve = auto_approve
        self.registry: Dict[str, str] = {}  # agent_id -> kind

    # -- registry ------------------------------------------------------------

    def register(self, agent_id: str, kind: str):
        self.registry[agent_id] = kind

    def unregister(self, agent_id: str):
        self.registry.pop(agent_id, None)

    def _find_agent(self, kind: str, busy: set) -> Optional[str]:
        for aid in sorted(self.registry):
            if self.registry[aid] == kind and aid not in busy:
                return aid
        return None

    def _busy_executors(self) -> set:
        busy = set()
        for m in self.missions.values():
            if m.state not in TERMINAL_STATES:
                roles = self.mission_roles.get(m.mission_id, {})
                if "executor" in roles:
                    busy.add(roles["executor"])
        return busy

    # -- events --------------------------------------------------------------

    def log_interaction(self, pattern: str, initiator: str, responder: str,
                        tick: int, mission: Optional[str] = None,
                        detail: Optional[dict] = None) -> C3Event:
        kind = classify_interaction(self.registry.get(initiator, "operator"),
                                    self.registry.get(responder, "operator"),
                                    pattern)
        self._event_id += 1
        ev = C3Event(event_id=self._event_id, kind=kind, initiator=initiator,
                     responder=responder, tick=tick, mission=mission,
                     detail=detail or {})
        self._emit(ev)
        return ev

    # -- mission lifecycle ---------------------------------------------------

    def trigger_mission(self, mission_type: str, params: dict,
                        initiated_by: str, tick: int) -> MissionInstance:
        if mission_type not in self.definitions:
            raise TriggerRejected("unknown mission type %r" % (mission_type,))
        needed = self.ROLE_REQUIREMENTS[mission_type]
        busy = self._busy_executors()
        roles: Dict[str, str] = {}
        for role, kind in needed.items():
            chosen = params.get(role) or self._find_agent(
                kind, busy if role == "executor" else set())
            if chosen is None or self.registry.get(chosen) != kind:
                raise TriggerRejected("missing %s (%s) for %s"
                                      % (role, kind, mission_type))
            roles[role] = chosen
        if roles.get("executor") in busy:
            raise TriggerRejected("executor %r busy" % (roles["executor"],))

        self._mission_counter += 1
        mission_id = "%s-%03d" % (mission_type, self._mission_counter)
        inst = MissionInstance(mission_id=mission_id,
                               mission_type=mission_type,
                               state="Triggered",
                               participants=sorted(set(roles.values())))
        inst.record(tick, "Triggered", "triggered by %s" % initiated_by)
        self.missions[mission_id] = inst
        self.mission_roles[mission_id] = roles
        return inst

    def advance(self, mission_id: str, event: str, tick: int,
                cause: str = "") -> MissionInstance:
        inst = self.missions[mission_id]
        if inst.state in TERMINAL_STATES:
            raise ValueError("mission %s already terminal" % mission_id)
        graph = self.definitions[inst.mission_type].graph
        key = (inst.state, event)
        if key not in graph:
            inst.record(tick, "Aborted",
                        "protocol violation: event %r undefined in state %r"
                        % (event, inst.state))
            return inst
        if inst.mission_type == "M3" and event == "grasp_fail":
            n = self.grasp_failures.get(mission_id, 0) + 1
            self.grasp_failures[mission_id] = n
            if n >= GRASP_RETRY_CAP:
                inst.record(tick, "Aborted",
                            "grasp retries exhausted (%d)" % n)
                return inst
        inst.record(tick, graph[key], cause or event)
        return inst

    def state_age(self, inst: MissionInstance, tick: int) -> int:
        entered = inst.history[-1][0] if inst.history else tick
        return tick - entered

    def check_timeouts(self, tick: int) -> List[MissionInstance]:
        """Resolve awaiting states whose deadline passed."""
        expired = []
        for inst in self.missions.values():
            if inst.state in TERMINAL_STATES:
                continue
            timeouts = self.definitions[inst.mission_type].timeouts
            limit = timeouts.get(inst.state)
            if limit is not None and self.state_age(inst, tick) > limit:
                event = ("search_timeout" if inst.state.startswith("Search")
                         else "timeout")
                self.advance(inst.mission_id, event, tick,
                             "deadline passed in %s" % inst.state)
                expired.append(inst)
        return expired

    # -- corroboration -------------------------------------------------------

    def request_corroboration(self, mission_id: str, subject: str,
                              corroborators: List[str], tick: int,
                              deadline_ticks: int = CORROBORATION_DEADLINE_TICKS,
                              ) -> CorroborationRequest:
        if not corroborators:
            raise ValueError("empty corroborator set")
        for c in corroborators:
            if c != "operator" and c not in self.registry:
                raise ValueError("corroborator %r not registered" % (c,))
        self._request_counter += 1
        req = CorroborationRequest(
            request_id="corr-%04d" % self._request_counter,
            mission_id=mission_id,
            subject=subject,
            corroborators=tuple(corroborators),
            deadline_tick=tick + deadline_ticks)
        self.requests[req.request_id] = req
        self.verdicts[req.request_id] = []
        return req

    def submit_verdict(self, verdict: CorroborationVerdict,
                       ) -> Optional[CorroborationRequest]:
        req = self.requests.get(verdict.request_id)
        if req is None:
            raise ValueError("verdict for unknown request %r"
                             % (verdict.request_id,))
        if verdict.verifier not in req.corroborators:
            raise ValueError("%r is not a corroborator of %s"
                             % (verdict.verifier, req.request_id))
        if verdict.tick > req.deadline_tick:
            return None  # dropped; the awaiting state resolves by timeout
        seen = self.verdicts[req.request_id]
        if any(v.verifier == verdict.verifier for v in seen):
            return None  # at most one verdict per (request, verifier)
        seen.append(verdict)
        self.log_interaction("independent_verification", verdict.verifier,
                             self.mission_roles.get(req.mission_id, {})
                             .get("executor", "hub"),
                             verdict.tick, mission=req.mission_id,
                             detail={"request_id": req.request_id,
                                     "subject": req.subject,
                                     "verdict": verdict.verdict})
        return req

    def request_resolution(self, request_id: str) -> Optional[str]:
        """confirmed once every corroborator confirmed; denied on any denial."""
        req = self.requests[request_id]
        got = self.verdicts[request_id]
        if any(v.verdict == "denied" for v in got):
            return "denied"
        if len(got) == len(req.corroborators):
            return "confirmed"
        return None

    # -- collaboration proposals ----------------------------------------------

    def handle_alert(self, agent_id: str, tick: int) -> Optional[dict]:
        """Battery alert -> proposal to trigger M3 for the alerting agent."""
        if agent_id not in self.registry:
            raise ValueError("alert from unregistered agent %r" % (agent_id,))
        for m in self.missions.values():
            if (m.mission_type == "M3" and m.state not in TERMINAL_STATES
                    and agent_id in m.participants):
                return None  # already being helped
        if agent_id in self.proposals:
            return None  # deduplicate
        helper = self._find_agent("quadruped", set())
        proposal = {
            "proposal_id": "prop-%s-%d" % (agent_id, tick),
            "mission_type": "M3",
            "beneficiary": agent_id,
            "helper": helper,
            "feasible": helper is not None,
            "tick": tick,
        }
        self.proposals[agent_id] = proposal
        return proposal

    def resolve_proposal(self, beneficiary: str):
        self.proposals.pop(beneficiary, None)


# --- resilience reporting ----------------------------------------------------

@dataclass
class ResilienceReport:
    terminal_counts: Dict[str, int]
    downtime_ticks: int
    time_to_assist: Optional[int]
    interaction_counts: Dict[str, int]
    total_ticks: int

    def to_plain(self) -> dict:
        return {
            "terminal_counts": dict(sorted(self.terminal_counts.items())),
            "downtime_ticks": self.downtime_ticks,
            "time_to_assist": self.time_to_assist,
            "interaction_counts": dict(sorted(self.interaction_counts.items())),
            "total_ticks": self.total_ticks,
        }


class ReportError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__("log record %d: %s" % (offset, message))
        self.offset = offset


def resilience_report(lines: List[bytes]) -> ResilienceReport:
    """Pure function of a canonical event stream (JSONL lines).

    Downtime counts ticks any battery-capable beneficiary spent immobilized,
    derived from immobilized/resumed telemetry markers; time-to-assist is the
    span from the first battery alert to the first box placement.
    """
    terminal: Dict[str, int] = {s: 0 for s in TERMINAL_STATES}
    kinds = {"cooperation": 0, "collaboration": 0, "corroboration": 0}
    alert_tick: Optional[int] = None
    placed_tick: Optional[int] = None
    immobilized_since: Dict[str, int] = {}
    downtime = 0
    max_tick = 0

    for i, raw in enumerate(lines):
        try:
            rec = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ReportError(i, "malformed record: %s" % e) from None
        if not isinstance(rec, dict):
            raise ReportError(i, "record is not an object")
        tick = rec.get("tick", 0)
        max_tick = max(max_tick, tick)

        if "kind" in rec and "event_id" in rec:       # interaction event
            if rec["kind"] not in kinds:
                raise ReportError(i, "unknown interaction kind %r"
                                  % (rec["kind"],))
            kinds[rec["kind"]] += 1
            continue
        ftype = rec.get("type")
        payload = rec.get("payload", {})
        if ftype == "ALERT" and alert_tick is None:
            alert_tick = tick
        elif ftype == "MISSION_STATUS":
            state = payload.get("state")
            if state in terminal:
                terminal[state] += 1
            if payload.get("event") == "placed" and placed_tick is None:
                placed_tick = tick
        elif ftype == "TELEMETRY":
            src = rec.get("src", "")
            if payload.get("immobilized") and src not in immobilized_since:
                immobilized_since[src] = tick
            elif payload.get("immobilized") is False and src in immobilized_since:
                downtime += tick - immobilized_since.pop(src)

    for src, since in immobilized_since.items():
        downtime += max_tick - since

    tta = None
    if alert_tick is not None and placed_tick is not None:
        tta = placed_tick - alert_tick
    return ResilienceReport(
        terminal_counts=terminal,
        downtime_ticks=downtime,
        time_to_assist=tta,
        interaction_counts=kinds,
        total_ticks=max_tick,
    )
