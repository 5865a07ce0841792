"""Deterministic in-process runner.

All agents run as controllers stepped in ascending agent_id order; frames
produced in a tick are routed immediately and delivered to inboxes for the
next tick. The tick loop is the only world writer, so two runs from the
same scenario and seed produce bitwise-identical logs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from .behaviors import (
    AerialController,
    Controller,
    FixedCameraController,
    QuadrupedController,
    ScriptedOperator,
    WheeledController,
)
from .eventlog import EventLog
from .governance import TERMINAL_STATES, resilience_report
from .hub import Hub
from .protocol import Frame
from .scenario import Scenario
from .world import step as world_step

OPERATOR_ID = "operator"


@dataclass
class RunResult:
    exit_code: int
    ticks: int
    log: EventLog
    report: dict
    missions: List[dict]

    @property
    def log_hash(self) -> str:
        return self.log.digest()


def build_controllers(scenario: Scenario,
                      approve_proposals: bool = True) -> Dict[str, Controller]:
    controllers: Dict[str, Controller] = {}
    aerial_id = None
    for entry in scenario.agents:
        aid = entry["agent_id"]
        kind = entry["kind"]
        payload = scenario.descriptor_payload(entry)
        if kind == "quadruped":
            controllers[aid] = QuadrupedController(
                aid, payload,
                detection_threshold=scenario.detection_threshold,
                search_motion=scenario.search_motion)
        elif kind == "wheeled":
            controllers[aid] = WheeledController(aid, payload)
        elif kind == "aerial":
            controllers[aid] = AerialController(aid, payload)
            aerial_id = aid
        elif kind == "fixed_camera":
            controllers[aid] = FixedCameraController(
                aid, payload,
                detection_threshold=scenario.detection_threshold)
        else:
            raise ValueError("no controller for kind %r" % (kind,))
    controllers[OPERATOR_ID] = ScriptedOperator(
        OPERATOR_ID, scenario.schedule, aerial_id,
        approve_proposals=approve_proposals and scenario.m3_enabled)
    return controllers


def run_scenario(scenario: Scenario,
                 log_path: Optional[Path] = None,
                 max_ticks: Optional[int] = None,
                 auto_approve: Optional[bool] = None) -> RunResult:
    world = scenario.build_world()
    log = EventLog(log_path)
    auto = scenario.auto_approve if auto_approve is None else auto_approve

    controllers = build_controllers(
        scenario, approve_proposals=not auto)
    inboxes: Dict[str, List[Frame]] = {aid: [] for aid in controllers}

    def deliver(agent_id: str, frame: Frame):
        if agent_id in inboxes:
            inboxes[agent_id].append(frame)

    hub = Hub(world, log=log, auto_approve=auto and scenario.m3_enabled,
              detection_threshold=scenario.detection_threshold,
              deliver=deliver)

    # Connect everyone before the clock starts.
    for aid in sorted(controllers):
        hub.route(controllers[aid].hello_frame(0))

    limit = max_ticks if max_ticks is not None else scenario.max_ticks
    expected_missions = len(scenario.schedule)
    if scenario.m3_enabled and any(a.get("battery_capable")
                                   for a in scenario.agents):
        expected_missions += 1

    while world.tick < limit:
        hub.check_heartbeats()
        hub.check_timeouts()
        hub.retry_proposals()

        for aid in sorted(controllers):
            ctrl = controllers[aid]
            ctrl.inbox, inboxes[aid] = inboxes[aid], []
            ctrl.step(world, world.tick)

        moves = []
        for aid in sorted(controllers):
            frames, agent_moves = controllers[aid].drain_output()
            for frame in frames:
                hub.route(frame)
            moves.extend(agent_moves)

        for aid in sorted(controllers):
            ctrl = controllers[aid]
            if isinstance(ctrl, AerialController) and ctrl.follow_target:
                hub.note_cooperation(aid, ctrl.follow_target)

        result = world_step(world, moves)
        hub.process_world_events(result.events)

        if world.tick >= scenario.min_ticks and _quiesced(
                hub, controllers, expected_missions):
            break

    missions = [
        {"mission_id": m.mission_id, "mission_type": m.mission_type,
         "state": m.state, "history": [list(h) for h in m.history]}
        for _, m in sorted(hub.governance.missions.items())
    ]
    log.close()
    report = resilience_report(log.lines).to_plain()

    triggered = list(hub.governance.missions.values())
    if len(triggered) < expected_missions:
        exit_code = 1
    elif all(m.state == "Completed" for m in triggered):
        exit_code = 0
    else:
        exit_code = 1
    return RunResult(exit_code=exit_code, ticks=world.tick, log=log,
                     report=report, missions=missions)


def _quiesced(hub: Hub, controllers: Dict[str, Controller],
              expected_missions: int) -> bool:
    gov = hub.governance
    if expected_missions == 0:
        # observation-only run (e.g. an assistance-disabled baseline):
        # keep simulating until the tick limit
        return False
    if len(gov.missions) < expected_missions:
        return False
    if any(m.state not in TERMINAL_STATES for m in gov.missions.values()):
        return False
    if gov.proposals:
        return False
    if any(b.swap_ticks_left is not None
           for b in hub.world.agents.values()):
        return False
    op = controllers.get(OPERATOR_ID)
    if isinstance(op, ScriptedOperator) and op.schedule:
        return False
    return True
