import itertools

import pytest

from fleettwin.governance import (
    CORROBORATION_DEADLINE_TICKS,
    GRASP_RETRY_CAP,
    GovernanceEngine,
    M1_GRAPH,
    M2_GRAPH,
    M3_GRAPH,
    ReportError,
    TERMINAL_STATES,
    TriggerRejected,
    default_definitions,
    resilience_report,
)
from fleettwin.model import CorroborationVerdict, canonical_serialize


def engine_with_fleet(emit=None):
    eng = GovernanceEngine(emit=emit)
    eng.register("spot", "quadruped")
    eng.register("tello", "aerial")
    eng.register("husky", "wheeled")
    eng.register("cam1", "fixed_camera")
    return eng


def drive(eng, mission_id, events, start_tick=1):
    inst = eng.missions[mission_id]
    for i, ev in enumerate(events):
        inst = eng.advance(mission_id, ev, start_tick + i)
    return inst


HAPPY_PATHS = {
    "M1": ["motors_on", "stood", "arm_unstowed", "trace_started",
           "trace_complete", "confirmed"],
    "M2": ["start", "checkpoint_reached", "checkpoint_confirmed",
           "route_complete", "confirmed"],
    "M3": ["alert_received", "approval_requested", "approved",
           "battery_detected", "reached_box", "grasp_success",
           "partner_detected", "reached_partner", "placed", "swap_complete"],
}


class TestGraphShape:
    @pytest.mark.parametrize("graph", [M1_GRAPH, M2_GRAPH, M3_GRAPH])
    def test_first_state_is_triggered(self, graph):
        targets = {t for t in graph.values()}
        sources = {s for s, _ in graph}
        roots = sources - targets
        assert roots == {"Triggered"}

    @pytest.mark.parametrize("graph", [M1_GRAPH, M2_GRAPH, M3_GRAPH])
    def test_terminal_states_have_no_outgoing_edges(self, graph):
        sources = {s for s, _ in graph}
        assert not sources & set(TERMINAL_STATES)

    @pytest.mark.parametrize("graph", [M1_GRAPH, M2_GRAPH, M3_GRAPH])
    def test_every_state_can_reach_a_terminal(self, graph):
        # independent oracle: reverse BFS from the terminal states
        reverse = {}
        for (s, _), t in graph.items():
            reverse.setdefault(t, set()).add(s)
        reached = set(TERMINAL_STATES)
        frontier = list(reached)
        while frontier:
            node = frontier.pop()
            for prev in reverse.get(node, ()):
                if prev not in reached:
                    reached.add(prev)
                    frontier.append(prev)
        states = {s for s, _ in graph} | set(graph.values())
        assert states <= reached


class TestTransitions:
    @pytest.mark.parametrize("mtype", ["M1", "M2", "M3"])
    def test_happy_path_completes(self, mtype):
        eng = engine_with_fleet()
        inst = eng.trigger_mission(mtype, {}, "operator", 0)
        inst = drive(eng, inst.mission_id, HAPPY_PATHS[mtype])
        assert inst.state == "Completed"
        states = [s for _, s, _ in inst.history]
        assert states[0] == "Triggered" and states[-1] == "Completed"

    @pytest.mark.parametrize("mtype", ["M1", "M2", "M3"])
    def test_every_defined_transition_exercised(self, mtype):
        """Drive each defined (state, event) pair from a fresh mission."""
        graph = default_definitions()[mtype].graph
        # shortest prefix of events reaching each state, built by BFS
        prefix = {"Triggered": []}
        frontier = ["Triggered"]
        while frontier:
            state = frontier.pop(0)
            for (s, ev), t in graph.items():
                if s == state and t not in prefix and s != t:
                    prefix[t] = prefix[state] + [ev]
                    frontier.append(t)
        for (state, event), target in graph.items():
            eng = engine_with_fleet()
            inst = eng.trigger_mission(mtype, {}, "operator", 0)
            drive(eng, inst.mission_id, prefix[state])
            inst = eng.advance(inst.mission_id, event, 99)
            if mtype == "M3" and event == "grasp_fail":
                assert inst.state in ("Grasp", "Aborted")
            else:
                assert inst.state == target, (state, event)

    @pytest.mark.parametrize("mtype", ["M1", "M2", "M3"])
    def test_every_undefined_pair_aborts(self, mtype):
        graph = default_definitions()[mtype].graph
        states = sorted({s for s, _ in graph})
        events = sorted({e for _, e in graph})
        prefix = {"Triggered": []}
        frontier = ["Triggered"]
        while frontier:
            state = frontier.pop(0)
            for (s, ev), t in graph.items():
                if s == state and t not in prefix and s != t:
                    prefix[t] = prefix[state] + [ev]
                    frontier.append(t)
        for state, event in itertools.product(states, events):
            if (state, event) in graph:
                continue
            eng = engine_with_fleet()
            inst = eng.trigger_mission(mtype, {}, "operator", 0)
            drive(eng, inst.mission_id, prefix[state])
            inst = eng.advance(inst.mission_id, event, 99)
            assert inst.state == "Aborted", (state, event)
            assert "protocol violation" in inst.history[-1][2]

    def test_advance_after_terminal_rejected(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        eng.advance(inst.mission_id, "motors_on", 1)
        eng.advance(inst.mission_id, "stood", 2)
        eng.advance(inst.mission_id, "bogus", 3)
        assert inst.state == "Aborted"
        with pytest.raises(ValueError):
            eng.advance(inst.mission_id, "motors_on", 4)

    def test_grasp_retry_cap(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M3", {}, "operator", 0)
        drive(eng, inst.mission_id,
              ["alert_received", "approval_requested", "approved",
               "battery_detected", "reached_box"])
        for i in range(GRASP_RETRY_CAP - 1):
            inst = eng.advance(inst.mission_id, "grasp_fail", 10 + i)
            assert inst.state == "Grasp"
        inst = eng.advance(inst.mission_id, "grasp_fail", 20)
        assert inst.state == "Aborted"
        assert "retries exhausted" in inst.history[-1][2]

    def test_grasp_success_on_final_attempt(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M3", {}, "operator", 0)
        drive(eng, inst.mission_id,
              ["alert_received", "approval_requested", "approved",
               "battery_detected", "reached_box", "grasp_fail", "grasp_fail",
               "grasp_success"])
        assert inst.state == "SearchPartner"


class TestTimeouts:
    def test_awaiting_corroboration_times_out_to_unverified(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        drive(eng, inst.mission_id, HAPPY_PATHS["M1"][:-1])
        assert inst.state == "AwaitCorroboration"
        assert eng.check_timeouts(5 + CORROBORATION_DEADLINE_TICKS) == []
        expired = eng.check_timeouts(6 + CORROBORATION_DEADLINE_TICKS)
        assert expired == [inst]
        assert inst.state == "Unverified"

    def test_search_timeout_aborts(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M3", {}, "operator", 0)
        drive(eng, inst.mission_id,
              ["alert_received", "approval_requested", "approved"])
        assert inst.state == "SearchBattery"
        eng.check_timeouts(3 + 1201)
        assert inst.state == "Aborted"

    def test_non_awaiting_states_never_time_out(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        eng.advance(inst.mission_id, "motors_on", 1)
        assert eng.check_timeouts(10 ** 6) == []
        assert inst.state == "MotorsOn"


class TestTrigger:
    def test_roles_filled_by_kind(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        roles = eng.mission_roles[inst.mission_id]
        assert roles == {"executor": "spot", "corroborator": "tello"}

    def test_missing_role_rejected(self):
        eng = GovernanceEngine()
        eng.register("tello", "aerial")
        with pytest.raises(TriggerRejected):
            eng.trigger_mission("M1", {}, "operator", 0)

    def test_busy_executor_rejected(self):
        eng = engine_with_fleet()
        eng.trigger_mission("M1", {}, "operator", 0)
        with pytest.raises(TriggerRejected):
            eng.trigger_mission("M2", {}, "operator", 1)

    def test_executor_free_after_terminal(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        drive(eng, inst.mission_id, HAPPY_PATHS["M1"])
        second = eng.trigger_mission("M2", {}, "operator", 10)
        assert second.mission_id == "M2-002"

    def test_unknown_type_rejected(self):
        eng = engine_with_fleet()
        with pytest.raises(TriggerRejected):
            eng.trigger_mission("M9", {}, "operator", 0)

    def test_explicit_role_of_wrong_kind_rejected(self):
        eng = engine_with_fleet()
        with pytest.raises(TriggerRejected):
            eng.trigger_mission("M1", {"executor": "husky"}, "operator", 0)


class TestCorroboration:
    def test_empty_corroborator_set_rejected(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        with pytest.raises(ValueError):
            eng.request_corroboration(inst.mission_id, "trace", [], 5)

    def test_all_confirm_resolves_confirmed(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace",
                                        ["tello", "operator"], 5)
        assert eng.request_resolution(req.request_id) is None
        eng.submit_verdict(CorroborationVerdict(req.request_id, "tello",
                                                "confirmed", 6))
        assert eng.request_resolution(req.request_id) is None
        eng.submit_verdict(CorroborationVerdict(req.request_id, "operator",
                                                "confirmed", 7))
        assert eng.request_resolution(req.request_id) == "confirmed"

    def test_any_denial_resolves_denied(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace",
                                        ["tello", "operator"], 5)
        eng.submit_verdict(CorroborationVerdict(req.request_id, "tello",
                                                "denied", 6))
        assert eng.request_resolution(req.request_id) == "denied"

    def test_late_verdict_dropped(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace", ["tello"], 5)
        late = req.deadline_tick + 1
        assert eng.submit_verdict(
            CorroborationVerdict(req.request_id, "tello", "confirmed",
                                 late)) is None
        assert eng.request_resolution(req.request_id) is None

    def test_duplicate_verifier_ignored(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace",
                                        ["tello", "operator"], 5)
        eng.submit_verdict(CorroborationVerdict(req.request_id, "tello",
                                                "confirmed", 6))
        assert eng.submit_verdict(
            CorroborationVerdict(req.request_id, "tello", "denied", 7)) is None
        assert eng.request_resolution(req.request_id) is None

    def test_non_corroborator_rejected(self):
        eng = engine_with_fleet()
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace", ["tello"], 5)
        with pytest.raises(ValueError):
            eng.submit_verdict(CorroborationVerdict(req.request_id, "husky",
                                                    "confirmed", 6))

    def test_verdicts_logged_as_corroboration_events(self):
        seen = []
        eng = engine_with_fleet(emit=seen.append)
        inst = eng.trigger_mission("M1", {}, "operator", 0)
        req = eng.request_corroboration(inst.mission_id, "trace", ["tello"], 5)
        eng.submit_verdict(CorroborationVerdict(req.request_id, "tello",
                                                "confirmed", 6))
        assert [e.kind for e in seen] == ["corroboration"]
        assert seen[0].initiator == "tello" and seen[0].responder == "spot"


class TestAlerts:
    def test_alert_produces_feasible_proposal(self):
        eng = engine_with_fleet()
        prop = eng.handle_alert("husky", 40)
        assert prop["feasible"] and prop["helper"] == "spot"
        assert prop["beneficiary"] == "husky"

    def test_duplicate_alert_deduplicated(self):
        eng = engine_with_fleet()
        assert eng.handle_alert("husky", 40) is not None
        assert eng.handle_alert("husky", 41) is None

    def test_alert_with_active_m3_ignored(self):
        eng = engine_with_fleet()
        eng.trigger_mission("M3", {"beneficiary": "husky"}, "operator", 0)
        assert eng.handle_alert("husky", 40) is None

    def test_infeasible_without_quadruped(self):
        eng = GovernanceEngine()
        eng.register("husky", "wheeled")
        prop = eng.handle_alert("husky", 40)
        assert not prop["feasible"] and prop["helper"] is None

    def test_unregistered_alert_raises(self):
        eng = engine_with_fleet()
        with pytest.raises(ValueError):
            eng.handle_alert("ghost", 40)

    def test_resolution_rearms(self):
        eng = engine_with_fleet()
        eng.handle_alert("husky", 40)
        eng.resolve_proposal("husky")
        assert eng.handle_alert("husky", 50) is not None


class TestInteractionLog:
    def test_event_ids_strictly_increasing(self):
        seen = []
        eng = engine_with_fleet(emit=seen.append)
        eng.log_interaction("joint_task_step", "tello", "spot", 1)
        eng.log_interaction("assistance_on_fault", "spot", "husky", 2)
        eng.log_interaction("independent_verification", "cam1", "spot", 3)
        ids = [e.event_id for e in seen]
        assert ids == sorted(set(ids))
        assert [e.kind for e in seen] == ["cooperation", "collaboration",
                                          "corroboration"]


class TestResilienceReport:
    def test_empty_log(self):
        rep = resilience_report([])
        assert rep.downtime_ticks == 0
        assert rep.time_to_assist is None
        assert rep.terminal_counts == {s: 0 for s in TERMINAL_STATES}

    def test_purity(self):
        lines = [
            canonical_serialize({"type": "ALERT", "tick": 10, "src": "husky",
                                 "payload": {}}),
            canonical_serialize({"type": "TELEMETRY", "tick": 20,
                                 "src": "husky",
                                 "payload": {"immobilized": True}}),
            canonical_serialize({"type": "TELEMETRY", "tick": 50,
                                 "src": "husky",
                                 "payload": {"immobilized": False}}),
            canonical_serialize({"type": "MISSION_STATUS", "tick": 45,
                                 "src": "hub",
                                 "payload": {"event": "placed",
                                             "state": "SwapInProgress"}}),
        ]
        a = resilience_report(lines).to_plain()
        b = resilience_report(lines).to_plain()
        assert a == b
        assert a["downtime_ticks"] == 30
        assert a["time_to_assist"] == 35

    def test_open_immobilization_counts_to_end(self):
        lines = [
            canonical_serialize({"type": "TELEMETRY", "tick": 10,
                                 "src": "husky",
                                 "payload": {"immobilized": True}}),
            canonical_serialize({"type": "TELEMETRY", "tick": 100,
                                 "src": "spot", "payload": {}}),
        ]
        assert resilience_report(lines).downtime_ticks == 90

    def test_malformed_record_reports_offset(self):
        lines = [canonical_serialize({"tick": 1}), b"{not json"]
        with pytest.raises(ReportError) as exc:
            resilience_report(lines)
        assert exc.value.offset == 1
        assert "record 1" in str(exc.value)
