"""Post-hoc log verification: replays a JSONL log against the published
invariants and reports every violation with its line offset."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Optional

from .eventlog import compute_digest, read_log, sidecar_digest
from .governance import default_definitions
from .model import DETECTION_THRESHOLD, INTERACTION_KINDS


class Violation:
    def __init__(self, offset: int, rule: str, detail: str):
        self.offset = offset
        self.rule = rule
        self.detail = detail

    def __repr__(self):
        return "line %d [%s]: %s" % (self.offset, self.rule, self.detail)


def _reachable(graph: Dict, src: str, dst: str) -> bool:
    if src == dst:
        return True
    adj: Dict[str, set] = {}
    for (s, _), t in graph.items():
        adj.setdefault(s, set()).add(t)
    seen, frontier = {src}, [src]
    while frontier:
        s = frontier.pop()
        for t in adj.get(s, ()):
            if t == dst:
                return True
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return False


def verify_log(path: Path,
               threshold: float = DETECTION_THRESHOLD) -> List[Violation]:
    lines = read_log(path)
    violations: List[Violation] = []

    expected = sidecar_digest(path)
    if expected is not None and compute_digest(lines) != expected:
        violations.append(Violation(
            len(lines), "hash",
            "log digest does not match the recorded side-car digest"))

    defs = default_definitions()
    seq_seen: Dict[str, int] = {}
    mission_state: Dict[str, str] = {}
    mission_type: Dict[str, str] = {}
    qualifying_detections = 0
    last_telemetry_pose: Dict[str, dict] = {}
    event_ids: List[int] = []

    for i, raw in enumerate(lines):
        try:
            rec = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            violations.append(Violation(i, "parse", str(e)))
            continue

        if "event_id" in rec and "kind" in rec:
            if rec["kind"] not in INTERACTION_KINDS:
                violations.append(Violation(i, "event-kind",
                                            "unknown kind %r" % rec["kind"]))
            event_ids.append(rec["event_id"])
            continue

        src = rec.get("src", "")
        seq = rec.get("seq", 0)
        prev = seq_seen.get(src, 0)
        if seq != prev + 1:
            violations.append(Violation(
                i, "seq", "src %r jumped %d -> %d" % (src, prev, seq)))
        seq_seen[src] = seq

        ftype = rec.get("type")
        payload = rec.get("payload", {})

        if ftype == "DETECTION":
            if payload.get("confidence", 0.0) >= threshold:
                qualifying_detections += 1
        elif ftype == "TELEMETRY" and "pose" in payload:
            last_telemetry_pose[src] = payload["pose"]
        elif ftype == "MISSION_STATUS" and src == "hub":
            mid = payload.get("mission_id", "")
            state = payload.get("state", "")
            mtype = payload.get("mission_type", "")
            mission_type[mid] = mtype
            graph = defs.get(mtype).graph if mtype in defs else {}
            prev_state = mission_state.get(mid)
            if prev_state is not None and not _reachable(graph, prev_state,
                                                         state):
                violations.append(Violation(
                    i, "state-path",
                    "mission %s: %s unreachable from %s"
                    % (mid, state, prev_state)))
            mission_state[mid] = state

            if state in ("ApproachBox", "ApproachPartner"):
                if qualifying_detections < 1:
                    violations.append(Violation(
                        i, "threshold gate",
                        "%s entered with no prior DETECTION >= %.2f"
                        % (state, threshold)))
                qualifying_detections -= 1

        if (ftype == "MISSION_STATUS" and src != "hub"
                and payload.get("event") == "placed"):
            pos = payload.get("position")
            partner_id = payload.get("partner")
            pose = last_telemetry_pose.get(partner_id)
            if pos and pose:
                exp_x = pose["x"] + 2.0 * math.cos(pose["heading"])
                exp_y = pose["y"] + 2.0 * math.sin(pose["heading"])
                err = math.hypot(pos[0] - exp_x, pos[1] - exp_y)
                if err > 0.1:
                    violations.append(Violation(
                        i, "placement",
                        "box released %.3f m from the 2 m in-front point"
                        % err))

    for j in range(1, len(event_ids)):
        if event_ids[j] <= event_ids[j - 1]:
            violations.append(Violation(
                0, "event-order", "interaction event ids not increasing"))
            break

    return violations


def replay_log(path: Path, emit, speed: float = 0.0,
               tick_dt: float = 0.1):
    """Re-emit log lines in order through `emit(bytes)`; byte-identical
    payloads. speed > 0 paces the emission by frame tick deltas."""
    import time
    lines = read_log(path)
    last_tick = None
    for raw in lines:
        if speed > 0:
            try:
                tick = json.loads(raw).get("tick", 0)
            except json.JSONDecodeError:
                tick = last_tick
            if last_tick is not None and tick is not None:
                delta = max(0, tick - last_tick) * tick_dt / speed
                if delta:
                    time.sleep(delta)
            last_tick = tick
        emit(raw)
