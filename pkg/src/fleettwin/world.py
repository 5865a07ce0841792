"""Deterministic discrete-tick world.

Single-writer tick loop: `step` is a pure function of (world, commands).
Perception is an occlusion-aware line-of-sight oracle whose confidence falls
off linearly with range; path planning detours around axis-aligned obstacle
rectangles via inflated corner waypoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .model import (
    BatteryState,
    Detection,
    Pose2D,
    PlatformDescriptor,
    normalize_heading,
)

DEFAULT_TICK_DT = 0.1        # seconds per tick (10 Hz)
GRASP_REACH = 0.8            # meters
SWAP_RANGE = 2.5             # meters: box at rest within this starts a swap
SWAP_TICKS = 300             # ticks until the swap restores level to 1.0
AGENT_RADIUS = 0.3           # path-planning inflation radius


class PerceptionError(KeyError):
    """Unknown camera or agent."""


class NoPathError(ValueError):
    """Target unreachable (inside an obstacle)."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned obstacle rectangle."""
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin >= self.xmax or self.ymin >= self.ymax:
            raise ValueError("degenerate rectangle")

    def contains(self, x: float, y: float, pad: float = 0.0) -> bool:
        return (self.xmin - pad <= x <= self.xmax + pad
                and self.ymin - pad <= y <= self.ymax + pad)

    def inflated(self, pad: float) -> "Rect":
        return Rect(self.xmin - pad, self.ymin - pad,
                    self.xmax + pad, self.ymax + pad)

    def corners(self) -> List[Tuple[float, float]]:
        return [(self.xmin, self.ymin), (self.xmax, self.ymin),
                (self.xmax, self.ymax), (self.xmin, self.ymax)]


def segment_intersects_rect(p: Tuple[float, float], q: Tuple[float, float],
                            rect: Rect) -> bool:
    """True when segment pq passes through the rectangle interior.

    Liang-Barsky clipping; touching the boundary only does not count as an
    intersection, so paths may graze obstacle edges.
    """
    x0, y0 = p
    x1, y1 = q
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    eps = 1e-12
    for num, den in (
        (rect.xmin - x0, dx),
        (x0 - rect.xmax, -dx),
        (rect.ymin - y0, dy),
        (y0 - rect.ymax, -dy),
    ):
        if abs(den) < eps:
            if num > 0:
                return False
            continue
        t = num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 >= t1:
            return False
    # Overlap of positive length inside the box means a true crossing.
    mid = ((t0 + t1) / 2.0)
    mx, my = x0 + mid * dx, y0 + mid * dy
    interior = (rect.xmin + eps < mx < rect.xmax - eps
                and rect.ymin + eps < my < rect.ymax - eps)
    return (t1 - t0) > 1e-9 and interior


@dataclass
class AgentBody:
    descriptor: PlatformDescriptor
    pose: Pose2D
    battery: BatteryState
    carrying: Optional[str] = None
    swap_ticks_left: Optional[int] = None  # counts down while a swap runs


@dataclass
class WorldObject:
    object_id: str
    object_class: str       # battery_box
    pose: Pose2D
    carried_by: Optional[str] = None
    spent: bool = False     # consumed by a completed swap


@dataclass
class MoveCommand:
    """Per-tick motion intent for one agent.

    verb: forward (distance implied by speed), goto (x,y), turn (heading),
    stop. Pose updates are bounded by max_speed * tick_dt.
    """
    agent_id: str
    verb: str
    target: Optional[Tuple[float, float]] = None
    heading: Optional[float] = None


@dataclass
class StepResult:
    events: List[dict] = field(default_factory=list)
    rejected: List[Tuple[MoveCommand, str]] = field(default_factory=list)


@dataclass
class WorldState:
    tick: int = 0
    tick_dt: float = DEFAULT_TICK_DT
    agents: Dict[str, AgentBody] = field(default_factory=dict)
    objects: Dict[str, WorldObject] = field(default_factory=dict)
    obstacles: List[Rect] = field(default_factory=list)
    bounds: Rect = field(default_factory=lambda: Rect(-50, -50, 50, 50))
    rng_seed: int = 0
    detection_jitter: float = 0.0  # optional seeded +-jitter, default off

    def agent(self, agent_id: str) -> AgentBody:
        try:
            return self.agents[agent_id]
        except KeyError:
            raise PerceptionError("unknown agent %r" % (agent_id,)) from None

    def to_plain(self) -> dict:
        from .model import to_plain
        return {
            "tick": self.tick,
            "tick_dt": self.tick_dt,
            "agents": {
                aid: {
                    "descriptor": to_plain(a.descriptor),
                    "pose": to_plain(a.pose),
                    "battery": to_plain(a.battery),
                    "carrying": a.carrying,
                    "swap_ticks_left": a.swap_ticks_left,
                }
                for aid, a in self.agents.items()
            },
            "objects": {
                oid: {
                    "class": o.object_class,
                    "pose": to_plain(o.pose),
                    "carried_by": o.carried_by,
                    "spent": o.spent,
                }
                for oid, o in self.objects.items()
            },
            "obstacles": [[r.xmin, r.ymin, r.xmax, r.ymax]
                          for r in self.obstacles],
            "bounds": [self.bounds.xmin, self.bounds.ymin,
                       self.bounds.xmax, self.bounds.ymax],
            "rng_seed": self.rng_seed,
        }


def _apply_motion(body: AgentBody, cmd: MoveCommand, dt: float) -> Pose2D:
    pose = body.pose
    step_len = body.descriptor.max_speed * dt
    if cmd.verb == "stop":
        return pose
    if cmd.verb == "turn":
        return replace(pose, heading=normalize_heading(cmd.heading or 0.0))
    if cmd.verb == "forward":
        return replace(pose,
                       x=pose.x + step_len * math.cos(pose.heading),
                       y=pose.y + step_len * math.sin(pose.heading))
    if cmd.verb == "goto":
        tx, ty = cmd.target  # type: ignore[misc]
        dist = math.hypot(tx - pose.x, ty - pose.y)
        if dist < 1e-12:
            return pose
        heading = math.atan2(ty - pose.y, tx - pose.x)
        move = min(step_len, dist)
        return Pose2D(pose.x + move * math.cos(heading),
                      pose.y + move * math.sin(heading),
                      heading)
    raise ValueError("unknown move verb %r" % (cmd.verb,))


def step(world: WorldState, commands: List[MoveCommand]) -> StepResult:
    """Advance the world one tick in place.

    Motion is bounded by max_speed*dt; immobilized agents ignore motion;
    batteries drain by drain_rate*dt; carried objects track their carrier;
    a battery box resting near a swap-pending agent runs the swap countdown.
    Unknown-agent commands are rejected individually, the tick still advances.
    """
    result = StepResult()
    dt = world.tick_dt
    by_agent: Dict[str, MoveCommand] = {}
    for cmd in commands:
        if cmd.agent_id not in world.agents:
            result.rejected.append((cmd, "unknown agent"))
            continue
        by_agent[cmd.agent_id] = cmd  # last command per agent wins

    for aid in sorted(world.agents):
        body = world.agents[aid]
        cmd = by_agent.get(aid)
        if cmd is not None and not body.battery.immobilized():
            body.pose = _apply_motion(body, cmd, dt)

    # Battery drain, swap countdown, and carried-object coupling.
    for aid in sorted(world.agents):
        body = world.agents[aid]
        bat = body.battery
        if body.swap_ticks_left is not None:
            body.swap_ticks_left -= 1
            if body.swap_ticks_left <= 0:
                body.swap_ticks_left = None
                body.battery = replace(bat, level=1.0)
                result.events.append({"type": "swap_complete", "agent": aid})
        elif bat.drain_rate > 0.0 and bat.level > 0.0:
            new_level = max(0.0, bat.level - bat.drain_rate * dt)
            body.battery = replace(bat, level=new_level)

        if body.carrying is not None:
            world.objects[body.carrying].pose = body.pose

    # A resting (uncarried, unspent) battery box near a drained battery-capable
    # agent starts the swap.
    for aid in sorted(world.agents):
        body = world.agents[aid]
        if (not body.descriptor.battery_capable
                or body.swap_ticks_left is not None
                or body.battery.level > body.battery.alert_threshold):
            continue
        for oid in sorted(world.objects):
            obj = world.objects[oid]
            if (obj.object_class == "battery_box" and obj.carried_by is None
                    and not obj.spent
                    and body.pose.distance_to(obj.pose) <= SWAP_RANGE):
                obj.spent = True
                body.swap_ticks_left = SWAP_TICKS
                result.events.append(
                    {"type": "swap_started", "agent": aid, "box": oid})
                break

    world.tick += 1
    return result


def grasp(world: WorldState, agent_id: str, object_id: str) -> bool:
    """Pick up an object if within reach; returns success."""
    body = world.agent(agent_id)
    if not body.descriptor.has_manipulator:
        raise ValueError("agent %r has no manipulator" % (agent_id,))
    obj = world.objects[object_id]
    if obj.carried_by is not None or body.carrying is not None:
        return False
    if body.pose.distance_to(obj.pose) > GRASP_REACH:
        return False
    obj.carried_by = agent_id
    obj.pose = body.pose
    body.carrying = object_id
    return True


def release(world: WorldState, agent_id: str,
            at: Optional[Tuple[float, float]] = None) -> Optional[str]:
    """Put down the carried object, optionally at an explicit position."""
    body = world.agent(agent_id)
    if body.carrying is None:
        return None
    oid = body.carrying
    obj = world.objects[oid]
    obj.carried_by = None
    if at is not None:
        obj.pose = Pose2D(at[0], at[1], obj.pose.heading)
    body.carrying = None
    return oid


# --- perception --------------------------------------------------------------

def _jitter(world: WorldState, agent_id: str, camera_id: str,
            target_id: str) -> float:
    if world.detection_jitter <= 0.0:
        return 0.0
    # Stable per (seed, tick, observer, camera, target) so runs reproduce.
    import zlib
    key = "%d|%d|%s|%s|%s" % (world.rng_seed, world.tick, agent_id,
                              camera_id, target_id)
    h = zlib.crc32(key.encode("utf-8"))
    return ((h % 2001) / 1000.0 - 1.0) * world.detection_jitter


def perceive(world: WorldState, agent_id: str,
             camera_id: str) -> List[Detection]:
    """Line-of-sight detections of target-class entities from one camera.

    confidence = clamp(1 - range/max_range, 0, 1); targets outside the fov
    cone, beyond max_range, or occluded by an obstacle are omitted.
    """
    body = world.agent(agent_id)
    try:
        cam = body.descriptor.camera(camera_id)
    except KeyError:
        raise PerceptionError("agent %r has no camera %r"
                              % (agent_id, camera_id)) from None

    cam_bearing = normalize_heading(body.pose.heading + cam.mount_bearing)
    origin = (body.pose.x, body.pose.y)

    candidates: List[Tuple[str, str, Pose2D]] = []
    for oid in sorted(world.objects):
        obj = world.objects[oid]
        if obj.object_class == "battery_box" and obj.carried_by is None:
            candidates.append((oid, "battery_box", obj.pose))
    for aid in sorted(world.agents):
        if aid == agent_id:
            continue
        other = world.agents[aid]
        if other.descriptor.kind == "wheeled":
            candidates.append((aid, "wheeled_platform", other.pose))

    detections: List[Detection] = []
    for target_id, target_class, pose in candidates:
        rng = body.pose.distance_to(pose)
        if rng > cam.max_range or rng < 1e-9:
            continue
        abs_bearing = body.pose.bearing_to(pose)
        off_axis = normalize_heading(abs_bearing - cam_bearing)
        if abs(off_axis) > cam.fov / 2.0:
            continue
        if any(segment_intersects_rect(origin, (pose.x, pose.y), r)
               for r in world.obstacles):
            continue
        conf = max(0.0, min(1.0, 1.0 - rng / cam.max_range
                            + _jitter(world, agent_id, camera_id, target_id)))
        detections.append(Detection(
            target_class=target_class,
            confidence=conf,
            range=rng,
            bearing=normalize_heading(abs_bearing - body.pose.heading),
            camera_id=camera_id,
            tick=world.tick,
            target_id=target_id,
        ))
    return detections


def visible(world: WorldState, observer_id: str, camera_id: str,
            target_agent_id: str) -> bool:
    """Geometric visibility of another agent: fov cone, range and clear
    line of sight. Used by corroborators, independent of target classes."""
    body = world.agent(observer_id)
    target = world.agent(target_agent_id)
    try:
        cam = body.descriptor.camera(camera_id)
    except KeyError:
        raise PerceptionError("agent %r has no camera %r"
                              % (observer_id, camera_id)) from None
    rng = body.pose.distance_to(target.pose)
    if rng > cam.max_range:
        return False
    cam_bearing = normalize_heading(body.pose.heading + cam.mount_bearing)
    off_axis = normalize_heading(body.pose.bearing_to(target.pose) - cam_bearing)
    if abs(off_axis) > cam.fov / 2.0:
        return False
    return not any(segment_intersects_rect(
        (body.pose.x, body.pose.y), (target.pose.x, target.pose.y), r)
        for r in world.obstacles)


# --- path planning -----------------------------------------------------------

def _segment_free(p, q, rects) -> bool:
    return not any(segment_intersects_rect(p, q, r) for r in rects)


def plan_path(world: WorldState, start: Pose2D,
              goal: Tuple[float, float],
              radius: float = AGENT_RADIUS) -> List[Tuple[float, float]]:
    """Waypoints from start to goal avoiding all obstacles.

    Straight segment when clear, otherwise Dijkstra over a visibility graph of
    obstacle corners inflated by the agent radius. The returned path never
    crosses an obstacle interior.
    """
    p0 = (start.x, start.y)
    if any(r.contains(goal[0], goal[1]) for r in world.obstacles):
        raise NoPathError("goal lies inside an obstacle")
    inflated = [r.inflated(radius) for r in world.obstacles]
    if _segment_free(p0, goal, inflated):
        return [goal]

    # Visibility-graph nodes: start, goal, inflated corners pushed slightly
    # outward so corner-to-corner segments clear their own rectangle.
    nodes = [p0, goal]
    bump = radius + 1e-6
    for r in world.obstacles:
        cx = (r.xmin + r.xmax) / 2.0
        cy = (r.ymin + r.ymax) / 2.0
        for (x, y) in r.corners():
            dx, dy = x - cx, y - cy
            n = math.hypot(dx, dy)
            nodes.append((x + bump * dx / n * 1.5, y + bump * dy / n * 1.5))
    nodes = [n for n in nodes
             if not any(r.contains(n[0], n[1]) for r in inflated)
             or n in (p0, goal)]

    # Edges pass the inflated rectangles; keeps real clearance off corners.
    import heapq
    dist = {0: 0.0}
    prev: Dict[int, int] = {}
    pq = [(0.0, 0)]
    goal_idx = 1
    visited = set()
    while pq:
        d, u = heapq.heappop(pq)
        if u in visited:
            continue
        visited.add(u)
        if u == goal_idx:
            break
        for v in range(len(nodes)):
            if v == u or v in visited:
                continue
            if not _segment_free(nodes[u], nodes[v], world.obstacles):
                continue
            nd = d + math.hypot(nodes[v][0] - nodes[u][0],
                                nodes[v][1] - nodes[u][1])
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    if goal_idx not in dist:
        raise NoPathError("no obstacle-free path found")
    path = []
    u = goal_idx
    while u != 0:
        path.append(nodes[u])
        u = prev[u]
    return list(reversed(path))


# --- reference geometry ------------------------------------------------------

def trace_circle(center: Tuple[float, float], radius: float,
                 n_samples: int) -> List[Tuple[float, float]]:
    """n equally spaced points on the circle, starting at bearing 0."""
    if n_samples < 8:
        raise ValueError("need at least 8 samples")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    cx, cy = center
    return [(cx + radius * math.cos(2.0 * math.pi * i / n_samples),
             cy + radius * math.sin(2.0 * math.pi * i / n_samples))
            for i in range(n_samples)]


def trace_square(origin: Pose2D, side: float) -> List[Tuple[float, float]]:
    """Four corners of a side-length square walked from the origin pose,
    returning to the start. Corners are expressed in world coordinates with
    the square's first edge along the origin heading."""
    if side <= 0.0:
        raise ValueError("side must be positive")
    h = origin.heading
    cos_h, sin_h = math.cos(h), math.sin(h)
    local = [(side, 0.0), (side, side), (0.0, side), (0.0, 0.0)]
    return [(origin.x + lx * cos_h - ly * sin_h,
             origin.y + lx * sin_h + ly * cos_h) for lx, ly in local]
