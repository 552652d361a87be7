"""Fixed-step playback of a concrete scenario with a pluggable ego controller.

The ego integrates unicycle kinematics from the controls the agent returns;
NPC actors follow their route polylines by arc length at their scripted
speed.  Every frame is logged before integration, so a trace always starts
at the spawn poses and frame times are exact multiples of the timestep.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

from . import geometry as geo
from .config import SimConfig, actor_footprint
from .mapmodel import RouteGraph, locate_lane
from .scenario import ConcreteScenario
from .scenariogen import chain_polyline

if TYPE_CHECKING:  # pragma: no cover
    from .agents import Agent

EGO_ID = "ego"
TRACE_SCHEMA = "trace.v1"

STATUS_REACHED = "reached"
STATUS_TIMEOUT = "timeout"
STATUS_COLLISION = "collision-stop"
STATUS_AGENT_FAILURE = "agent-failure"
STATUSES = (STATUS_REACHED, STATUS_TIMEOUT, STATUS_COLLISION, STATUS_AGENT_FAILURE)

# deceleration NPCs use to settle at the end of their path, m/s^2
_NPC_BRAKE = 4.0


class SimulationError(Exception):
    pass


class MapMismatch(SimulationError):
    """Scenario was generated for a different map than the one loaded."""


class TraceParseError(SimulationError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Control:
    """Ego command for one step: longitudinal accel and path curvature."""

    accel: float = 0.0
    curvature: float = 0.0

    def clamped(self, cfg: SimConfig) -> "Control":
        a = min(max(self.accel, cfg.accel_min), cfg.accel_max)
        k = min(max(self.curvature, -cfg.curvature_max), cfg.curvature_max)
        return Control(a, k)


ZERO_CONTROL = Control(0.0, 0.0)


@dataclass(frozen=True)
class ActorState:
    actor_id: str
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float
    lane_id: str | None = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def corners(self) -> list[tuple[float, float]]:
        return geo.obb_corners(self.x, self.y, self.heading, self.length, self.width)


@dataclass(frozen=True)
class SignAhead:
    token: str
    distance_m: float
    value: float | None


@dataclass(frozen=True)
class Observation:
    """What the ego controller sees each frame."""

    time: float
    ego: ActorState
    others: tuple[ActorState, ...]
    path_ahead: tuple[tuple[float, float], ...]
    destination: tuple[float, float]
    lateral_offset: float
    signs_ahead: tuple[SignAhead, ...]


@dataclass(frozen=True)
class Frame:
    time: float
    actors: tuple[ActorState, ...]  # ego first
    control: Control

    @property
    def ego(self) -> ActorState:
        return self.actors[0]


@dataclass(frozen=True)
class TraceLog:
    scenario_id: str
    rule_id: str
    map_id: str
    agent_id: str
    dt_s: float
    status: str
    frames: tuple[Frame, ...]

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown terminal status {self.status!r}")
        if self.dt_s <= 0:
            raise ValueError("dt must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.frames) * self.dt_s

    def actor_frames(self, actor_id: str) -> list[ActorState]:
        out = []
        for f in self.frames:
            for a in f.actors:
                if a.actor_id == actor_id:
                    out.append(a)
                    break
        return out


# ---------------------------------------------------------------------------
# path following helpers

def pursuit_curvature(
    path: Sequence[tuple[float, float]],
    pos: tuple[float, float],
    heading: float,
    lookahead_m: float,
) -> float:
    """Pure-pursuit curvature toward the path point `lookahead_m` ahead of
    the ego's arc-length projection."""
    s, _ = geo.project_onto_polyline(path, pos)
    target, _ = geo.point_at_arc(path, s + lookahead_m)
    chord = geo.dist(pos, target)
    if chord < 1e-9:
        return 0.0
    alpha = geo.normalize_angle(geo.angle_of(target[0] - pos[0], target[1] - pos[1]) - heading)
    return 2.0 * math.sin(alpha) / chord


def integrate_unicycle(
    state: ActorState, control: Control, dt: float
) -> ActorState:
    """heading += v*curvature*dt, advance along the new heading, then update
    speed (floored at zero)."""
    heading = geo.normalize_angle(state.heading + state.speed * control.curvature * dt)
    x = state.x + state.speed * dt * math.cos(heading)
    y = state.y + state.speed * dt * math.sin(heading)
    speed = max(0.0, state.speed + control.accel * dt)
    return replace(state, x=x, y=y, heading=heading, speed=speed)


class _NpcRunner:
    """Arc-length follower: constant scripted speed with a smooth stop at
    the end of the path.  `static` actors never move."""

    def __init__(self, script, graph: RouteGraph):
        self.actor_id = script.actor_id
        self.length, self.width = actor_footprint(script.actor_type)
        self.static = script.behavior == "static" or script.target_speed_mps <= 0 or not script.route_ids
        self.pose = script.pose
        self.speed_cmd = script.target_speed_mps
        if self.static:
            self.path = None
            self.total = 0.0
            self.s = 0.0
        else:
            self.path = chain_polyline(graph, list(script.route_ids))
            self.total = geo.polyline_length(self.path)
            self.s, _ = geo.project_onto_polyline(self.path, (script.pose.x, script.pose.y))

    def _speed_now(self) -> float:
        if self.static:
            return 0.0
        remaining = self.total - self.s
        if remaining <= 1e-9:
            return 0.0
        return min(self.speed_cmd, math.sqrt(2.0 * _NPC_BRAKE * remaining))

    def state(self) -> ActorState:
        if self.static or self.path is None:
            return ActorState(
                self.actor_id, self.pose.x, self.pose.y, self.pose.heading,
                0.0, self.length, self.width,
            )
        pt, heading = geo.point_at_arc(self.path, self.s)
        return ActorState(
            self.actor_id, pt[0], pt[1], heading, self._speed_now(),
            self.length, self.width,
        )

    def advance(self, dt: float) -> None:
        if self.static:
            return
        self.s = min(self.s + self._speed_now() * dt, self.total)


# ---------------------------------------------------------------------------
# the simulation loop

def run(
    scenario: ConcreteScenario,
    graph: RouteGraph,
    agent: "Agent",
    cfg: SimConfig = SimConfig(),
) -> TraceLog:
    """Step the scenario until the ego reaches its destination, time runs
    out, a collision grace period elapses, or the agent raises."""
    if scenario.map_id != graph.lane_map.map_id:
        raise MapMismatch(
            f"scenario targets map {scenario.map_id!r}, loaded {graph.lane_map.map_id!r}"
        )

    lane_map = graph.lane_map
    path = chain_polyline(graph, list(scenario.ego.route_ids))
    ego_len, ego_wid = actor_footprint("car")
    ego = ActorState(
        EGO_ID, scenario.ego.pose.x, scenario.ego.pose.y,
        scenario.ego.pose.heading, 0.0, ego_len, ego_wid,
    )
    npcs = [_NpcRunner(s, graph) for s in scenario.npc_scripts]
    sign_posts = _signs_on_path(graph, scenario.ego.route_ids, path)
    destination = scenario.ego.destination

    n_steps = int(round(cfg.time_limit_s / cfg.dt_s))
    frames: list[Frame] = []
    status = STATUS_TIMEOUT
    collision_at: float | None = None
    agent_broke = False

    try:
        agent.reset(scenario, graph)
    except Exception:
        agent_broke = True

    for k in range(n_steps):
        t = round(k * cfg.dt_s, 6)
        ego = replace(ego, lane_id=locate_lane(lane_map, ego.position))
        npc_states = []
        for r in npcs:
            st = r.state()
            kinds = ("driving", "shoulder")
            npc_states.append(replace(st, lane_id=locate_lane(lane_map, st.position, kinds)))

        control = ZERO_CONTROL
        if not agent_broke:
            obs = Observation(
                time=t,
                ego=ego,
                others=tuple(npc_states),
                path_ahead=_path_ahead(path, ego.position),
                destination=destination,
                lateral_offset=_lateral_offset(lane_map, path, ego),
                signs_ahead=_signs_ahead(sign_posts, path, ego.position),
            )
            try:
                control = agent.act(obs).clamped(cfg)
            except Exception:
                agent_broke = True
                control = ZERO_CONTROL

        frames.append(Frame(t, (ego, *npc_states), control))

        if agent_broke:
            status = STATUS_AGENT_FAILURE
            break

        if collision_at is None:
            for st in npc_states:
                if geo.obb_overlap(ego.corners(), st.corners()) is not None:
                    collision_at = t
                    break
        if collision_at is not None:
            if t >= collision_at + cfg.collision_grace_s - 1e-9:
                status = STATUS_COLLISION
                break
        elif geo.dist(ego.position, destination) <= cfg.destination_radius_m:
            status = STATUS_REACHED
            break

        ego = integrate_unicycle(ego, control, cfg.dt_s)
        for r in npcs:
            r.advance(cfg.dt_s)

    return TraceLog(
        scenario_id=scenario.scenario_id,
        rule_id=scenario.rule_id,
        map_id=scenario.map_id,
        agent_id=getattr(agent, "agent_id", agent.__class__.__name__),
        dt_s=cfg.dt_s,
        status=status,
        frames=tuple(frames),
    )


def _path_ahead(
    path: Sequence[tuple[float, float]], pos: tuple[float, float],
    horizon_m: float = 60.0, max_points: int = 12,
) -> tuple[tuple[float, float], ...]:
    s, _ = geo.project_onto_polyline(path, pos)
    out = []
    acc = 0.0
    for i in range(1, len(path)):
        acc += geo.dist(path[i - 1], path[i])
        if acc > s + horizon_m:
            break
        if acc > s:
            out.append(path[i])
            if len(out) >= max_points:
                break
    if not out:
        out.append(path[-1])
    return tuple(out)


def _lateral_offset(lane_map, path, ego: ActorState) -> float:
    if ego.lane_id is not None:
        centerline = lane_map.lane_polyline(ego.lane_id)
        return geo.signed_lateral_offset(centerline, ego.position)
    return geo.signed_lateral_offset(path, ego.position)


def _signs_on_path(graph: RouteGraph, route_ids, path):
    posts = []
    seen = set()
    for rid in route_ids:
        for sign in graph.route_signs.get(rid, ()):
            if sign.id in seen:
                continue
            seen.add(sign.id)
            arc, _ = geo.project_onto_polyline(path, (sign.x, sign.y))
            posts.append((arc, sign.token, sign.value))
    posts.sort(key=lambda p: p[0])
    return posts


def _signs_ahead(posts, path, pos, horizon_m: float = 50.0):
    if not posts:
        return ()
    s, _ = geo.project_onto_polyline(path, pos)
    out = [
        SignAhead(token, arc - s, value)
        for arc, token, value in posts
        if 0.0 <= arc - s <= horizon_m
    ]
    return tuple(out)


# ---------------------------------------------------------------------------
# trace persistence (JSONL: header line, then one line per frame)

def _frame_to_jsonable(frame: Frame) -> dict:
    return {
        "t": frame.time,
        "ctrl": [frame.control.accel, frame.control.curvature],
        "actors": [
            [a.actor_id, a.x, a.y, a.heading, a.speed, a.length, a.width, a.lane_id]
            for a in frame.actors
        ],
    }


def _frame_from_jsonable(obj: dict, lineno: int) -> Frame:
    try:
        actors = tuple(
            ActorState(aid, x, y, h, v, ln, w, lane)
            for aid, x, y, h, v, ln, w, lane in obj["actors"]
        )
        return Frame(float(obj["t"]), actors, Control(*obj["ctrl"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceParseError(f"malformed frame record: {exc}", lineno) from None


def write_trace(trace: TraceLog, path) -> None:
    if not trace.frames:
        raise ValueError("refusing to write a trace with no frames")
    header = {
        "schema": TRACE_SCHEMA,
        "scenario_id": trace.scenario_id,
        "rule_id": trace.rule_id,
        "map_id": trace.map_id,
        "agent_id": trace.agent_id,
        "dt": trace.dt_s,
        "status": trace.status,
        "n_frames": len(trace.frames),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for frame in trace.frames:
            fh.write(json.dumps(_frame_to_jsonable(frame), separators=(",", ":")) + "\n")


def read_trace(path) -> TraceLog:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceParseError("empty trace file", 1)

    def load(lineno: int) -> dict:
        try:
            obj = json.loads(lines[lineno - 1])
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"bad JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise TraceParseError("expected a JSON object", lineno)
        return obj

    header = load(1)
    if header.get("schema") != TRACE_SCHEMA:
        raise TraceParseError(f"unsupported schema {header.get('schema')!r}", 1)
    try:
        n_frames = int(header["n_frames"])
        meta = (
            header["scenario_id"], header["rule_id"], header["map_id"],
            header["agent_id"], float(header["dt"]), header["status"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceParseError(f"malformed header: {exc}", 1) from None

    if len(lines) - 1 != n_frames:
        raise TraceParseError(
            f"header promises {n_frames} frames, file has {len(lines) - 1}",
            len(lines),
        )
    if n_frames == 0:
        raise TraceParseError("trace has no frames", 1)

    frames = []
    dt = meta[4]
    for i in range(n_frames):
        lineno = i + 2
        frame = _frame_from_jsonable(load(lineno), lineno)
        expected_t = round(i * dt, 6)
        if abs(frame.time - expected_t) > 1e-9:
            raise TraceParseError(
                f"frame time {frame.time} out of order (expected {expected_t})", lineno
            )
        if any(a.speed < 0 for a in frame.actors):
            raise TraceParseError("negative speed", lineno)
        frames.append(frame)

    try:
        return TraceLog(meta[0], meta[1], meta[2], meta[3], dt, meta[5], tuple(frames))
    except ValueError as exc:
        raise TraceParseError(str(exc), 1) from None
