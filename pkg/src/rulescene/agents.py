"""Ego controllers for the simulation loop.

The compliant agent reads the scenario's monitor checks and treats their
anchors as advisories: it halts at stop lines, holds short of conflict
regions while privileged traffic is near, keeps a time-headway gap, caps
its speed at posted limits, and sheds speed inside trigger regions.  The
violator agent is the same controller with named behaviors switched off,
which is how the oracle checks get their positive samples.
"""

from __future__ import annotations

import json
import math
import subprocess
from typing import Protocol, Sequence, runtime_checkable

from . import geometry as geo
from .catalog import normalize_token
from .config import SimConfig, Thresholds
from .mapmodel import RouteGraph
from .scenario import ConcreteScenario
from .scenariogen import chain_polyline
from .simulate import Control, Observation, ZERO_CONTROL, pursuit_curvature

VIOLATION_TOKENS = frozenset({
    "stop", "yield", "decelerate", "keep safe distance", "speed limit",
    "keep lane", "change lane to left", "change lane to right",
})

# comfort bounds the controller plans with; the simulator clamps harder
_BRAKE = 1.5
_SPEED_KP = 2.0
_LAT_ACCEL_MAX = 6.0
_HOLD_S = 1.0            # full-stop dwell at a stop line
_SWERVE_WINDOW = (4.0, 6.0)
_SWERVE_OFFSET = 2.5


class AgentError(Exception):
    pass


class UnknownViolationToken(AgentError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"no behavior named {token!r} to violate")


@runtime_checkable
class Agent(Protocol):
    agent_id: str

    def reset(self, scenario: ConcreteScenario, graph: RouteGraph) -> None: ...

    def act(self, obs: Observation) -> Control: ...


class StaticAgent:
    """Never moves; pins the timeout path."""

    agent_id = "static"

    def reset(self, scenario: ConcreteScenario, graph: RouteGraph) -> None:
        pass

    def act(self, obs: Observation) -> Control:
        return ZERO_CONTROL


def _braking_speed(distance_m: float) -> float:
    """Comfortable approach-speed profile that tapers to zero just short of
    the target point (the linear cap stops the sqrt from commanding spurts
    right next to the hold)."""
    if distance_m <= 0.2:
        return 0.0
    return min(math.sqrt(2.0 * _BRAKE * (distance_m - 0.2)), distance_m)


def _entry_arc(path: Sequence[tuple[float, float]], polygon) -> float | None:
    """Arc at which the path first enters the polygon, by fine sampling."""
    total = geo.polyline_length(path)
    step = 0.5
    s = 0.0
    while s <= total:
        pt, _ = geo.point_at_arc(path, s)
        if geo.point_in_polygon(pt, polygon):
            return s
        s += step
    return None


def _centroid(polygon) -> tuple[float, float]:
    xs = sum(p[0] for p in polygon) / len(polygon)
    ys = sum(p[1] for p in polygon) / len(polygon)
    return (xs, ys)


class CompliantAgent:
    """Pure-pursuit path follower with rule-keeping advisories."""

    def __init__(self, cfg: SimConfig = SimConfig(), disabled: frozenset[str] = frozenset()):
        unknown = disabled - VIOLATION_TOKENS
        if unknown:
            raise UnknownViolationToken(sorted(unknown)[0])
        self.cfg = cfg
        self.disabled = disabled
        if disabled:
            self.agent_id = "violator:" + "+".join(sorted(disabled))
        else:
            self.agent_id = "compliant"

    # -- setup -------------------------------------------------------------

    def reset(self, scenario: ConcreteScenario, graph: RouteGraph) -> None:
        self.thresholds: Thresholds = scenario.monitor.thresholds
        self.headway_multiplier = scenario.monitor.headway_multiplier
        self.path = chain_polyline(graph, list(scenario.ego.route_ids))

        self.stop_arc: float | None = None
        self.stop_done = False
        self.stop_dwell = 0.0
        self.yield_polygon = None
        self.yield_entry_arc: float | None = None
        self.yield_privileged: frozenset[str] = frozenset()
        self.trigger_polygon = None
        self.trigger_entry_speed: float | None = None
        self.speed_cap: float | None = None
        self.lead_id: str | None = None
        self.swerve = False
        self.prev_time: float | None = None

        for check in scenario.monitor.checks:
            token = check.token
            off = token in self.disabled
            if token == "stop" and not off:
                arc, _ = geo.project_onto_polyline(self.path, tuple(check.params["point"]))
                self.stop_arc = arc
            elif token == "yield" and not off:
                self.yield_polygon = [tuple(p) for p in check.params["conflict_region"]["polygon"]]
                self.yield_entry_arc = _entry_arc(self.path, self.yield_polygon)
                self.yield_privileged = frozenset(check.params.get("privileged", ()))
            elif token == "decelerate" and not off:
                self.trigger_polygon = [tuple(p) for p in check.params["trigger_region"]["polygon"]]
            elif token == "speed limit" and not off:
                self.speed_cap = float(check.params["limit_mps"])
            elif token == "keep safe distance":
                # the violator still tracks the lead, just at a rude gap
                self.lead_id = check.params["lead_id"]
            elif token == "keep lane" and off:
                self.swerve = True
            elif token.startswith("change lane") and off:
                self.path = self._refuse_lane_change(scenario, graph, check.params)

        self._yield_exempt = frozenset()
        if "yield" in self.disabled:
            for check in scenario.monitor.checks:
                if check.token == "yield":
                    self._yield_exempt = frozenset(check.params.get("privileged", ()))

    def _refuse_lane_change(self, scenario, graph, params) -> list[tuple[float, float]]:
        # follow the source lane to its end instead of taking the connector
        from_lane = params["from_lane"]
        segs = sorted(
            rid for rid, r in graph.routes.items() if r.lane_id == from_lane
        )
        pts = [graph.routes[segs[0]].start]
        for rid in segs:
            pts.append(graph.routes[rid].end)
        return pts

    # -- per-frame control ---------------------------------------------------

    def act(self, obs: Observation) -> Control:
        dt = 0.0
        if self.prev_time is not None:
            dt = obs.time - self.prev_time
        self.prev_time = obs.time

        pos = obs.ego.position
        v = obs.ego.speed
        s, _ = geo.project_onto_polyline(self.path, pos)
        target_v = self.cfg.cruise_speed_mps

        if self.speed_cap is not None and "speed limit" not in self.disabled:
            target_v = min(target_v, self.speed_cap)

        target_v = min(target_v, self._trigger_speed(pos, v))
        target_v = min(target_v, self._traffic_speed(obs, s))

        holds = []
        d_stop = self._stop_hold(s, v, dt)
        if d_stop is not None:
            holds.append(d_stop)
        d_yield = self._yield_hold(s, obs)
        if d_yield is not None:
            holds.append(d_yield)

        curvature = self._steer(obs, s)
        lat_cap = math.sqrt(_LAT_ACCEL_MAX / max(abs(curvature), 1e-6))
        target_v = min(target_v, lat_cap)

        accel = _SPEED_KP * (target_v - v)
        for d in holds:
            accel = min(accel, self._hold_accel(d, v))
        return Control(accel, curvature)

    @staticmethod
    def _hold_accel(d: float, v: float) -> float:
        """Accel that settles the ego at a point `d` meters ahead: a gentle
        approach profile plus the exact constant-decel feedforward, so the
        tracking lag of the P term cannot blow through the hold point."""
        d = max(d, 0.0)
        a = _SPEED_KP * (_braking_speed(d) - v)
        if v > 0.05:
            ff = -v * v / (2.0 * max(d, 0.05))
            if ff <= -1.0:
                a = min(a, ff)
        elif d < 0.5:
            a = min(a, -0.5)  # parked at the hold point
        return a

    def _stop_hold(self, s: float, v: float, dt: float) -> float | None:
        if self.stop_arc is None or self.stop_done:
            return None
        if s > self.stop_arc + 0.2:
            self.stop_done = True
            return None
        d = (self.stop_arc - 1.0) - s
        if d < 0.6 and v < 0.05:
            self.stop_dwell += dt
            if self.stop_dwell >= _HOLD_S:
                self.stop_done = True
                return None
        return d

    def _yield_hold(self, s: float, obs: Observation) -> float | None:
        if self.yield_polygon is None or self.yield_entry_arc is None:
            return None
        if s >= self.yield_entry_arc - 0.5:
            return None  # committed; stopping inside would be worse
        if not self._yield_threat(obs):
            return None
        return (self.yield_entry_arc - 2.0) - s

    def _yield_threat(self, obs: Observation) -> bool:
        center = _centroid(self.yield_polygon)
        horizon = self.thresholds.yield_horizon_s + 1.0
        for other in obs.others:
            if other.actor_id not in self.yield_privileged:
                continue
            if geo.point_in_polygon(other.position, self.yield_polygon):
                return True
            if other.speed < 0.1:
                continue
            to_center = (center[0] - other.x, center[1] - other.y)
            vel = (other.speed * math.cos(other.heading), other.speed * math.sin(other.heading))
            if geo.dot(vel, to_center) <= 0:
                continue
            if geo.dist(other.position, center) / other.speed <= horizon + 2.0:
                return True
        return False

    def _trigger_speed(self, pos, v: float) -> float:
        if self.trigger_polygon is None or "decelerate" in self.disabled:
            return math.inf
        if geo.point_in_polygon(pos, self.trigger_polygon):
            if self.trigger_entry_speed is None:
                self.trigger_entry_speed = v
            floor = self.trigger_entry_speed - self.thresholds.decel_drop_mps - 0.5
            return max(floor, 1.0)
        return math.inf

    def _traffic_speed(self, obs: Observation, s: float) -> float:
        """Gap keeping on the lead vehicle plus a crude brake for anything
        else sitting on the ego's corridor."""
        ego = obs.ego
        best = math.inf
        for other in obs.others:
            gap = geo.dist(ego.position, other.position) - (ego.length + other.length) / 2.0
            if other.actor_id == self.lead_id:
                if "keep safe distance" in self.disabled:
                    desired = 7.0
                else:
                    safe = max(
                        self.thresholds.min_gap_m,
                        ego.speed * self.thresholds.headway_s * self.headway_multiplier,
                    )
                    desired = 1.25 * safe
                best = min(best, max(0.0, other.speed + 0.8 * (gap - desired)))
                continue
            if other.actor_id in self._yield_exempt:
                continue
            arc_o, lat_o = geo.project_onto_polyline(self.path, other.position)
            if arc_o <= s + 0.5 or arc_o - s > 15.0:
                continue
            if lat_o > (ego.width + other.width) / 2.0 + 0.4:
                continue
            best = min(best, max(0.0, 0.6 * (gap - 5.0)))
        return best

    def _steer(self, obs: Observation, s: float) -> float:
        lookahead = 4.0 + 0.5 * obs.ego.speed
        t0, t1 = _SWERVE_WINDOW
        if self.swerve and t0 <= obs.time <= t1:
            target, _ = geo.point_at_arc(self.path, s + lookahead)
            _, heading = geo.point_at_arc(self.path, s)
            target = (
                target[0] - _SWERVE_OFFSET * math.sin(heading),
                target[1] + _SWERVE_OFFSET * math.cos(heading),
            )
            chord = geo.dist(obs.ego.position, target)
            if chord < 1e-9:
                return 0.0
            alpha = geo.normalize_angle(
                geo.angle_of(target[0] - obs.ego.x, target[1] - obs.ego.y) - obs.ego.heading
            )
            return 2.0 * math.sin(alpha) / chord
        return pursuit_curvature(self.path, obs.ego.position, obs.ego.heading, lookahead)


def compliant_ads(cfg: SimConfig = SimConfig()) -> CompliantAgent:
    return CompliantAgent(cfg)


def violator_ads(tokens, cfg: SimConfig = SimConfig()) -> CompliantAgent:
    cleaned = frozenset(normalize_token(t) for t in tokens)
    return CompliantAgent(cfg, disabled=cleaned)


class StdioAgent:
    """Line-delimited JSON bridge to an external controller process.

    One observation object per line on the child's stdin; the child answers
    each with one line {"accel": a, "curvature": k}.  Any protocol hiccup
    raises, which the simulator records as an agent failure.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self.agent_id = "stdio:" + (self.command[0] if self.command else "?")
        self.proc: subprocess.Popen | None = None

    def reset(self, scenario: ConcreteScenario, graph: RouteGraph) -> None:
        self.close()
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._send({
            "type": "reset",
            "scenario_id": scenario.scenario_id,
            "map_id": scenario.map_id,
            "destination": list(scenario.ego.destination),
        })

    def act(self, obs: Observation) -> Control:
        self._send({
            "type": "observation",
            "time": obs.time,
            "ego": self._actor(obs.ego),
            "others": [self._actor(a) for a in obs.others],
            "path_ahead": [list(p) for p in obs.path_ahead],
            "destination": list(obs.destination),
            "lateral_offset": obs.lateral_offset,
            "signs_ahead": [
                {"token": s.token, "distance_m": s.distance_m, "value": s.value}
                for s in obs.signs_ahead
            ],
        })
        assert self.proc and self.proc.stdout
        line = self.proc.stdout.readline()
        if not line:
            raise AgentError("controller process closed its stdout")
        reply = json.loads(line)
        return Control(float(reply["accel"]), float(reply["curvature"]))

    @staticmethod
    def _actor(a) -> dict:
        return {
            "id": a.actor_id, "x": a.x, "y": a.y, "heading": a.heading,
            "speed": a.speed, "length": a.length, "width": a.width,
            "lane_id": a.lane_id,
        }

    def _send(self, obj: dict) -> None:
        assert self.proc and self.proc.stdin
        self.proc.stdin.write(json.dumps(obj) + "\n")
        self.proc.stdin.flush()

    def close(self) -> None:
        if self.proc is not None:
            try:
                if self.proc.stdin:
                    self.proc.stdin.close()
                self.proc.terminate()
                self.proc.wait(timeout=5)
            except Exception:
                pass
            self.proc = None
