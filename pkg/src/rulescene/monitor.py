"""Trace evaluation: oracle checks, collision scan, and the timeout verdict.

Every check is a pure function of (trace, params, thresholds) returning an
optional Violation plus an `exercised` flag.  A check that never saw its
trigger condition reports no violation, but the report lists it under
`not_exercised` so a timeout is not mistaken for compliance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

from . import geometry as geo
from .config import Thresholds
from .scenario import MonitorConfig
from .simulate import EGO_ID, ActorState, TraceLog

REPORT_SCHEMA = "target.report.v1"

VERDICT_ORDER = ("collision", "rule_violation", "timeout", "pass")


class MonitorError(Exception):
    pass


class UnknownCheck(MonitorError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"no oracle check registered for {token!r}")


@dataclass(frozen=True)
class Violation:
    check: str
    first_frame: int
    last_frame: int
    measured: dict
    message: str

    def __post_init__(self):
        if self.first_frame > self.last_frame:
            raise ValueError("violation frame range reversed")


@dataclass(frozen=True)
class CollisionEvent:
    actor_id: str
    first_frame: int
    last_frame: int
    max_penetration_m: float


@dataclass(frozen=True)
class TestReport:
    scenario_id: str
    rule_id: str
    map_id: str
    agent_id: str
    status: str
    rule_violations: tuple[Violation, ...]
    collisions: tuple[CollisionEvent, ...]
    timeout: bool
    checks_run: tuple[str, ...]
    not_exercised: tuple[str, ...]
    time_limit_s: float
    headway_multiplier: float
    thresholds: Thresholds

    @property
    def verdict(self) -> str:
        if self.collisions:
            return "collision"
        if self.rule_violations:
            return "rule_violation"
        if self.timeout:
            return "timeout"
        return "pass"


# ---------------------------------------------------------------------------
# frame plumbing

def _series(trace: TraceLog, actor_id: str) -> list[ActorState | None]:
    """Per-frame state of one actor, index-aligned with trace.frames."""
    out: list[ActorState | None] = []
    for frame in trace.frames:
        hit = None
        for a in frame.actors:
            if a.actor_id == actor_id:
                hit = a
                break
        out.append(hit)
    return out


def _episodes(flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Contiguous runs of True as (first, last) index pairs."""
    runs = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def _inside_flags(states: Sequence[ActorState | None], polygon) -> list[bool]:
    return [
        s is not None and geo.point_in_polygon(s.position, polygon)
        for s in states
    ]


# ---------------------------------------------------------------------------
# oracle checks

def check_stop(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """Pass iff the ego dwells below the stop speed inside the stop zone for
    the dwell time before it first crosses the stop line."""
    point = tuple(params["point"])
    direction = tuple(params["direction"])
    ego = _series(trace, EGO_ID)
    arcs = [
        geo.dot((s.x - point[0], s.y - point[1]), direction) if s else None
        for s in ego
    ]

    crossing = None
    for i in range(1, len(arcs)):
        if arcs[i - 1] is not None and arcs[i] is not None:
            if arcs[i - 1] < 0.0 <= arcs[i]:
                crossing = i
                break

    horizon = crossing if crossing is not None else len(arcs)
    in_zone = [
        a is not None and -th.stop_zone_m <= a < 0.0 for a in arcs[:horizon]
    ]
    exercised = crossing is not None or any(in_zone)

    needed = max(1, int(round(th.stop_dwell_s / trace.dt_s)))
    best_run = 0
    run = 0
    for i, flag in enumerate(in_zone):
        if flag and ego[i] is not None and ego[i].speed < th.stop_speed_mps:
            run += 1
            best_run = max(best_run, run)
        else:
            run = 0

    if crossing is None or best_run >= needed:
        return None, exercised
    speed = ego[crossing].speed if ego[crossing] else float("nan")
    return (
        Violation(
            check="stop",
            first_frame=crossing,
            last_frame=crossing,
            measured={
                "crossing_speed_mps": speed,
                "longest_dwell_s": round(best_run * trace.dt_s, 6),
            },
            message=(
                f"crossed the stop line at {speed:.2f} m/s after dwelling only "
                f"{best_run * trace.dt_s:.2f} s below {th.stop_speed_mps} m/s"
            ),
        ),
        True,
    )


def check_yield(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """Fail on conflict-region co-occupancy with a privileged actor, or on
    entering less than the yield horizon before that actor's entry."""
    polygon = [tuple(p) for p in params["conflict_region"]["polygon"]]
    privileged = list(params.get("privileged", ()))
    ego_in = _inside_flags(_series(trace, EGO_ID), polygon)

    exercised = False
    for npc_id in privileged:
        npc_in = _inside_flags(_series(trace, npc_id), polygon)
        if any(npc_in):
            exercised = True
        both = [a and b for a, b in zip(ego_in, npc_in)]
        runs = _episodes(both)
        if runs:
            first, last = runs[0]
            t = round(first * trace.dt_s, 6)
            return (
                Violation(
                    check="yield",
                    first_frame=first,
                    last_frame=last,
                    measured={"actor_id": npc_id, "co_occupancy_from_s": t},
                    message=f"shared the conflict region with {npc_id} from t={t:.2f} s",
                ),
                True,
            )
        horizon = int(round(th.yield_horizon_s / trace.dt_s))
        npc_entries = [a for a, _ in _episodes(npc_in)]
        for ego_entry, _ in _episodes(ego_in):
            for npc_entry in npc_entries:
                if npc_entry - horizon <= ego_entry <= npc_entry:
                    return (
                        Violation(
                            check="yield",
                            first_frame=ego_entry,
                            last_frame=npc_entry,
                            measured={
                                "actor_id": npc_id,
                                "cut_off_margin_s": round(
                                    (npc_entry - ego_entry) * trace.dt_s, 6
                                ),
                            },
                            message=(
                                f"entered the conflict region "
                                f"{(npc_entry - ego_entry) * trace.dt_s:.2f} s "
                                f"ahead of {npc_id}"
                            ),
                        ),
                        True,
                    )
    return None, exercised


def check_decelerate(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """The ego must shed at least the configured speed inside the trigger
    region, measured from its entry speed to its minimum before exit."""
    polygon = [tuple(p) for p in params["trigger_region"]["polygon"]]
    ego = _series(trace, EGO_ID)
    runs = _episodes(_inside_flags(ego, polygon))
    if not runs:
        return None, False
    first, last = runs[0]
    window = [s.speed for s in ego[first:last + 1] if s is not None]
    entry_speed = window[0]
    drop = entry_speed - min(window)
    if drop >= th.decel_drop_mps:
        return None, True
    return (
        Violation(
            check="decelerate",
            first_frame=first,
            last_frame=last,
            measured={
                "entry_speed_mps": entry_speed,
                "min_speed_mps": min(window),
                "drop_mps": drop,
            },
            message=(
                f"speed dropped {drop:.2f} m/s across the trigger region, "
                f"needed {th.decel_drop_mps:.2f}"
            ),
        ),
        True,
    )


def check_safe_distance(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """Same-lane bumper gap to the lead actor must stay over
    max(minimum gap, ego speed x headway x weather multiplier)."""
    lead_id = params["lead_id"]
    ego = _series(trace, EGO_ID)
    lead = _series(trace, lead_id)

    exercised = False
    offending: list[bool] = []
    worst = None  # (gap, threshold, index)
    for i, (e, l) in enumerate(zip(ego, lead)):
        ok_lane = (
            e is not None and l is not None
            and e.lane_id is not None and e.lane_id == l.lane_id
        )
        if not ok_lane:
            offending.append(False)
            continue
        exercised = True
        gap = geo.dist(e.position, l.position) - (e.length + l.length) / 2.0
        limit = max(th.min_gap_m, e.speed * th.headway_s * multiplier)
        bad = gap < limit
        offending.append(bad)
        if bad and (worst is None or gap - limit < worst[0] - worst[1]):
            worst = (gap, limit, i)
    runs = _episodes(offending)
    if not runs:
        return None, exercised
    first = runs[0][0]
    last = runs[-1][1]
    gap, limit, _ = worst
    return (
        Violation(
            check="keep safe distance",
            first_frame=first,
            last_frame=last,
            measured={
                "min_gap_m": gap,
                "required_gap_m": limit,
                "headway_multiplier": multiplier,
            },
            message=(
                f"followed {lead_id} at {gap:.2f} m where "
                f"{limit:.2f} m was required"
            ),
        ),
        True,
    )


def check_keep_lane(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """Centerline offset must stay under half the lane width minus the
    margin; single-frame blips are debounced away."""
    centerline = [tuple(p) for p in params["centerline"]]
    limit = params["width"] / 2.0 - th.lane_margin_m
    ego = _series(trace, EGO_ID)
    offsets = [
        geo.project_onto_polyline(centerline, s.position)[1] if s else 0.0
        for s in ego
    ]
    out = [o > limit for o in offsets]
    for first, last in _episodes(out):
        if last - first + 1 >= th.debounce_frames:
            peak = max(offsets[first:last + 1])
            return (
                Violation(
                    check="keep lane",
                    first_frame=first,
                    last_frame=last,
                    measured={"max_offset_m": peak, "allowed_m": limit},
                    message=(
                        f"left the lane corridor for "
                        f"{(last - first + 1) * trace.dt_s:.2f} s, "
                        f"peak offset {peak:.2f} m (allowed {limit:.2f})"
                    ),
                ),
                True,
            )
    return None, bool(ego)


def check_lane_change(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """The ego must occupy the target lane at some point after having been
    on the source lane."""
    token = "change lane to " + params["direction"]
    from_lane = params["from_lane"]
    to_lane = params["to_lane"]
    seen_from = False
    for s in _series(trace, EGO_ID):
        if s is None:
            continue
        if s.lane_id == from_lane:
            seen_from = True
        elif seen_from and s.lane_id == to_lane:
            return None, True
    last = len(trace.frames) - 1
    return (
        Violation(
            check=token,
            first_frame=last,
            last_frame=last,
            measured={"from_lane": from_lane, "to_lane": to_lane},
            message=f"never moved from {from_lane} to {to_lane}",
        ),
        True,
    )


def check_speed_limit(
    trace: TraceLog, params: dict, th: Thresholds, multiplier: float = 1.0
) -> tuple[Violation | None, bool]:
    """Ego speed must stay within tolerance of the limit once past the sign."""
    limit = float(params["limit_mps"])
    start = tuple(params["start"])
    direction = tuple(params["direction"])
    ego = _series(trace, EGO_ID)
    in_span = [
        s is not None and geo.dot((s.x - start[0], s.y - start[1]), direction) >= 0.0
        for s in ego
    ]
    allowed = limit + th.speed_tolerance_mps
    over = [f and ego[i].speed > allowed for i, f in enumerate(in_span)]
    runs = _episodes(over)
    if not runs:
        return None, any(in_span)
    first = runs[0][0]
    last = runs[-1][1]
    peak = max(ego[i].speed for i in range(first, last + 1) if over[i])
    return (
        Violation(
            check="speed limit",
            first_frame=first,
            last_frame=last,
            measured={"max_speed_mps": peak, "limit_mps": limit},
            message=f"reached {peak:.2f} m/s where the limit is {limit:.2f} m/s",
        ),
        True,
    )


CHECKS: dict[str, Callable] = {
    "stop": check_stop,
    "yield": check_yield,
    "decelerate": check_decelerate,
    "keep safe distance": check_safe_distance,
    "keep lane": check_keep_lane,
    "change lane to left": check_lane_change,
    "change lane to right": check_lane_change,
    "speed limit": check_speed_limit,
}


# ---------------------------------------------------------------------------
# collisions

def detect_collisions(trace: TraceLog) -> tuple[CollisionEvent, ...]:
    """Separating-axis overlap between the ego and every other actor,
    contiguous overlapping frames coalesced per actor."""
    ego = _series(trace, EGO_ID)
    others = sorted(
        {a.actor_id for f in trace.frames for a in f.actors} - {EGO_ID}
    )
    events = []
    for npc_id in others:
        npc = _series(trace, npc_id)
        depths = []
        for e, n in zip(ego, npc):
            if e is None or n is None:
                depths.append(None)
                continue
            depths.append(geo.obb_overlap(e.corners(), n.corners()))
        for first, last in _episodes([d is not None for d in depths]):
            events.append(
                CollisionEvent(
                    actor_id=npc_id,
                    first_frame=first,
                    last_frame=last,
                    max_penetration_m=max(depths[first:last + 1]),
                )
            )
    events.sort(key=lambda ev: (ev.first_frame, ev.actor_id))
    return tuple(events)


# ---------------------------------------------------------------------------
# the report

def make_report(trace: TraceLog, cfg: MonitorConfig) -> TestReport:
    violations = []
    idle = []
    for check in cfg.checks:
        fn = CHECKS.get(check.token)
        if fn is None:
            raise UnknownCheck(check.token)
        violation, exercised = fn(
            trace, check.params, cfg.thresholds, cfg.headway_multiplier
        )
        if violation is not None:
            violations.append(violation)
        elif not exercised:
            idle.append(check.token)
    collisions = detect_collisions(trace) if cfg.collision_check else ()
    return TestReport(
        scenario_id=trace.scenario_id,
        rule_id=trace.rule_id,
        map_id=trace.map_id,
        agent_id=trace.agent_id,
        status=trace.status,
        rule_violations=tuple(violations),
        collisions=collisions,
        timeout=trace.status == "timeout",
        checks_run=tuple(c.token for c in cfg.checks),
        not_exercised=tuple(idle),
        time_limit_s=cfg.time_limit_s,
        headway_multiplier=cfg.headway_multiplier,
        thresholds=cfg.thresholds,
    )


def report_to_jsonable(report: TestReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "scenario_id": report.scenario_id,
        "rule_id": report.rule_id,
        "map_id": report.map_id,
        "agent_id": report.agent_id,
        "status": report.status,
        "verdict": report.verdict,
        "timeout": report.timeout,
        "rule_violations": [asdict(v) for v in report.rule_violations],
        "collisions": [asdict(c) for c in report.collisions],
        "checks_run": list(report.checks_run),
        "not_exercised": list(report.not_exercised),
        "summary": {
            "n_rule_violations": len(report.rule_violations),
            "n_collisions": len(report.collisions),
            "timeout": report.timeout,
        },
        "config": {
            "time_limit_s": report.time_limit_s,
            "headway_multiplier": report.headway_multiplier,
            "thresholds": asdict(report.thresholds),
        },
    }


def save_report(report: TestReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_table(report: TestReport) -> str:
    """Small fixed-width summary for terminal output."""
    lines = [
        f"scenario {report.scenario_id}  map {report.map_id}  agent {report.agent_id}",
        f"status {report.status}  verdict {report.verdict}",
        f"{'check':<24} {'result':<10} detail",
        "-" * 64,
    ]
    flagged = {v.check: v for v in report.rule_violations}
    idle = set(report.not_exercised)
    for check in dict.fromkeys(report.checks_run):
        if check in flagged:
            lines.append(f"{check:<24} {'VIOLATED':<10} {flagged[check].message}")
        elif check in idle:
            lines.append(f"{check:<24} {'untested':<10} trigger never reached")
        else:
            lines.append(f"{check:<24} {'ok':<10}")
    lines.append(
        f"{'collision':<24} "
        f"{('HIT' if report.collisions else 'clear'):<10} "
        + (
            f"{len(report.collisions)} event(s), first with "
            f"{report.collisions[0].actor_id}" if report.collisions else ""
        )
    )
    lines.append(
        f"{'timeout':<24} {('YES' if report.timeout else 'no'):<10}"
    )
    return "\n".join(lines)
