"""Concrete scenario artifacts: what the generator emits and the simulator
consumes. Serialized as versioned JSON (*.scn.json).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import Thresholds

SCN_SCHEMA = "scenario.v1"


class ScenarioFormatError(Exception):
    pass


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class CheckSpec:
    """One oracle check with its geometric anchors resolved onto the map."""

    token: str
    axis: str  # longitudinal | lateral
    params: dict

    def __post_init__(self):
        if self.axis not in ("longitudinal", "lateral"):
            raise ValueError(f"bad check axis: {self.axis!r}")


@dataclass(frozen=True)
class MonitorConfig:
    checks: tuple[CheckSpec, ...] = ()
    time_limit_s: float = 60.0
    headway_multiplier: float = 1.0
    collision_check: bool = True
    thresholds: Thresholds = field(default_factory=Thresholds)


@dataclass(frozen=True)
class EgoSetup:
    pose: Pose
    route_id: str                 # the matched ego route
    route_ids: tuple[str, ...]    # full driving chain, spawn route included
    destination_wp: str
    destination: tuple[float, float]


@dataclass(frozen=True)
class NpcScript:
    actor_id: str
    actor_type: str
    behavior: str
    pose: Pose
    route_ids: tuple[str, ...]
    target_speed_mps: float


@dataclass(frozen=True)
class ConcreteScenario:
    scenario_id: str
    rule_id: str
    map_id: str
    environment: dict[str, float]
    ego: EgoSetup
    npc_scripts: tuple[NpcScript, ...] = ()
    monitor: MonitorConfig = field(default_factory=MonitorConfig)


# ---------------------------------------------------------------------------
# JSON round trip

def _pose_out(p: Pose) -> dict:
    return {"x": p.x, "y": p.y, "heading": p.heading}


def scenario_to_jsonable(scn: ConcreteScenario) -> dict:
    return {
        "schema": SCN_SCHEMA,
        "scenario_id": scn.scenario_id,
        "rule_id": scn.rule_id,
        "map_id": scn.map_id,
        "environment": dict(sorted(scn.environment.items())),
        "ego": {
            "pose": _pose_out(scn.ego.pose),
            "route_id": scn.ego.route_id,
            "route_ids": list(scn.ego.route_ids),
            "destination_wp": scn.ego.destination_wp,
            "destination": list(scn.ego.destination),
        },
        "npc_scripts": [
            {
                "actor_id": n.actor_id,
                "actor_type": n.actor_type,
                "behavior": n.behavior,
                "pose": _pose_out(n.pose),
                "route_ids": list(n.route_ids),
                "target_speed_mps": n.target_speed_mps,
            }
            for n in scn.npc_scripts
        ],
        "monitor": {
            "time_limit_s": scn.monitor.time_limit_s,
            "headway_multiplier": scn.monitor.headway_multiplier,
            "collision_check": scn.monitor.collision_check,
            "thresholds": dataclasses.asdict(scn.monitor.thresholds),
            "checks": [
                {"token": c.token, "axis": c.axis, "params": c.params}
                for c in scn.monitor.checks
            ],
        },
    }


def scenario_to_json(scn: ConcreteScenario) -> str:
    return json.dumps(scenario_to_jsonable(scn), indent=2, sort_keys=True) + "\n"


def _pose_in(d: dict) -> Pose:
    return Pose(x=float(d["x"]), y=float(d["y"]), heading=float(d["heading"]))


def scenario_from_jsonable(data: dict) -> ConcreteScenario:
    try:
        if data.get("schema") != SCN_SCHEMA:
            raise ScenarioFormatError(
                f"unsupported scenario schema: {data.get('schema')!r}"
            )
        mon = data["monitor"]
        return ConcreteScenario(
            scenario_id=data["scenario_id"],
            rule_id=data["rule_id"],
            map_id=data["map_id"],
            environment={k: float(v) for k, v in data["environment"].items()},
            ego=EgoSetup(
                pose=_pose_in(data["ego"]["pose"]),
                route_id=data["ego"]["route_id"],
                route_ids=tuple(data["ego"]["route_ids"]),
                destination_wp=data["ego"]["destination_wp"],
                destination=tuple(data["ego"]["destination"]),
            ),
            npc_scripts=tuple(
                NpcScript(
                    actor_id=n["actor_id"],
                    actor_type=n["actor_type"],
                    behavior=n["behavior"],
                    pose=_pose_in(n["pose"]),
                    route_ids=tuple(n["route_ids"]),
                    target_speed_mps=float(n["target_speed_mps"]),
                )
                for n in data["npc_scripts"]
            ),
            monitor=MonitorConfig(
                checks=tuple(
                    CheckSpec(token=c["token"], axis=c["axis"], params=c["params"])
                    for c in mon["checks"]
                ),
                time_limit_s=float(mon["time_limit_s"]),
                headway_multiplier=float(mon["headway_multiplier"]),
                collision_check=bool(mon["collision_check"]),
                thresholds=Thresholds(**mon["thresholds"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioFormatError(f"bad scenario payload: {e}") from e


def save_scenario(scn: ConcreteScenario, path: str | Path) -> None:
    Path(path).write_text(scenario_to_json(scn), "utf-8")


def load_scenario(path: str | Path) -> ConcreteScenario:
    p = Path(path)
    try:
        data = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"{p}: not valid JSON ({e})") from e
    return scenario_from_jsonable(data)
