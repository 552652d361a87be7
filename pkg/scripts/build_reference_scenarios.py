#!/usr/bin/env python3
"""Build the committed reference scenarios under scenarios/.

Five scenarios, one per core longitudinal/lateral check, all solvable by the
built-in compliant controller within the time limit.  Four come straight from
the generator; the car-following one is laid out by hand because the
generated variant parks the lead vehicle on top of the ego destination, which
no follower could ever reach.

Each scenario is verified on the spot: the compliant controller must finish
clean, and the matching single-check violator must trip exactly its own
check.  Run from the repository root:

    python3 scripts/build_reference_scenarios.py [--out scenarios]
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from rulescene import simulate
from rulescene.agents import compliant_ads, violator_ads
from rulescene.config import SimConfig, Thresholds
from rulescene.dsl import EmptyOracleWarning, parse_scenario_text
from rulescene.mapmodel import build_routes, load_map
from rulescene.monitor import make_report
from rulescene.scenario import (
    CheckSpec,
    ConcreteScenario,
    EgoSetup,
    MonitorConfig,
    NpcScript,
    Pose,
    save_scenario,
)
from rulescene.scenariogen import generate, generate_all, resolve_environment
from rulescene.dsl import Environment


def _rep(text: str):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        return parse_scenario_text(text)


STOP_DOC = (ROOT / "rules" / "gold" / "stop_tee.rep.txt").read_text("utf-8")

YIELD_DOC = """\
environment:
  weather: none
  time: none
road_network:
  road_type: intersection
  road_marker: none
  traffic_signs: []
actors:
  ego:
    type: car
    behavior: go forward
    position:
      reference: intersection
      relation: behind
  npc_actors:
    - type: car
      behavior: go forward
      position:
        reference: ego vehicle
        relation: front
oracle:
  longitudinal: [yield]
  lateral: []
"""

KEEP_LANE_DOC = """\
environment:
  weather: none
  time: none
road_network:
  road_type: multi-lane road
  road_marker: solid line
  traffic_signs: []
actors:
  ego:
    type: car
    behavior: go forward
    position:
      reference: multi-lane road
      relation: on
  npc_actors: []
oracle:
  longitudinal: []
  lateral: [keep lane]
"""

SPEED_DOC = """\
environment:
  weather: none
  time: none
road_network:
  road_type: none
  road_marker: none
  traffic_signs: [speed limit sign]
actors:
  ego:
    type: car
    behavior: go forward
    position:
      reference: multi-lane road
      relation: on
  npc_actors: []
oracle:
  longitudinal: [speed limit]
  lateral: []
"""


def safe_distance_scenario(graph) -> ConcreteScenario:
    """Hand-placed follower scenario on the straight two-lane map.

    The ego starts at the west end of lane a with its destination at
    x = 150; the lead car starts 60 m ahead on the same lane, drives at
    4 m/s and keeps going past the destination, so the ego can finish
    while holding a fog-sized gap the whole way.
    """
    ego_chain = tuple(f"lane:a:{i:03d}" for i in range(15))      # 0..150 m
    npc_chain = tuple(f"lane:a:{i:03d}" for i in range(6, 20))   # 60..200 m
    for rid in ego_chain + npc_chain:
        assert rid in graph.routes, rid
    env = Environment(weather="foggy", time="none")
    return ConcreteScenario(
        scenario_id="safe_distance_ref--straight2--lane-a-000",
        rule_id="foggy_distance",
        map_id="straight2",
        environment=resolve_environment(env),
        ego=EgoSetup(
            pose=Pose(0.0, 0.0, 0.0),
            route_id="lane:a:000",
            route_ids=ego_chain,
            destination_wp="w0015",
            destination=(150.0, 0.0),
        ),
        npc_scripts=(
            NpcScript(
                actor_id="npc0",
                actor_type="car",
                behavior="go forward",
                pose=Pose(60.0, 0.0, 0.0),
                route_ids=npc_chain,
                target_speed_mps=4.0,
            ),
        ),
        monitor=MonitorConfig(
            checks=(
                CheckSpec(
                    "keep safe distance", "longitudinal", {"lead_id": "npc0"}
                ),
            ),
            time_limit_s=SimConfig().time_limit_s,
            headway_multiplier=1.5,
            thresholds=Thresholds(),
        ),
    )


def probe(scn: ConcreteScenario, graph, token: str) -> str | None:
    """None when the scenario discriminates cleanly, else what went wrong."""
    cfg = SimConfig()
    trace = simulate.run(scn, graph, compliant_ads(cfg), cfg)
    report = make_report(trace, scn.monitor)
    if report.verdict != "pass":
        return f"compliant verdict {report.verdict}: {report.rule_violations}"
    if trace.status != simulate.STATUS_REACHED:
        return f"compliant status {trace.status}"
    reached_in = trace.duration_s

    trace = simulate.run(scn, graph, violator_ads([token], cfg), cfg)
    report = make_report(trace, scn.monitor)
    flagged = [v.check for v in report.rule_violations]
    if flagged != [token]:
        return f"violator flagged {flagged}, wanted [{token!r}]"
    print(f"  ok  compliant reached in {reached_in:.1f}s, violator trips {token!r}")
    return None


def verify(scn: ConcreteScenario, graph, token: str) -> None:
    problem = probe(scn, graph, token)
    assert problem is None, (scn.scenario_id, problem)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "scenarios"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    graphs = {
        mid: build_routes(load_map(ROOT / "maps" / f"{mid}.map.json"))
        for mid in ("tee3", "cross4", "straight2")
    }

    jobs = []

    scn = generate(_rep(STOP_DOC), graphs["tee3"], rule_id="stop_tee")
    jobs.append(("stop_ref", scn, graphs["tee3"], "stop"))

    # several approach directions satisfy the document; keep the first whose
    # crossing geometry separates compliant from violating behavior
    yield_pick = None
    for cand in generate_all(_rep(YIELD_DOC), graphs["cross4"], rule_id="yield_ref"):
        problem = probe(cand, graphs["cross4"], "yield")
        if problem is None:
            yield_pick = cand
            break
        print(f"  skip {cand.scenario_id}: {problem}")
    assert yield_pick is not None, "no yield candidate discriminates on cross4"
    jobs.append(("yield_ref", yield_pick, graphs["cross4"], "yield"))

    scn = generate(_rep(KEEP_LANE_DOC), graphs["straight2"], rule_id="keep_lane_ref")
    jobs.append(("keep_lane_ref", scn, graphs["straight2"], "keep lane"))

    scn = generate(_rep(SPEED_DOC), graphs["straight2"], rule_id="speed_limit_ref")
    jobs.append(("speed_limit_ref", scn, graphs["straight2"], "speed limit"))

    jobs.append(
        ("safe_distance_ref", safe_distance_scenario(graphs["straight2"]),
         graphs["straight2"], "keep safe distance")
    )

    for name, scn, graph, token in jobs:
        print(f"{name}: {scn.scenario_id}")
        verify(scn, graph, token)
        save_scenario(scn, out / f"{name}.scn.json")
    print(f"{len(jobs)} scenarios under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
