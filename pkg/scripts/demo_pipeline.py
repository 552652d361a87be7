#!/usr/bin/env python3
"""End-to-end walkthrough: rule text to verdicts, all offline.

Takes one rule from rules/texts, parses it against the recorded model
responses, instantiates it on every bundled map, then drives the first
scenario with the compliant controller and with a violating one, printing
both reports.  Run from the repository root:

    python3 scripts/demo_pipeline.py [--rule stop_tee]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from rulescene import simulate
from rulescene.agents import compliant_ads, violator_ads
from rulescene.backends import ReplayBackend
from rulescene.catalog import default_catalog
from rulescene.config import SimConfig
from rulescene.dsl import serialize_scenario
from rulescene.mapmodel import build_routes, load_map
from rulescene.monitor import make_report, render_table
from rulescene.ruleparse import load_default_example, parse_rule
from rulescene.scenariogen import GenerationError, generate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rule", default="stop_tee", help="name under rules/texts")
    args = ap.parse_args()

    rule_text = (ROOT / "rules" / "texts" / f"{args.rule}.txt").read_text("utf-8").strip()
    print(f"rule: {rule_text}\n")

    backend = ReplayBackend(ROOT / "fixtures" / "llm")
    session = parse_rule(rule_text, backend, default_catalog(), load_default_example())
    print("parsed scenario representation:")
    print(serialize_scenario(session.aligned))

    scenario = None
    graph = None
    for map_file in sorted((ROOT / "maps").glob("*.map.json")):
        g = build_routes(load_map(map_file))
        try:
            scenario = generate(session.aligned, g, rule_id=args.rule)
        except GenerationError as e:
            print(f"{g.lane_map.map_id}: {e}")
            continue
        graph = g
        print(f"{g.lane_map.map_id}: instantiated as {scenario.scenario_id}")
        break
    if scenario is None:
        print("\nno bundled map supports this rule")
        return 3

    token = None
    for check in scenario.monitor.checks:
        token = check.token
        break

    cfg = SimConfig()
    for agent in (compliant_ads(cfg), violator_ads([token], cfg) if token else None):
        if agent is None:
            continue
        trace = simulate.run(scenario, graph, agent, cfg)
        report = make_report(trace, scenario.monitor)
        print()
        print(render_table(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
