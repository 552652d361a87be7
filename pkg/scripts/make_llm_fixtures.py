#!/usr/bin/env python3
"""Regenerate the recorded chat-model responses under fixtures/llm.

Each rule in rules/texts gets a scripted conversation: the canned responses
below are fed through the real three-stage parsing pipeline and every
exchange is written out keyed by transcript hash, exactly the layout the
replay backend expects.  Run from the repository root:

    python3 scripts/make_llm_fixtures.py [--out fixtures/llm]

The script fails loudly if any scripted conversation does not reproduce the
reference document in rules/gold, so the recorded corpus and the references
cannot drift apart.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from rulescene.backends import RecordingBackend, ScriptedBackend
from rulescene.catalog import default_catalog
from rulescene.dsl import EmptyOracleWarning, parse_scenario_text, serialize_scenario
from rulescene.ruleparse import load_default_example, parse_rule


def fenced(doc: str, lang: str = "") -> str:
    return f"```{lang}\n{doc}```\n"


def gold_doc(name: str) -> str:
    return (ROOT / "rules" / "gold" / f"{name}.rep.txt").read_text(encoding="utf-8")


def edited(doc: str, old: str, new: str) -> str:
    assert old in doc, f"cannot stage edit, {old!r} not present"
    return doc.replace(old, new)


# Scripted responses per rule, in the order the pipeline consumes them:
# extraction (with optional unparseable lead-ins), then validation, then one
# answer per alignment question.  Texture varies on purpose: some replies
# explain themselves, some are bare documents, one forgets the document and
# has to be nudged.
def conversations() -> dict[str, list[str]]:
    convs: dict[str, list[str]] = {}

    g = gold_doc("stop_tee")
    draft = edited(g, "road_type: t-intersection", "road_type: intersection")
    convs["stop_tee"] = [
        "This rule describes a street that terminates at a through street, "
        "so the ego vehicle must stop first and then yield to cross traffic "
        "before entering.\n\n" + fenced(draft, "yaml"),
        "The ending street makes this a \"T\" intersection, so road_type "
        "should be more specific:\n\n" + fenced(g, "yaml"),
    ]

    g = gold_doc("left_turn_yield")
    convs["left_turn_yield"] = [
        "A left turn across oncoming traffic happens at an intersection; the "
        "oncoming vehicle keeps priority.\n\n" + fenced(g, "yaml"),
        g,
    ]

    g = gold_doc("speed_limit")
    convs["speed_limit"] = [
        "The rule binds the ego vehicle's speed to the value posted on a "
        "speed limit sign. The sign is the only scenario element that needs "
        "to be present; weather, time and road layout are unconstrained.",
        fenced(g),
        g,
    ]

    g = gold_doc("foggy_distance")
    convs["foggy_distance"] = [g, g]

    g = gold_doc("stop_sign")
    convs["stop_sign"] = [
        "Stop-sign rule: the ego vehicle approaches the sign and must come "
        "to a full stop.\n\n" + fenced(g, "yaml"),
        g,
    ]

    g = gold_doc("keep_lane_solid")
    convs["keep_lane_solid"] = [g, fenced(g)]

    g = gold_doc("change_lane_left")
    convs["change_lane_left"] = [
        fenced(g, "yaml"),
        "No corrections needed.\n\n" + fenced(g, "yaml"),
    ]

    g = gold_doc("crosswalk_slow")
    convs["crosswalk_slow"] = [
        "Pedestrians on a crosswalk require the approaching vehicle to slow "
        "down, which maps to a deceleration requirement.\n\n" + fenced(g, "yaml"),
        g,
    ]

    g = gold_doc("railway_stop")
    convs["railway_stop"] = [g, g]

    g = gold_doc("night_rain_speed")
    draft = edited(g, "weather: rainy", "weather: raining")
    convs["night_rain_speed"] = [
        fenced(draft, "yaml"),
        fenced(draft, "yaml"),
        "The closest listed element is rainy.",
    ]

    g = gold_doc("roundabout_yield")
    convs["roundabout_yield"] = [
        "Entering traffic gives way to circulating traffic.\n\n" + fenced(g, "yaml"),
        g,
    ]

    g = gold_doc("go_straight_align")
    draft = edited(g, "behavior: go forward", "behavior: go straight")
    convs["go_straight_align"] = [
        fenced(draft, "yaml"),
        fenced(draft, "yaml"),
        "go forward",
    ]

    g = gold_doc("flashing_beacon")
    convs["flashing_beacon"] = [
        "A flashing red beacon is treated like a stop sign, but the beacon "
        "itself is the scenario element.\n\n" + fenced(g, "yaml"),
        g,
        "None of the listed elements matches a flashing red beacon; keeping "
        "your output element unchanged.",
    ]

    return convs


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "fixtures" / "llm"))
    args = ap.parse_args()

    catalog = default_catalog()
    example = load_default_example()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in out_dir.iterdir():
        stale.unlink()

    total = 0
    for name, responses in sorted(conversations().items()):
        rule = (ROOT / "rules" / "texts" / f"{name}.txt").read_text("utf-8").strip()
        scripted = ScriptedBackend(responses)
        backend = RecordingBackend(scripted, out_dir)
        session = parse_rule(rule, backend, catalog, example)
        if scripted._queue:
            raise SystemExit(f"{name}: {len(scripted._queue)} scripted responses unused")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyOracleWarning)
            gold = parse_scenario_text(gold_doc(name))
        if session.aligned != gold:
            raise SystemExit(
                f"{name}: pipeline output differs from reference\n"
                + serialize_scenario(session.aligned)
            )
        total += len(responses)
        print(f"{name}: {len(responses)} exchange(s), reasks={session.reasks_used}")
    print(f"{total} fixtures under {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
