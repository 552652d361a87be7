import random
import warnings
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings

import strategies
from conftest import read_rep
from rulescene.catalog import default_catalog
from rulescene.dsl import (
    DocumentSyntaxError,
    EmptyOracleWarning,
    MissingField,
    UnknownKey,
    diff_scenarios,
    from_plain,
    get_token,
    parse_scenario_text,
    replace_token,
    serialize_scenario,
    to_plain,
    validate_scenario,
)

ROOT = Path(__file__).resolve().parents[1]


def fixture_doc_paths() -> list[Path]:
    paths = sorted((ROOT / "rules" / "gold").glob("*.rep.txt"))
    paths += sorted((ROOT / "rules" / "calibration").glob("*/*.rep.txt"))
    paths += sorted((ROOT / "tests" / "data" / "reps").glob("*.rep.txt"))
    paths.append(ROOT / "src" / "rulescene" / "data" / "example_rep.txt")
    return paths


def test_fixture_corpus_is_large_enough():
    assert len(fixture_doc_paths()) >= 20


@pytest.mark.parametrize("path", fixture_doc_paths(), ids=lambda p: p.stem)
def test_fixture_round_trip(path):
    text = path.read_text(encoding="utf-8")
    rep = read_rep(path)
    # canonical: serializing what was parsed reproduces the file exactly
    assert serialize_scenario(rep) == text
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        assert parse_scenario_text(serialize_scenario(rep)) == rep


@pytest.mark.parametrize("path", fixture_doc_paths(), ids=lambda p: p.stem)
def test_fixture_docs_are_yaml_subset(path):
    """Every canonical document must also be plain YAML with the same shape."""
    text = path.read_text(encoding="utf-8")
    data = yaml.safe_load(text)
    rep = read_rep(path)
    assert data["environment"]["weather"] == rep.environment.weather
    assert data["environment"]["time"] == rep.environment.time
    assert data["road_network"]["road_type"] == rep.road_network.road_type
    signs = data["road_network"]["traffic_signs"]
    assert tuple(signs or ()) == rep.road_network.traffic_signs
    assert data["actors"]["ego"]["type"] == rep.ego.type
    assert data["actors"]["ego"]["position"]["reference"] == rep.ego.position.reference
    npcs = data["actors"]["npc_actors"] or []
    assert len(npcs) == len(rep.npc_actors)
    for block, actor in zip(npcs, rep.npc_actors):
        assert block["behavior"] == actor.behavior
    assert tuple(data["oracle"]["longitudinal"] or ()) == rep.oracle.longitudinal
    assert tuple(data["oracle"]["lateral"] or ()) == rep.oracle.lateral


@settings(max_examples=200, deadline=None)
@given(strategies.reps(default_catalog()))
def test_random_round_trip(rep):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        text = serialize_scenario(rep)
        assert parse_scenario_text(text) == rep
        assert serialize_scenario(parse_scenario_text(text)) == text


def test_parse_tolerates_trailing_whitespace_and_blank_lines():
    text = (ROOT / "rules" / "gold" / "stop_tee.rep.txt").read_text()
    messy = "\n" + text.replace("\n", "  \n", 3) + "\n\n"
    assert parse_scenario_text(messy) == parse_scenario_text(text)


def test_empty_oracle_warns():
    text = (ROOT / "tests" / "data" / "reps" / "empty_oracle.rep.txt").read_text()
    with pytest.warns(EmptyOracleWarning):
        parse_scenario_text(text)


def base_doc() -> str:
    return (ROOT / "rules" / "gold" / "stop_tee.rep.txt").read_text()


def test_unknown_key_reports_line_number():
    bad = base_doc().replace("road_marker:", "road_paint:")
    with pytest.raises(UnknownKey) as exc:
        parse_scenario_text(bad)
    assert "road_paint" in str(exc.value)
    assert any(ch.isdigit() for ch in str(exc.value))


def test_missing_field_raises():
    lines = [ln for ln in base_doc().splitlines() if not ln.startswith("  time:")]
    with pytest.raises(MissingField) as exc:
        parse_scenario_text("\n".join(lines) + "\n")
    assert "time" in str(exc.value)


@pytest.mark.parametrize(
    "mutation",
    [
        lambda t: t.replace("  weather:", "   weather:"),   # odd indent
        lambda t: t.replace("traffic_signs: [stop sign]", "traffic_signs: [stop sign"),
        lambda t: "environment\n" + t.split("\n", 1)[1],    # key without colon
    ],
    ids=["bad-indent", "unclosed-list", "missing-colon"],
)
def test_structural_errors(mutation):
    with pytest.raises(DocumentSyntaxError):
        parse_scenario_text(mutation(base_doc()))


def test_trailing_stray_key_is_rejected():
    with pytest.raises(UnknownKey):
        parse_scenario_text(base_doc() + "  stray: value\n")


def test_plain_round_trip():
    rep = read_rep(ROOT / "tests" / "data" / "reps" / "dense.rep.txt")
    assert from_plain(to_plain(rep)) == rep


# ---------------------------------------------------------------------------
# diff / validation

def test_diff_identical_counts_all_slots():
    rep = read_rep(ROOT / "rules" / "gold" / "stop_tee.rep.txt")
    mv = diff_scenarios(rep, rep)
    assert mv.total == 15  # 2 env + 3 road + 4 ego + 4 npc + 2 oracle
    assert mv.matched_count == 15


def test_diff_calibration_pair_is_fourteen_fifteenths():
    pred = read_rep(ROOT / "rules" / "calibration" / "pred" / "mismatch.rep.txt")
    gold = read_rep(ROOT / "rules" / "calibration" / "gold" / "mismatch.rep.txt")
    mv = diff_scenarios(pred, gold)
    assert (mv.matched_count, mv.total) == (14, 15)
    missed = [s for s in mv.slots if not s.matched]
    assert len(missed) == 1 and missed[0].subcomponent == "weather"


def test_diff_folds_aliases_with_catalog(catalog):
    a = base_doc().replace("time: none", "time: day")
    b = base_doc().replace("time: none", "time: daytime")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        pa, pb = parse_scenario_text(a), parse_scenario_text(b)
    assert diff_scenarios(pa, pb, catalog).matched_count == 15
    assert diff_scenarios(pa, pb).matched_count == 14  # no catalog, plain text


def test_diff_sign_order_is_ignored():
    a = base_doc().replace("[stop sign]", "[stop sign, traffic light]")
    b = base_doc().replace("[stop sign]", "[traffic light, stop sign]")
    pa, pb = parse_scenario_text(a), parse_scenario_text(b)
    assert all(s.matched for s in diff_scenarios(pa, pb).slots)


def test_validate_classifies_tokens(catalog):
    doc = base_doc().replace("weather: none", "weather: drizzle")
    rep = parse_scenario_text(doc)
    report = validate_scenario(rep, catalog)
    by_status = {}
    for e in report.entries:
        by_status.setdefault(e.status, []).append(e)
    assert [e.token for e in report.novel()] == ["drizzle"]
    assert any(e.token == "none" for e in by_status["sentinel"])
    assert any(e.token == "stop sign" for e in by_status["catalog"])


def test_replace_token_via_novel_address(catalog):
    doc = base_doc().replace("stop sign", "halt sign")
    rep = parse_scenario_text(doc)
    entry = validate_scenario(rep, catalog).novel()[0]
    fixed = replace_token(rep, entry.address, "stop sign")
    assert get_token(fixed, entry.address) == "stop sign"
    assert fixed == parse_scenario_text(base_doc())


def test_random_reps_diff_against_themselves(catalog):
    rng = random.Random(11)
    for _ in range(50):
        rep = strategies.random_rep(rng, catalog)
        mv = diff_scenarios(rep, rep, catalog)
        assert mv.matched_count == mv.total
