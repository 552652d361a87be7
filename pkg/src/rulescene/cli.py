"""Command line front end.

Four subcommands cover the production path end to end:

  parse-rule   natural-language rule -> scenario document (+ session log)
  gen          scenario document -> concrete scenarios on compatible maps
  run          concrete scenario + agent -> trace + conformance report
  eval         score parsed documents against references, or rater votes

Exit codes: 0 success, 2 rule could not be parsed, 3 no compatible map,
4 rule violation, 5 collision, 6 timeout.  Plain usage or I/O errors exit 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import random
import re
import shlex
import sys
import warnings
from pathlib import Path

from . import simulate
from .agents import (
    StaticAgent,
    StdioAgent,
    UnknownViolationToken,
    compliant_ads,
    violator_ads,
)
from .backends import BackendError, make_backend
from .catalog import default_catalog, load_catalog
from .config import ConfigError, RunConfig, load_run_config, resolve_config_path
from .dsl import (
    DslError,
    EmptyOracleWarning,
    diff_scenarios,
    parse_scenario_text,
    serialize_scenario,
)
from .mapmodel import MapError, build_routes, load_map
from .metrics import (
    DegenerateMatrix,
    DivisionUndefined,
    MetricsError,
    component_parsing_accuracy,
    load_votes_csv,
    weighted_fleiss_kappa,
)
from .monitor import make_report, render_table, save_report
from .ruleparse import ExtractionUnparseable, load_default_example, parse_rule
from .scenario import ScenarioFormatError, load_scenario, save_scenario
from .scenariogen import (
    GenerationError,
    MissingAnchor,
    ScenarioUnsupportedOnMap,
    generate_all,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE_FAILURE = 2
EXIT_NO_MAP = 3
EXIT_VIOLATION = 4
EXIT_COLLISION = 5
EXIT_TIMEOUT = 6

_VERDICT_EXIT = {
    "pass": EXIT_OK,
    "rule_violation": EXIT_VIOLATION,
    "collision": EXIT_COLLISION,
    "timeout": EXIT_TIMEOUT,
}


class CliError(Exception):
    """Fatal condition with a known exit code."""

    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _fail(message: str, code: int = EXIT_USAGE) -> CliError:
    return CliError(message, code)


# ---------------------------------------------------------------------------
# shared helpers

def _load_config(args) -> tuple[RunConfig, Path | None]:
    try:
        cfg = load_run_config(args.config)
    except (ConfigError, OSError) as e:
        raise _fail(f"config: {e}")
    path = Path(args.config) if args.config else None
    # load_run_config falls back to TARGET_CONFIG when --config is absent
    if path is None:
        env = os.environ.get("TARGET_CONFIG")
        if env:
            path = Path(env)
    return cfg, path


def _catalog_for(cfg: RunConfig, cfg_path: Path | None):
    if cfg.catalog_path is None:
        return default_catalog()
    return load_catalog(resolve_config_path(cfg_path, cfg.catalog_path))


def _out_dir(args, cfg: RunConfig, cfg_path: Path | None) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        out = resolve_config_path(cfg_path, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _maps_dir(args, cfg: RunConfig, cfg_path: Path | None) -> Path:
    if getattr(args, "maps", None):
        return Path(args.maps)
    return resolve_config_path(cfg_path, cfg.map_dir)


def _write_text(path: Path, text: str, force: bool) -> bool:
    """Returns False when the file already exists and --force is off."""
    if path.exists() and not force:
        return False
    path.write_text(text, encoding="utf-8")
    return True


def _parse_rep_file(path: Path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        return parse_scenario_text(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# parse-rule

def cmd_parse_rule(args) -> int:
    cfg, cfg_path = _load_config(args)
    if args.rule_text is not None:
        rule = args.rule_text.strip()
        name = args.name or "rule"
    else:
        rule_path = Path(args.rule_file)
        if not rule_path.is_file():
            raise _fail(f"rule file not found: {rule_path}")
        rule = rule_path.read_text(encoding="utf-8").strip()
        name = args.name or rule_path.stem
    if not rule:
        raise _fail("empty rule text")

    backend_cfg = cfg.backend
    if args.backend:
        backend_cfg = dataclasses.replace(backend_cfg, kind=args.backend)
    base = cfg_path.parent if cfg_path else Path(".")
    backend = make_backend(backend_cfg, base_dir=base)
    catalog = _catalog_for(cfg, cfg_path)

    try:
        session = parse_rule(
            rule,
            backend,
            catalog,
            load_default_example(),
            local_alignment=args.local_alignment,
        )
    except (ExtractionUnparseable, BackendError) as e:
        raise _fail(f"parse-rule: {e}", EXIT_PARSE_FAILURE)

    out = _out_dir(args, cfg, cfg_path)
    rep_path = out / f"{name}.rep.txt"
    session_path = out / f"{name}.session.json"
    wrote = _write_text(rep_path, serialize_scenario(session.aligned), args.force)
    _write_text(
        session_path,
        json.dumps(session.to_jsonable(), indent=2, sort_keys=True) + "\n",
        args.force,
    )
    state = "wrote" if wrote else "kept (use --force to overwrite)"
    print(f"{state} {rep_path}")
    print(f"session log {session_path}  reasks={session.reasks_used}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen

def _strip_rep_suffix(stem: str) -> str:
    return stem[:-4] if stem.endswith(".rep") else stem


def cmd_gen(args) -> int:
    cfg, cfg_path = _load_config(args)
    doc_path = Path(args.scenario_doc)
    if not doc_path.is_file():
        raise _fail(f"scenario document not found: {doc_path}")
    try:
        rep = _parse_rep_file(doc_path)
    except DslError as e:
        raise _fail(f"gen: {e}", EXIT_PARSE_FAILURE)
    rule_id = args.rule_id or _strip_rep_suffix(doc_path.stem)

    maps_dir = _maps_dir(args, cfg, cfg_path)
    map_files = sorted(maps_dir.glob("*.map.json"))
    if not map_files:
        raise _fail(f"no *.map.json under {maps_dir}", EXIT_NO_MAP)

    out = _out_dir(args, cfg, cfg_path)
    rng = random.Random(cfg.seed if args.seed is None else args.seed)
    written = 0
    for map_file in map_files:
        try:
            graph = build_routes(load_map(map_file))
        except MapError as e:
            print(f"{map_file.name}: unreadable map ({e})", file=sys.stderr)
            continue
        try:
            scenarios = generate_all(
                rep,
                graph,
                cfg.gen,
                cfg.thresholds,
                time_limit_s=cfg.sim.time_limit_s,
                rule_id=rule_id,
            )
        except (ScenarioUnsupportedOnMap, MissingAnchor) as e:
            print(f"{graph.lane_map.map_id}: incompatible ({e})")
            continue
        except GenerationError as e:
            # bad token in the document itself, no map can satisfy it
            raise _fail(f"gen: {e}", EXIT_PARSE_FAILURE)
        if not scenarios:
            print(f"{graph.lane_map.map_id}: incompatible (no satisfying ego route)")
            continue
        if not args.all:
            pick = rng.choice(scenarios) if args.random_ties else scenarios[0]
            scenarios = [pick]
        for scn in scenarios:
            path = out / f"{scn.scenario_id}.scn.json"
            if path.exists() and not args.force:
                print(f"{path} exists, kept")
            else:
                save_scenario(scn, path)
                print(f"wrote {path}")
            written += 1
    if written == 0:
        print("no compatible map", file=sys.stderr)
        return EXIT_NO_MAP
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def _make_agent(spec: str, cfg):
    if spec == "compliant":
        return compliant_ads(cfg.sim)
    if spec == "static":
        return StaticAgent()
    if spec.startswith("violator:"):
        raw = spec[len("violator:") :]
        tokens = [t.replace("-", " ").strip() for t in re.split(r"[+,]", raw) if t.strip()]
        if not tokens:
            raise _fail("violator: needs at least one check token")
        try:
            return violator_ads(tokens, cfg.sim)
        except UnknownViolationToken as e:
            raise _fail(f"agent: {e}")
    if spec.startswith("stdio:"):
        command = shlex.split(spec[len("stdio:") :])
        if not command:
            raise _fail("stdio: needs a command line")
        return StdioAgent(command)
    raise _fail(
        f"unknown agent {spec!r} (expected compliant, static, "
        "violator:<token>[+<token>...], or stdio:<command>)"
    )


def _find_map(maps_dir: Path, map_id: str):
    direct = maps_dir / f"{map_id}.map.json"
    candidates = [direct] if direct.is_file() else sorted(maps_dir.glob("*.map.json"))
    for path in candidates:
        try:
            lane_map = load_map(path)
        except MapError:
            continue
        if lane_map.map_id == map_id:
            return build_routes(lane_map)
    raise _fail(f"no map with id {map_id!r} under {maps_dir}", EXIT_NO_MAP)


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


def cmd_run(args) -> int:
    cfg, cfg_path = _load_config(args)
    try:
        scenario = load_scenario(args.scenario)
    except (ScenarioFormatError, OSError) as e:
        raise _fail(f"run: {e}")
    graph = _find_map(_maps_dir(args, cfg, cfg_path), scenario.map_id)
    agent = _make_agent(args.agent, cfg)

    try:
        trace = simulate.run(scenario, graph, agent, cfg.sim)
    finally:
        close = getattr(agent, "close", None)
        if close is not None:
            close()

    out = _out_dir(args, cfg, cfg_path)
    tag = f"{scenario.scenario_id}.{_safe_name(trace.agent_id)}"
    trace_path = Path(args.trace_out) if args.trace_out else out / f"{tag}.trace.jsonl"
    report_path = (
        Path(args.report_out) if args.report_out else out / f"{tag}.report.json"
    )
    if not (trace_path.exists() and not args.force):
        simulate.write_trace(trace, trace_path)
    report = make_report(trace, scenario.monitor)
    if not (report_path.exists() and not args.force):
        save_report(report, report_path)

    print(render_table(report))
    print(f"trace  {trace_path}")
    print(f"report {report_path}")
    if trace.status == simulate.STATUS_AGENT_FAILURE:
        print("agent failed mid-run", file=sys.stderr)
        return EXIT_USAGE
    return _VERDICT_EXIT[report.verdict]


# ---------------------------------------------------------------------------
# eval

def _eval_votes(args) -> int:
    try:
        votes = load_votes_csv(args.votes)
        kappa = weighted_fleiss_kappa(votes)
    except DegenerateMatrix as e:
        raise _fail(f"eval: {e}")
    except (MetricsError, OSError) as e:
        raise _fail(f"eval: {e}")
    if args.json:
        print(
            json.dumps(
                {
                    "mode": "votes",
                    "kappa": kappa,
                    "n_subjects": votes.n_subjects,
                    "n_raters": votes.n_raters,
                    "n_categories": votes.n_categories,
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(
            f"kappa {kappa:.4f}  ({votes.n_subjects} subjects, "
            f"{votes.n_raters} raters, {votes.n_categories} categories)"
        )
    return EXIT_OK


def _eval_parse(args, cfg, cfg_path) -> int:
    pred_dir = Path(args.pred)
    gold_dir = Path(args.gold)
    if not gold_dir.is_dir():
        raise _fail(f"gold directory not found: {gold_dir}")
    gold_files = sorted(gold_dir.glob("*.rep.txt")) or sorted(gold_dir.glob("*.txt"))
    if not gold_files:
        raise _fail(f"no reference documents under {gold_dir}")
    catalog = _catalog_for(cfg, cfg_path)

    rows = []  # (name, accuracy, matched, total, failure)
    pairs = []
    vectors = []
    for gold_file in gold_files:
        name = _strip_rep_suffix(gold_file.stem)
        gold = _parse_rep_file(gold_file)
        pred_file = pred_dir / gold_file.name
        if not pred_file.is_file():
            rows.append((name, 0.0, 0, 0, "missing"))
            continue
        try:
            pred = _parse_rep_file(pred_file)
        except DslError:
            rows.append((name, 0.0, 0, 0, "parse-failure"))
            continue
        mv = diff_scenarios(pred, gold, catalog)
        rows.append((name, mv.matched_count / mv.total, mv.matched_count, mv.total, ""))
        pairs.append((pred, gold))
        vectors.append(mv)

    mean = sum(r[1] for r in rows) / len(rows)
    subs = sorted({s.subcomponent for mv in vectors for s in mv.slots})
    sub_rows = []
    for sub in subs:
        try:
            sub_rows.append((sub, component_parsing_accuracy(pairs, sub, catalog)))
        except DivisionUndefined:
            sub_rows.append((sub, None))

    if args.json:
        print(
            json.dumps(
                {
                    "mode": "parse",
                    "rules": [
                        {
                            "name": n,
                            "accuracy": a,
                            "matched": m,
                            "total": t,
                            "failure": f or None,
                        }
                        for n, a, m, t, f in rows
                    ],
                    "mean_rule_accuracy": mean,
                    "subcomponents": {s: a for s, a in sub_rows},
                },
                indent=2,
                sort_keys=True,
            )
        )
        return EXIT_OK

    width = max(len(r[0]) for r in rows)
    for name, acc, matched, total, failure in rows:
        note = f"  [{failure}]" if failure else f"  ({matched}/{total})"
        print(f"{name:<{width}}  {acc:.3f}{note}")
    print(f"{'mean':<{width}}  {mean:.3f}  over {len(rows)} rule(s)")
    if sub_rows:
        print()
        sw = max(len(s) for s, _ in sub_rows)
        for sub, acc in sub_rows:
            shown = "n/a" if acc is None else f"{acc:.3f}"
            print(f"{sub:<{sw}}  {shown}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, cfg_path = _load_config(args)
    if args.votes:
        return _eval_votes(args)
    if not (args.pred and args.gold):
        raise _fail("eval needs either --votes or both --pred and --gold")
    return _eval_parse(args, cfg, cfg_path)


# ---------------------------------------------------------------------------
# argument wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulescene",
        description="Turn written traffic rules into runnable conformance tests.",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="INI run configuration (falls back to $TARGET_CONFIG, then defaults)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-rule", help="turn one rule into a scenario document")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rule-file", help="file holding the rule text")
    src.add_argument("--rule-text", help="rule text given inline")
    p.add_argument("--backend", choices=("replay", "http"), help="override backend kind")
    p.add_argument("--local-alignment", action="store_true",
                   help="align tokens by edit similarity instead of the backend")
    p.add_argument("--name", help="output stem (default: rule file stem)")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_parse_rule)

    p = sub.add_parser("gen", help="instantiate a scenario document on maps")
    p.add_argument("--scenario-doc", required=True, help="document from parse-rule")
    p.add_argument("--maps", help="directory of *.map.json (default: config map_dir)")
    p.add_argument("--rule-id", help="rule id stamped into scenarios (default: doc stem)")
    p.add_argument("--all", action="store_true",
                   help="emit every satisfying ego route, not just the first")
    p.add_argument("--random-ties", action="store_true",
                   help="pick one satisfying route at random instead of the lowest id")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for --random-ties (default: config seed)")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="simulate a scenario and score the agent")
    p.add_argument("--scenario", required=True, help="*.scn.json from gen")
    p.add_argument("--agent", required=True,
                   help="compliant | static | violator:<token>[+<token>...] | stdio:<cmd>")
    p.add_argument("--maps", help="directory of *.map.json (default: config map_dir)")
    p.add_argument("--trace-out", help="trace path (default: derived from scenario)")
    p.add_argument("--report-out", help="report path (default: derived from scenario)")
    p.add_argument("--out", help="output directory for derived paths")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score parsed documents or rater votes")
    p.add_argument("--pred", help="directory of parsed documents")
    p.add_argument("--gold", help="directory of reference documents")
    p.add_argument("--votes", help="CSV vote matrix for agreement scoring")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"rulescene: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
