"""Typed scenario representation and its textual document format.

A scenario document is a small indentation-based text format (a strict subset
of YAML, so generic tools can read it, but parsing here is self-contained):

    environment:
      weather: sunny
      time: daytime
    road_network:
      road_type: t-intersection
      road_marker: none
      traffic_signs: [stop sign]
    actors:
      ego:
        type: car
        behavior: go forward
        position:
          reference: t-intersection
          relation: behind
      npc_actors:
        - type: car
          behavior: go forward
          position:
            reference: ego vehicle
            relation: front
    oracle:
      longitudinal: [stop, yield]
      lateral: []

Rules: 2-space indentation, lowercase tokens, `none` sentinel for absent
scalars, inline `[a, b]` lists, `#` comments to end of line. Serialization is
canonical (fixed key order) and parse(serialize(rep)) == rep.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

from .catalog import SENTINEL, ElementCatalog, normalize_token

TOP_LEVEL_KEYS = ("environment", "road_network", "actors", "oracle")

_WS = re.compile(r"\s+")


class DslError(Exception):
    pass


class DocumentSyntaxError(DslError):
    def __init__(self, lineno: int, expected: str):
        self.lineno = lineno
        self.expected = expected
        super().__init__(f"line {lineno}: expected {expected}")


class UnknownKey(DslError):
    def __init__(self, key: str, lineno: int):
        self.key = key
        self.lineno = lineno
        super().__init__(f"line {lineno}: unknown key {key!r}")


class MissingField(DslError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"missing field: {path}")


class EmptyOracleWarning(UserWarning):
    """Document parsed fine but defines no oracle, so it cannot drive a test."""


def _clean(token: str) -> str:
    tok = _WS.sub(" ", str(token).lower()).strip()
    if not tok:
        raise ValueError("empty token")
    return tok


def _clean_list(tokens, what: str) -> tuple[str, ...]:
    out = tuple(_clean(t) for t in tokens)
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate tokens in {what}: {out}")
    return out


@dataclass(frozen=True)
class Environment:
    weather: str = SENTINEL
    time: str = SENTINEL

    def __post_init__(self):
        object.__setattr__(self, "weather", _clean(self.weather))
        object.__setattr__(self, "time", _clean(self.time))


@dataclass(frozen=True)
class RoadNetwork:
    road_type: str = SENTINEL
    road_marker: str = SENTINEL
    traffic_signs: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "road_type", _clean(self.road_type))
        object.__setattr__(self, "road_marker", _clean(self.road_marker))
        object.__setattr__(
            self, "traffic_signs", _clean_list(self.traffic_signs, "traffic_signs")
        )


@dataclass(frozen=True)
class Position:
    reference: str = SENTINEL
    relation: str = SENTINEL

    def __post_init__(self):
        object.__setattr__(self, "reference", _clean(self.reference))
        object.__setattr__(self, "relation", _clean(self.relation))


@dataclass(frozen=True)
class Actor:
    type: str = SENTINEL
    behavior: str = SENTINEL
    position: Position = field(default_factory=Position)

    def __post_init__(self):
        object.__setattr__(self, "type", _clean(self.type))
        object.__setattr__(self, "behavior", _clean(self.behavior))


@dataclass(frozen=True)
class Oracle:
    longitudinal: tuple[str, ...] = ()
    lateral: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "longitudinal", _clean_list(self.longitudinal, "oracle.longitudinal")
        )
        object.__setattr__(self, "lateral", _clean_list(self.lateral, "oracle.lateral"))

    @property
    def empty(self) -> bool:
        return not self.longitudinal and not self.lateral


@dataclass(frozen=True)
class ScenarioRep:
    environment: Environment = field(default_factory=Environment)
    road_network: RoadNetwork = field(default_factory=RoadNetwork)
    ego: Actor = field(default_factory=Actor)
    npc_actors: tuple[Actor, ...] = ()
    oracle: Oracle = field(default_factory=Oracle)

    def __post_init__(self):
        object.__setattr__(self, "npc_actors", tuple(self.npc_actors))
        # the ego cannot be positioned relative to itself
        if normalize_token(self.ego.position.reference) == "ego vehicle":
            raise ValueError("ego position reference cannot be 'ego vehicle'")


# ---------------------------------------------------------------------------
# parsing

@dataclass
class _Line:
    indent: int
    text: str
    lineno: int


def _scan(text: str) -> list[_Line]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        if "\t" in body[: len(body) - len(body.lstrip())]:
            raise DocumentSyntaxError(lineno, "spaces for indentation, not tabs")
        indent = len(body) - len(body.lstrip(" "))
        if indent % 2 != 0:
            raise DocumentSyntaxError(lineno, "indentation in steps of 2 spaces")
        out.append(_Line(indent, body.strip(), lineno))
    return out


class _Cursor:
    def __init__(self, lines: list[_Line]):
        self.lines = lines
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.lines)

    def peek(self) -> _Line:
        return self.lines[self.pos]

    def take_block(self, min_indent: int) -> list[_Line]:
        start = self.pos
        while not self.done() and self.peek().indent >= min_indent:
            self.pos += 1
        return self.lines[start : self.pos]


def _split_key(ln: _Line) -> tuple[str, str | None]:
    if ":" not in ln.text:
        raise DocumentSyntaxError(ln.lineno, "'key:' or 'key: value'")
    key, _, rest = ln.text.partition(":")
    key = key.strip()
    if not key:
        raise DocumentSyntaxError(ln.lineno, "a key before ':'")
    rest = rest.strip()
    return key, (rest if rest else None)


def _parse_inline_list(value: str, lineno: int) -> tuple[str, ...]:
    if not (value.startswith("[") and value.endswith("]")):
        raise DocumentSyntaxError(lineno, "inline list like [a, b] or []")
    inner = value[1:-1].strip()
    if not inner:
        return ()
    parts = [p.strip() for p in inner.split(",")]
    if any(not p for p in parts):
        raise DocumentSyntaxError(lineno, "non-empty list elements")
    return tuple(parts)


def _parse_mapping(block: list[_Line], indent: int, path: str, allowed: tuple[str, ...]):
    """Read `key:`/`key: value` entries at a fixed indent.

    Returns {key: (value_or_None, lineno, child_block)}.
    """
    cur = _Cursor(block)
    entries: dict[str, tuple[str | None, int, list[_Line]]] = {}
    while not cur.done():
        ln = cur.peek()
        if ln.indent != indent:
            raise DocumentSyntaxError(ln.lineno, f"indent {indent} under {path}")
        if ln.text.startswith("- "):
            raise DocumentSyntaxError(ln.lineno, f"a key under {path}, not a list item")
        key, value = _split_key(ln)
        if key not in allowed:
            raise UnknownKey(key, ln.lineno)
        if key in entries:
            raise DocumentSyntaxError(ln.lineno, f"{path}.{key} only once")
        cur.pos += 1
        child = cur.take_block(indent + 2)
        entries[key] = (value, ln.lineno, child)
    return entries


def _scalar(entries, key: str, path: str) -> str:
    if key not in entries:
        raise MissingField(f"{path}.{key}")
    value, lineno, child = entries[key]
    if child:
        raise DocumentSyntaxError(child[0].lineno, f"no nested block under {path}.{key}")
    if value is None:
        raise DocumentSyntaxError(lineno, f"a value for {path}.{key}")
    if value.startswith("["):
        raise DocumentSyntaxError(lineno, f"a scalar token for {path}.{key}")
    return value


def _inline(entries, key: str, path: str) -> tuple[str, ...]:
    if key not in entries:
        raise MissingField(f"{path}.{key}")
    value, lineno, child = entries[key]
    if child:
        raise DocumentSyntaxError(child[0].lineno, f"inline list for {path}.{key}")
    if value is None:
        raise DocumentSyntaxError(lineno, f"a list value for {path}.{key}")
    return _parse_inline_list(value, lineno)


def _mapping_block(entries, key: str, path: str) -> list[_Line]:
    if key not in entries:
        raise MissingField(f"{path}.{key}")
    value, lineno, child = entries[key]
    if value is not None:
        raise DocumentSyntaxError(lineno, f"a nested block under {path}.{key}")
    if not child:
        raise MissingField(f"{path}.{key}")
    return child


def _parse_actor(block: list[_Line], indent: int, path: str) -> Actor:
    entries = _parse_mapping(block, indent, path, ("type", "behavior", "position"))
    pos_block = _mapping_block(entries, "position", path)
    pos_entries = _parse_mapping(
        pos_block, indent + 2, f"{path}.position", ("reference", "relation")
    )
    return Actor(
        type=_scalar(entries, "type", path),
        behavior=_scalar(entries, "behavior", path),
        position=Position(
            reference=_scalar(pos_entries, "reference", f"{path}.position"),
            relation=_scalar(pos_entries, "relation", f"{path}.position"),
        ),
    )


def _parse_npc_items(block: list[_Line], indent: int) -> tuple[Actor, ...]:
    actors = []
    cur = _Cursor(block)
    while not cur.done():
        ln = cur.peek()
        if ln.indent != indent or not ln.text.startswith("- "):
            raise DocumentSyntaxError(ln.lineno, f"'- key: value' item at indent {indent}")
        # fold the dash marker away: the item head becomes a normal key line
        head = _Line(indent + 2, ln.text[2:].strip(), ln.lineno)
        cur.pos += 1
        rest = cur.take_block(indent + 2)
        actors.append(_parse_actor([head] + rest, indent + 2, f"actors.npc_actors[{len(actors)}]"))
    return tuple(actors)


def parse_scenario_text(text: str) -> ScenarioRep:
    """Parse a scenario document; raises DslError subclasses on bad input."""
    lines = _scan(text)
    if not lines:
        raise DocumentSyntaxError(1, "a non-empty document")
    cur = _Cursor(lines)
    sections: dict[str, list[_Line]] = {}
    while not cur.done():
        ln = cur.peek()
        if ln.indent != 0:
            raise DocumentSyntaxError(ln.lineno, "a top-level key at indent 0")
        key, value = _split_key(ln)
        if key not in TOP_LEVEL_KEYS:
            raise UnknownKey(key, ln.lineno)
        if key in sections:
            raise DocumentSyntaxError(ln.lineno, f"section {key} only once")
        if value is not None:
            raise DocumentSyntaxError(ln.lineno, f"a nested block under {key}")
        cur.pos += 1
        sections[key] = cur.take_block(2)
    for req in TOP_LEVEL_KEYS:
        if req not in sections:
            raise MissingField(req)

    env_entries = _parse_mapping(sections["environment"], 2, "environment", ("weather", "time"))
    environment = Environment(
        weather=_scalar(env_entries, "weather", "environment"),
        time=_scalar(env_entries, "time", "environment"),
    )

    road_entries = _parse_mapping(
        sections["road_network"], 2, "road_network",
        ("road_type", "road_marker", "traffic_signs"),
    )
    try:
        road = RoadNetwork(
            road_type=_scalar(road_entries, "road_type", "road_network"),
            road_marker=_scalar(road_entries, "road_marker", "road_network"),
            traffic_signs=_inline(road_entries, "traffic_signs", "road_network"),
        )
    except ValueError as e:
        raise DocumentSyntaxError(road_entries["traffic_signs"][1], str(e)) from e

    actor_entries = _parse_mapping(sections["actors"], 2, "actors", ("ego", "npc_actors"))
    ego = _parse_actor(_mapping_block(actor_entries, "ego", "actors"), 4, "actors.ego")
    if "npc_actors" not in actor_entries:
        raise MissingField("actors.npc_actors")
    npc_value, npc_lineno, npc_child = actor_entries["npc_actors"]
    if npc_value is not None:
        if npc_value != "[]":
            raise DocumentSyntaxError(npc_lineno, "npc_actors: [] or an item list")
        if npc_child:
            raise DocumentSyntaxError(npc_child[0].lineno, "no items after npc_actors: []")
        npcs: tuple[Actor, ...] = ()
    else:
        if not npc_child:
            raise DocumentSyntaxError(npc_lineno, "npc_actors items or []")
        npcs = _parse_npc_items(npc_child, 4)

    oracle_entries = _parse_mapping(sections["oracle"], 2, "oracle", ("longitudinal", "lateral"))
    try:
        oracle = Oracle(
            longitudinal=_inline(oracle_entries, "longitudinal", "oracle"),
            lateral=_inline(oracle_entries, "lateral", "oracle"),
        )
    except ValueError as e:
        raise DocumentSyntaxError(oracle_entries["longitudinal"][1], str(e)) from e

    try:
        rep = ScenarioRep(
            environment=environment, road_network=road, ego=ego,
            npc_actors=npcs, oracle=oracle,
        )
    except ValueError as e:
        raise DocumentSyntaxError(lines[0].lineno, str(e)) from e
    if oracle.empty:
        warnings.warn(
            "document has no oracle entries; scenario will not be checkable",
            EmptyOracleWarning, stacklevel=2,
        )
    return rep


# ---------------------------------------------------------------------------
# serialization

def _fmt_list(tokens: tuple[str, ...]) -> str:
    return "[" + ", ".join(tokens) + "]"


def _actor_lines(actor: Actor, indent: str, dash: bool) -> list[str]:
    head = indent + ("- " if dash else "")
    cont = indent + ("  " if dash else "")
    return [
        f"{head}type: {actor.type}",
        f"{cont}behavior: {actor.behavior}",
        f"{cont}position:",
        f"{cont}  reference: {actor.position.reference}",
        f"{cont}  relation: {actor.position.relation}",
    ]


def serialize_scenario(rep: ScenarioRep) -> str:
    """Canonical document text: fixed key order, one trailing newline."""
    out = [
        "environment:",
        f"  weather: {rep.environment.weather}",
        f"  time: {rep.environment.time}",
        "road_network:",
        f"  road_type: {rep.road_network.road_type}",
        f"  road_marker: {rep.road_network.road_marker}",
        f"  traffic_signs: {_fmt_list(rep.road_network.traffic_signs)}",
        "actors:",
        "  ego:",
    ]
    out += _actor_lines(rep.ego, "    ", dash=False)
    if rep.npc_actors:
        out.append("  npc_actors:")
        for npc in rep.npc_actors:
            out += _actor_lines(npc, "    ", dash=True)
    else:
        out.append("  npc_actors: []")
    out += [
        "oracle:",
        f"  longitudinal: {_fmt_list(rep.oracle.longitudinal)}",
        f"  lateral: {_fmt_list(rep.oracle.lateral)}",
    ]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# plain-structure helpers (used for token surgery and JSON embedding)

def to_plain(rep: ScenarioRep) -> dict:
    return {
        "environment": {"weather": rep.environment.weather, "time": rep.environment.time},
        "road_network": {
            "road_type": rep.road_network.road_type,
            "road_marker": rep.road_network.road_marker,
            "traffic_signs": list(rep.road_network.traffic_signs),
        },
        "actors": {
            "ego": _actor_plain(rep.ego),
            "npc_actors": [_actor_plain(a) for a in rep.npc_actors],
        },
        "oracle": {
            "longitudinal": list(rep.oracle.longitudinal),
            "lateral": list(rep.oracle.lateral),
        },
    }


def _actor_plain(actor: Actor) -> dict:
    return {
        "type": actor.type,
        "behavior": actor.behavior,
        "position": {
            "reference": actor.position.reference,
            "relation": actor.position.relation,
        },
    }


def _actor_from_plain(d: dict) -> Actor:
    return Actor(
        type=d["type"], behavior=d["behavior"],
        position=Position(
            reference=d["position"]["reference"], relation=d["position"]["relation"]
        ),
    )


def _dedupe(tokens) -> list[str]:
    seen, out = set(), []
    for t in tokens:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def from_plain(d: dict) -> ScenarioRep:
    return ScenarioRep(
        environment=Environment(**d["environment"]),
        road_network=RoadNetwork(
            road_type=d["road_network"]["road_type"],
            road_marker=d["road_network"]["road_marker"],
            traffic_signs=tuple(_dedupe(d["road_network"]["traffic_signs"])),
        ),
        ego=_actor_from_plain(d["actors"]["ego"]),
        npc_actors=tuple(_actor_from_plain(a) for a in d["actors"]["npc_actors"]),
        oracle=Oracle(
            longitudinal=tuple(_dedupe(d["oracle"]["longitudinal"])),
            lateral=tuple(_dedupe(d["oracle"]["lateral"])),
        ),
    )


Address = tuple  # e.g. ("actors", "npc_actors", 0, "position", "reference")


def get_token(rep: ScenarioRep, address: Address) -> str:
    node = to_plain(rep)
    for part in address:
        node = node[part]
    if not isinstance(node, str):
        raise KeyError(f"address {address!r} does not point at a token")
    return node


def replace_token(rep: ScenarioRep, address: Address, new_token: str) -> ScenarioRep:
    """Return a copy with one token swapped; list slots are deduped after."""
    plain = to_plain(rep)
    node = plain
    for part in address[:-1]:
        node = node[part]
    if not isinstance(node[address[-1]], str):
        raise KeyError(f"address {address!r} does not point at a token")
    node[address[-1]] = new_token
    return from_plain(plain)


# ---------------------------------------------------------------------------
# validation and structural diff

@dataclass(frozen=True)
class ValidationEntry:
    path: str
    subcomponent: str
    token: str
    status: str  # catalog | novel | sentinel
    address: Address


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[ValidationEntry, ...]

    def novel(self) -> tuple[ValidationEntry, ...]:
        return tuple(e for e in self.entries if e.status == "novel")


def _slot_addresses(rep: ScenarioRep):
    """Scalar slots plus one address per list token, in document order."""
    slots: list[tuple[str, str, Address]] = [
        ("environment.weather", "weather", ("environment", "weather")),
        ("environment.time", "time", ("environment", "time")),
        ("road_network.road_type", "road type", ("road_network", "road_type")),
        ("road_network.road_marker", "road marker", ("road_network", "road_marker")),
    ]
    for i in range(len(rep.road_network.traffic_signs)):
        slots.append(
            (f"road_network.traffic_signs[{i}]", "traffic sign",
             ("road_network", "traffic_signs", i))
        )
    actors: list[tuple[str, Address]] = [("actors.ego", ("actors", "ego"))]
    for i in range(len(rep.npc_actors)):
        actors.append((f"actors.npc_actors[{i}]", ("actors", "npc_actors", i)))
    for path, addr in actors:
        slots += [
            (f"{path}.type", "actor type", addr + ("type",)),
            (f"{path}.behavior", "behavior", addr + ("behavior",)),
            (f"{path}.position.reference", "position reference",
             addr + ("position", "reference")),
            (f"{path}.position.relation", "position relation",
             addr + ("position", "relation")),
        ]
    for i in range(len(rep.oracle.longitudinal)):
        slots.append(
            (f"oracle.longitudinal[{i}]", "longitudinal oracle", ("oracle", "longitudinal", i))
        )
    for i in range(len(rep.oracle.lateral)):
        slots.append((f"oracle.lateral[{i}]", "lateral oracle", ("oracle", "lateral", i)))
    return slots


def validate_scenario(rep: ScenarioRep, catalog: ElementCatalog) -> ValidationReport:
    """Classify every token as catalog, novel or sentinel. Novel is a warning
    status, not an error: unknown elements stay in the representation."""
    entries = []
    for path, sub, addr in _slot_addresses(rep):
        token = get_token(rep, addr)
        if normalize_token(token) == SENTINEL:
            status = "sentinel"
        elif catalog.contains(sub, token):
            status = "catalog"
        else:
            status = "novel"
        entries.append(ValidationEntry(path, sub, token, status, addr))
    return ValidationReport(tuple(entries))


@dataclass(frozen=True)
class SlotMatch:
    path: str
    subcomponent: str
    matched: bool


@dataclass(frozen=True)
class MatchVector:
    slots: tuple[SlotMatch, ...]

    @property
    def matched_count(self) -> int:
        return sum(1 for s in self.slots if s.matched)

    @property
    def total(self) -> int:
        return len(self.slots)


def diff_scenarios(
    pred: ScenarioRep, gold: ScenarioRep, catalog: ElementCatalog | None = None
) -> MatchVector:
    """Field-by-field comparison; one boolean per subcomponent slot.

    List-valued slots (signs, oracles) compare as token sets. With a catalog,
    tokens compare through alias folding, otherwise by normalized text.
    """

    def key(token: str) -> str:
        if catalog is not None:
            return catalog.comparison_key(token)
        return normalize_token(token)

    def keyset(tokens) -> frozenset:
        return frozenset(key(t) for t in tokens)

    slots: list[SlotMatch] = [
        SlotMatch("environment.weather", "weather",
                  key(pred.environment.weather) == key(gold.environment.weather)),
        SlotMatch("environment.time", "time",
                  key(pred.environment.time) == key(gold.environment.time)),
        SlotMatch("road_network.road_type", "road type",
                  key(pred.road_network.road_type) == key(gold.road_network.road_type)),
        SlotMatch("road_network.road_marker", "road marker",
                  key(pred.road_network.road_marker) == key(gold.road_network.road_marker)),
        SlotMatch("road_network.traffic_signs", "traffic sign",
                  keyset(pred.road_network.traffic_signs)
                  == keyset(gold.road_network.traffic_signs)),
    ]

    def actor_slots(path: str, a: Actor | None, b: Actor | None):
        fields = (
            ("type", "actor type", lambda x: x.type),
            ("behavior", "behavior", lambda x: x.behavior),
            ("position.reference", "position reference", lambda x: x.position.reference),
            ("position.relation", "position relation", lambda x: x.position.relation),
        )
        for name, sub, getter in fields:
            ok = a is not None and b is not None and key(getter(a)) == key(getter(b))
            slots.append(SlotMatch(f"{path}.{name}", sub, ok))

    actor_slots("actors.ego", pred.ego, gold.ego)
    for i in range(max(len(pred.npc_actors), len(gold.npc_actors))):
        actor_slots(
            f"actors.npc_actors[{i}]",
            pred.npc_actors[i] if i < len(pred.npc_actors) else None,
            gold.npc_actors[i] if i < len(gold.npc_actors) else None,
        )

    slots.append(SlotMatch("oracle.longitudinal", "longitudinal oracle",
                           keyset(pred.oracle.longitudinal) == keyset(gold.oracle.longitudinal)))
    slots.append(SlotMatch("oracle.lateral", "lateral oracle",
                           keyset(pred.oracle.lateral) == keyset(gold.oracle.lateral)))
    return MatchVector(tuple(slots))
