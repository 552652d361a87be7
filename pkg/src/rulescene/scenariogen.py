"""Compile a scenario representation onto a map.

Two mechanisms, mirroring how the representation splits: dictionary search
maps environment tokens to numeric simulator parameters through a committed
table, and a hierarchical route search places actors. The route search first
filters routes by the road network constraints, then matches the ego's
behavior and position, then assigns each NPC a nearby route. Everything is
deterministic: candidate routes are tried in id order and the first full
assignment wins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import geometry as geo
from .catalog import SENTINEL, normalize_token
from .config import GenConfig, SimConfig, Thresholds, actor_footprint
from .dsl import Actor, Environment, Oracle, RoadNetwork, ScenarioRep
from .mapmodel import Route, RouteGraph, routes_conflict, routes_within
from .scenario import CheckSpec, ConcreteScenario, EgoSetup, MonitorConfig, NpcScript, Pose


class GenerationError(Exception):
    pass


class UnmappedToken(GenerationError):
    def __init__(self, kind: str, token: str):
        self.kind = kind
        self.token = token
        super().__init__(f"no {kind} table entry for token {token!r}")


class MissingAnchor(GenerationError):
    def __init__(self, oracle_token: str, why: str):
        self.oracle_token = oracle_token
        super().__init__(f"cannot anchor oracle {oracle_token!r}: {why}")


class UnknownOracleToken(GenerationError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"no monitor check registered for oracle token {token!r}")


class ScenarioUnsupportedOnMap(GenerationError):
    def __init__(self, map_id: str, detail: str):
        self.map_id = map_id
        super().__init__(f"map {map_id!r} cannot host this scenario: {detail}")


# ---------------------------------------------------------------------------
# dictionary search: environment tokens -> simulator parameters

_env_table_cache: dict | None = None


def load_environment_table(path: str | Path | None = None) -> dict:
    global _env_table_cache
    if path is None:
        if _env_table_cache is None:
            _env_table_cache = json.loads(
                resources.files("rulescene.data").joinpath("environment.json").read_text("utf-8")
            )
        return _env_table_cache
    return json.loads(Path(path).read_text("utf-8"))


def resolve_environment(env: Environment, table: dict | None = None) -> dict[str, float]:
    """Numeric simulator parameters for the weather and time tokens."""
    table = table if table is not None else load_environment_table()
    params: dict[str, float] = {}
    for kind, token in (("weather", env.weather), ("time", env.time)):
        key = normalize_token(token)
        if key == SENTINEL:
            continue
        entry = table[kind].get(key)
        if entry is None:
            raise UnmappedToken(kind, token)
        params.update(entry["params"])
    return params


def environment_headway_multiplier(env: Environment, table: dict | None = None) -> float:
    table = table if table is not None else load_environment_table()
    key = normalize_token(env.weather)
    if key == SENTINEL:
        return 1.0
    entry = table["weather"].get(key)
    if entry is None:
        raise UnmappedToken("weather", env.weather)
    return float(entry.get("headway_multiplier", 1.0))


# ---------------------------------------------------------------------------
# flat key-value view of a representation

def to_kv(rep: ScenarioRep) -> dict:
    kv: dict = {
        "weather": rep.environment.weather,
        "time": rep.environment.time,
        "road type": rep.road_network.road_type,
        "road marker": rep.road_network.road_marker,
        "traffic signs": list(rep.road_network.traffic_signs),
    }

    def actor_items(prefix: str, actor: Actor):
        kv[f"{prefix}.actor type"] = actor.type
        kv[f"{prefix}.behavior"] = actor.behavior
        kv[f"{prefix}.position reference"] = actor.position.reference
        kv[f"{prefix}.position relation"] = actor.position.relation

    actor_items("ego", rep.ego)
    for i, npc in enumerate(rep.npc_actors):
        actor_items(f"npc[{i}]", npc)
    kv["longitudinal oracle"] = list(rep.oracle.longitudinal)
    kv["lateral oracle"] = list(rep.oracle.lateral)
    return kv


def from_kv(kv: dict) -> ScenarioRep:
    from .dsl import Position

    def actor_from(prefix: str) -> Actor:
        return Actor(
            type=kv[f"{prefix}.actor type"],
            behavior=kv[f"{prefix}.behavior"],
            position=Position(
                reference=kv[f"{prefix}.position reference"],
                relation=kv[f"{prefix}.position relation"],
            ),
        )

    count = 0
    while f"npc[{count}].actor type" in kv:
        count += 1
    return ScenarioRep(
        environment=Environment(weather=kv["weather"], time=kv["time"]),
        road_network=RoadNetwork(
            road_type=kv["road type"], road_marker=kv["road marker"],
            traffic_signs=tuple(kv["traffic signs"]),
        ),
        ego=actor_from("ego"),
        npc_actors=tuple(actor_from(f"npc[{i}]") for i in range(count)),
        oracle=Oracle(
            longitudinal=tuple(kv["longitudinal oracle"]),
            lateral=tuple(kv["lateral oracle"]),
        ),
    )


# ---------------------------------------------------------------------------
# hierarchical route search

def _window_routes(graph: RouteGraph, route_id: str, lookback: int) -> list[str]:
    """The route plus up to `lookback` generations of predecessors."""
    seen = [route_id]
    frontier = [route_id]
    for _ in range(lookback):
        nxt = []
        for rid in frontier:
            for pid in graph.routes[rid].predecessors:
                if pid not in seen:
                    seen.append(pid)
                    nxt.append(pid)
        frontier = nxt
    return seen


def _window_signs(graph: RouteGraph, route_id: str, lookback: int) -> set[str]:
    tokens: set[str] = set()
    for rid in _window_routes(graph, route_id, lookback):
        tokens.update(normalize_token(t) for t in graph.routes[rid].signs_on_route)
    return tokens


def _lane_markers(graph: RouteGraph, route: Route) -> set[str]:
    if route.lane_id is None:
        return set()
    lane = graph.lane_map.lanes[route.lane_id]
    return {normalize_token(lane.left_marker), normalize_token(lane.right_marker)}


def filter_routes(
    graph: RouteGraph, road: RoadNetwork, cfg: GenConfig = GenConfig()
) -> list[str]:
    """Routes compatible with the road-network constraints, sorted by id.

    `none` never constrains. Road type must appear in the route's region
    tags; the road marker must be painted on the route's lane; every listed
    sign must stand on the route or within a short predecessor window.
    """
    want_type = normalize_token(road.road_type)
    want_marker = normalize_token(road.road_marker)
    want_signs = [normalize_token(t) for t in road.traffic_signs]
    out = []
    for rid in graph.sorted_ids():
        route = graph.routes[rid]
        if want_type != SENTINEL:
            if want_type not in {normalize_token(t) for t in route.region_tags}:
                continue
        if want_marker != SENTINEL:
            if want_marker not in _lane_markers(graph, route):
                continue
        if want_signs:
            window = _window_signs(graph, rid, cfg.sign_lookback_routes)
            if not all(s in window for s in want_signs):
                continue
        out.append(rid)
    return out


def turn_angle_deg(graph: RouteGraph, route: Route) -> float:
    """Signed direction change onto this route, degrees, left positive.

    Measured against the lowest-id predecessor (the approach); a route with
    no predecessor measures against its successor instead and reads 0 when
    isolated.
    """
    if route.predecessors:
        ref = graph.routes[min(route.predecessors)].direction
        return math.degrees(geo.signed_angle_between(ref, route.direction))
    if route.successors:
        nxt = graph.routes[min(route.successors)].direction
        return math.degrees(geo.signed_angle_between(route.direction, nxt))
    return 0.0


def _behavior_matches(
    graph: RouteGraph, route: Route, behavior: str, cfg: GenConfig,
    ego_route: Route | None = None,
) -> bool:
    b = normalize_token(behavior)
    angle = turn_angle_deg(graph, route)
    if b in (SENTINEL, "static", "decelerate"):
        return True
    if b == "go forward":
        return abs(angle) < cfg.turn_threshold_deg
    if b == "turn left":
        return cfg.turn_threshold_deg < angle <= cfg.turn_max_deg
    if b == "turn right":
        return -cfg.turn_max_deg <= angle < -cfg.turn_threshold_deg
    if b in ("change lane to left", "change lane to right"):
        if route.kind != "lane_change":
            return False
        side = _lane_change_side(graph, route)
        return side == ("left" if b.endswith("left") else "right")
    if b == "cross":
        # crossing is relative to the ego; for the ego itself it reduces to
        # any route (the NPC case is the meaningful one)
        if ego_route is None:
            return True
        return routes_conflict(ego_route, route) == "crossing"
    # unknown behavior tokens do not constrain the topology
    return True


def _lane_change_side(graph: RouteGraph, route: Route) -> str:
    if route.predecessors:
        ref = graph.routes[min(route.predecessors)].direction
    elif route.successors:
        ref = graph.routes[min(route.successors)].direction
    else:
        ref = route.direction
    return "left" if geo.cross(ref, route.direction) > 0 else "right"


def _region_tokens(graph: RouteGraph) -> set[str]:
    return {
        normalize_token(t) for region in graph.lane_map.regions for t in region.tags
    }


def _position_matches(
    graph: RouteGraph, route: Route, reference: str, relation: str,
    cfg: GenConfig, ego_route: Route | None,
) -> bool:
    """Position predicate for one actor candidate route."""
    ref = normalize_token(reference)
    rel = normalize_token(relation)
    if ref == SENTINEL:
        return True

    if ref == "ego vehicle":
        if ego_route is None:
            return False
        delta = (
            route.midpoint[0] - ego_route.midpoint[0],
            route.midpoint[1] - ego_route.midpoint[1],
        )
        if rel == "front":
            return geo.dot(delta, ego_route.direction) > 0
        if rel == "behind":
            return geo.dot(delta, ego_route.direction) < 0
        if rel == "left":
            return geo.cross(ego_route.direction, delta) > 0
        if rel == "right":
            return geo.cross(ego_route.direction, delta) < 0
        if rel == "opposite":
            return geo.dot(route.direction, ego_route.direction) < cfg.opposite_dot
        if rel == "on":
            return _on_same_chain(graph, route.id, ego_route.id)
        return True  # none or unknown relation: no extra constraint

    tags = {normalize_token(t) for t in route.region_tags}
    if ref in _region_tokens(graph):
        preds = route.predecessors
        pred_tags = [
            {normalize_token(t) for t in graph.routes[p].region_tags} for p in preds
        ]
        if rel in ("on", SENTINEL):
            return ref in tags
        if rel == "behind":
            return ref in tags and bool(preds) and all(ref not in pt for pt in pred_tags)
        if rel == "front":
            return ref not in tags and any(ref in pt for pt in pred_tags)
        return False  # left/right/opposite of a region: not supported

    if ref in {normalize_token(s.token) for s in graph.lane_map.signs}:
        window = _window_signs(graph, route.id, cfg.sign_lookback_routes)
        if rel in ("behind", "on", "front", SENTINEL):
            return ref in window
        return False

    markers = _lane_markers(graph, route)
    if ref in markers:
        return True
    # reference names something this map does not carry
    return False


def _on_same_chain(graph: RouteGraph, a: str, b: str, limit: int = 64) -> bool:
    """True when a directed successor path links the two routes either way."""

    def reaches(src: str, dst: str) -> bool:
        seen = {src}
        frontier = [src]
        for _ in range(limit):
            nxt = []
            for rid in frontier:
                for sid in graph.routes[rid].successors:
                    if sid == dst:
                        return True
                    if sid not in seen:
                        seen.add(sid)
                        nxt.append(sid)
            if not nxt:
                return False
            frontier = nxt
        return False

    return a == b or reaches(a, b) or reaches(b, a)


def find_ego_routes(
    graph: RouteGraph, ego: Actor, candidates: list[str], cfg: GenConfig = GenConfig()
) -> list[str]:
    """Candidates whose topology matches the ego behavior and position."""
    out = []
    for rid in candidates:
        route = graph.routes[rid]
        if route.lane_id is not None:
            if graph.lane_map.lanes[route.lane_id].kind != "driving":
                continue
        if not _behavior_matches(graph, route, ego.behavior, cfg):
            continue
        if not _position_matches(
            graph, route, ego.position.reference, ego.position.relation, cfg, None
        ):
            continue
        out.append(rid)
    return out


@dataclass(frozen=True)
class NpcAssignment:
    actor_id: str
    actor_type: str
    behavior: str
    route_id: str
    pose: Pose
    target_speed_mps: float


def _npc_speed(actor_type: str, behavior: str, cfg: GenConfig) -> float:
    if normalize_token(behavior) == "static":
        return 0.0
    if normalize_token(actor_type) == "pedestrian":
        return cfg.pedestrian_speed_mps
    return cfg.npc_speed_mps


def _route_allows_actor(graph: RouteGraph, route: Route, actor_type: str) -> bool:
    kind = normalize_token(actor_type)
    if route.lane_id is None:
        return kind != "pedestrian"  # junction/lane-change links are vehicle space
    lane_kind = graph.lane_map.lanes[route.lane_id].kind
    if kind == "pedestrian":
        return lane_kind == "shoulder"
    return lane_kind == "driving"


def find_npc_assignment(
    graph: RouteGraph,
    ego_route_id: str,
    npcs: tuple[Actor, ...],
    cfg: GenConfig = GenConfig(),
    ego_spawn: tuple[float, float] | None = None,
) -> list[NpcAssignment] | None:
    """Greedy nearby-route assignment, one NPC at a time in list order.

    Each NPC takes the lowest-id unused route near the ego route that
    satisfies its behavior and position predicates and keeps spawn points
    apart. Returns None as soon as one NPC has no feasible route.
    """
    ego_route = graph.route(ego_route_id)
    nearby = routes_within(graph, ego_route_id, cfg.nearby_radius_m)
    taken = {ego_route_id}
    spawns: list[tuple[float, float]] = []
    if ego_spawn is not None:
        spawns.append(ego_spawn)
    out: list[NpcAssignment] = []
    for i, npc in enumerate(npcs):
        chosen: Route | None = None
        for rid in nearby:
            if rid in taken:
                continue
            route = graph.routes[rid]
            if not _route_allows_actor(graph, route, npc.type):
                continue
            if not _behavior_matches(graph, route, npc.behavior, cfg, ego_route=ego_route):
                continue
            if not _position_matches(
                graph, route, npc.position.reference, npc.position.relation, cfg, ego_route
            ):
                continue
            if any(geo.dist(route.start, s) < cfg.spawn_gap_m for s in spawns):
                continue
            chosen = route
            break
        if chosen is None:
            return None
        taken.add(chosen.id)
        spawns.append(chosen.start)
        out.append(
            NpcAssignment(
                actor_id=f"npc{i}",
                actor_type=(npc.type if normalize_token(npc.type) != SENTINEL else "car"),
                behavior=npc.behavior,
                route_id=chosen.id,
                pose=Pose(chosen.start[0], chosen.start[1],
                          geo.angle_of(*chosen.direction)),
                target_speed_mps=_npc_speed(npc.type, npc.behavior, cfg),
            )
        )
    return out


# ---------------------------------------------------------------------------
# ego path assembly

def successor_chain(
    graph: RouteGraph, start_id: str, max_length_m: float
) -> list[str]:
    """Walk lowest-id successors from a route until the length budget runs
    out, a dead end is hit, or the walk would revisit a route."""
    chain = [start_id]
    total = graph.routes[start_id].length
    seen = {start_id}
    while total < max_length_m:
        succs = [s for s in graph.routes[chain[-1]].successors if s not in seen]
        if not succs:
            break
        nxt = min(succs)
        chain.append(nxt)
        seen.add(nxt)
        total += graph.routes[nxt].length
    return chain


def chain_polyline(graph: RouteGraph, chain: list[str]) -> list[tuple[float, float]]:
    pts = [graph.routes[chain[0]].start]
    for rid in chain:
        pts.append(graph.routes[rid].end)
    return pts


def _region_for(
    graph: RouteGraph, rep: ScenarioRep, ego_route: Route
):
    """The region instance anchoring this scenario, if any names one."""
    for token in (rep.road_network.road_type, rep.ego.position.reference):
        key = normalize_token(token)
        if key == SENTINEL:
            continue
        for region in graph.lane_map.regions:
            if key in {normalize_token(t) for t in region.tags}:
                return region
    return None


def _region_exit_arc(path, polygon) -> float | None:
    """Arc length where the path last leaves the polygon, None if it never
    touches it."""
    last_inside = None
    acc = 0.0
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        seg = geo.dist(a, b)
        if geo.point_in_polygon(a, polygon):
            last_inside = acc
        # boundary crossings inside the segment
        n = len(polygon)
        for j in range(n):
            hit = geo.segment_intersection_point(a, b, polygon[j], polygon[(j + 1) % n])
            if hit is not None:
                last_inside = acc + geo.dist(a, hit)
        acc += seg
    if geo.point_in_polygon(path[-1], polygon):
        last_inside = acc
    return last_inside


def _region_entry_arc(path, polygon) -> float | None:
    """Arc length where the path first meets the polygon boundary or
    interior; None if it stays outside."""
    acc = 0.0
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        if geo.point_in_polygon(a, polygon):
            return acc
        hits = []
        n = len(polygon)
        for j in range(n):
            hit = geo.segment_intersection_point(a, b, polygon[j], polygon[(j + 1) % n])
            if hit is not None:
                hits.append(geo.dist(a, hit))
        if hits:
            return acc + min(hits)
        acc += geo.dist(a, b)
    if geo.point_in_polygon(path[-1], polygon):
        return acc
    return None


def _arc_of_chain_end(graph: RouteGraph, chain: list[str], rid: str) -> float:
    acc = 0.0
    for cid in chain:
        acc += graph.routes[cid].length
        if cid == rid:
            return acc
    raise KeyError(rid)


# ---------------------------------------------------------------------------
# oracle anchoring

def resolve_oracles(
    oracle: Oracle,
    anchors: dict,
    thresholds: Thresholds = Thresholds(),
    time_limit_s: float = SimConfig().time_limit_s,
    headway_multiplier: float = 1.0,
) -> MonitorConfig:
    """Build the monitor configuration, one check per oracle token.

    `anchors` carries whatever geometry the generator derived; each check
    picks what it needs and MissingAnchor names the first gap.
    """
    checks: list[CheckSpec] = []

    def need(token: str, key: str):
        value = anchors.get(key)
        if value is None:
            raise MissingAnchor(token, f"no {key} available")
        return value

    for token in oracle.longitudinal:
        t = normalize_token(token)
        if t == "stop":
            checks.append(CheckSpec("stop", "longitudinal", need("stop", "stop_line")))
        elif t == "yield":
            checks.append(
                CheckSpec(
                    "yield", "longitudinal",
                    {
                        "conflict_region": need("yield", "conflict_region"),
                        "privileged": anchors.get("privileged", []),
                    },
                )
            )
        elif t == "decelerate":
            checks.append(
                CheckSpec(
                    "decelerate", "longitudinal",
                    {"trigger_region": need("decelerate", "trigger_region")},
                )
            )
        elif t == "keep safe distance":
            checks.append(
                CheckSpec(
                    "keep safe distance", "longitudinal",
                    {"lead_id": need("keep safe distance", "lead_id")},
                )
            )
        elif t == "speed limit":
            checks.append(
                CheckSpec("speed limit", "longitudinal", need("speed limit", "speed_limit"))
            )
        else:
            raise UnknownOracleToken(token)

    for token in oracle.lateral:
        t = normalize_token(token)
        if t == "keep lane":
            checks.append(
                CheckSpec("keep lane", "lateral", need("keep lane", "lane_ref"))
            )
        elif t in ("change lane to left", "change lane to right"):
            params = need(t, "lane_change")
            want = "left" if t.endswith("left") else "right"
            if params.get("direction") != want:
                raise MissingAnchor(t, f"ego path changes lane {params.get('direction')}")
            checks.append(CheckSpec(t, "lateral", params))
        else:
            raise UnknownOracleToken(token)

    return MonitorConfig(
        checks=tuple(checks),
        time_limit_s=time_limit_s,
        headway_multiplier=headway_multiplier,
        collision_check=True,
        thresholds=thresholds,
    )


def _derive_anchors(
    graph: RouteGraph,
    rep: ScenarioRep,
    ego_route: Route,
    chain: list[str],
    path: list[tuple[float, float]],
    assignments: list[NpcAssignment],
    cfg: GenConfig,
) -> dict:
    anchors: dict = {}
    region = _region_for(graph, rep, ego_route)

    # stop line: a stop sign near the ego window wins, else the region entry
    stop_arc = None
    for rid in chain:
        for sign in graph.route_signs.get(rid, ()):
            if normalize_token(sign.token) == "stop sign":
                stop_arc, _ = geo.project_onto_polyline(path, (sign.x, sign.y))
                break
        if stop_arc is not None:
            break
    if stop_arc is None and region is not None:
        stop_arc = _region_entry_arc(path, region.polygon)
    if stop_arc is not None:
        point, heading = geo.point_at_arc(path, stop_arc)
        anchors["stop_line"] = {
            "point": [point[0], point[1]],
            "direction": [math.cos(heading), math.sin(heading)],
        }

    if region is not None:
        poly = [[x, y] for x, y in region.polygon]
        anchors["conflict_region"] = {"polygon": poly}
        anchors["trigger_region"] = {"polygon": poly}
    else:
        # fall back to a box around the first crossing with an NPC route
        for a in assignments:
            npc_route = graph.routes[a.route_id]
            hit = geo.segment_intersection_point(
                ego_route.start, ego_route.end, npc_route.start, npc_route.end
            )
            if hit is not None:
                h = cfg.conflict_box_m
                poly = [
                    [hit[0] - h, hit[1] - h], [hit[0] + h, hit[1] - h],
                    [hit[0] + h, hit[1] + h], [hit[0] - h, hit[1] + h],
                ]
                anchors["conflict_region"] = {"polygon": poly}
                anchors["trigger_region"] = {"polygon": poly}
                break

    anchors["privileged"] = [a.actor_id for a in assignments]
    if assignments:
        lead = next(
            (a for a in assignments
             if normalize_token(a.behavior) != "static"
             and geo.dot(
                 (graph.routes[a.route_id].midpoint[0] - ego_route.midpoint[0],
                  graph.routes[a.route_id].midpoint[1] - ego_route.midpoint[1]),
                 ego_route.direction) > 0),
            assignments[0],
        )
        anchors["lead_id"] = lead.actor_id

    for rid in chain:
        for sign in graph.route_signs.get(rid, ()):
            if normalize_token(sign.token) == "speed limit sign" and sign.value:
                s_arc, _ = geo.project_onto_polyline(path, (sign.x, sign.y))
                point, heading = geo.point_at_arc(path, s_arc)
                anchors["speed_limit"] = {
                    "limit_mps": sign.value,
                    "start": [point[0], point[1]],
                    "direction": [math.cos(heading), math.sin(heading)],
                }
                break
        if "speed_limit" in anchors:
            break

    lane_id = ego_route.lane_id
    if lane_id is None and ego_route.predecessors:
        lane_id = graph.routes[min(ego_route.predecessors)].lane_id
    if lane_id is not None:
        lane = graph.lane_map.lanes[lane_id]
        anchors["lane_ref"] = {
            "lane_id": lane_id,
            "centerline": [[x, y] for x, y in graph.lane_map.lane_polyline(lane_id)],
            "width": lane.width,
        }

    for i, rid in enumerate(chain):
        route = graph.routes[rid]
        if route.kind == "lane_change":
            from_lane = graph.routes[chain[i - 1]].lane_id if i > 0 else None
            to_lane = graph.routes[chain[i + 1]].lane_id if i + 1 < len(chain) else None
            if from_lane and to_lane:
                anchors["lane_change"] = {
                    "from_lane": from_lane,
                    "to_lane": to_lane,
                    "direction": _lane_change_side(graph, route),
                }
            break

    return anchors


# ---------------------------------------------------------------------------
# top level

def generate_all(
    rep: ScenarioRep,
    graph: RouteGraph,
    cfg: GenConfig = GenConfig(),
    thresholds: Thresholds = Thresholds(),
    time_limit_s: float = SimConfig().time_limit_s,
    rule_id: str = "rep",
) -> list[ConcreteScenario]:
    """Every scenario generate() could emit: one per satisfying ego route."""
    env_params = resolve_environment(rep.environment)
    headway_mult = environment_headway_multiplier(rep.environment)
    candidates = filter_routes(graph, rep.road_network, cfg)
    ego_ids = find_ego_routes(graph, rep.ego, candidates, cfg)

    out = []
    anchor_error: MissingAnchor | None = None
    for ego_id in ego_ids:
        ego_route = graph.routes[ego_id]
        if not ego_route.predecessors:
            continue  # no run-up route to spawn on
        spawn_route = graph.routes[min(ego_route.predecessors)]
        spawn = Pose(
            spawn_route.start[0], spawn_route.start[1],
            geo.angle_of(*spawn_route.direction),
        )
        assignments = find_npc_assignment(
            graph, ego_id, rep.npc_actors, cfg, ego_spawn=spawn_route.start
        )
        if assignments is None:
            continue

        region = _region_for(graph, rep, ego_route)
        budget = 400.0 + cfg.destination_margin_m
        chain = [spawn_route.id] + successor_chain(graph, ego_id, budget)
        path = chain_polyline(graph, chain)
        if region is not None:
            exit_arc = _region_exit_arc(path, region.polygon)
        else:
            exit_arc = None
        if exit_arc is None:
            exit_arc = _arc_of_chain_end(graph, chain, ego_id)
        target_arc = exit_arc + cfg.destination_margin_m

        dest_rid = chain[-1]
        for rid in chain:
            if _arc_of_chain_end(graph, chain, rid) >= target_arc:
                dest_rid = rid
                break
        chain = chain[: chain.index(dest_rid) + 1]
        path = chain_polyline(graph, chain)
        dest_route = graph.routes[dest_rid]

        anchors = _derive_anchors(graph, rep, ego_route, chain, path, assignments, cfg)
        try:
            monitor = resolve_oracles(
                rep.oracle, anchors, thresholds=thresholds,
                time_limit_s=time_limit_s, headway_multiplier=headway_mult,
            )
        except MissingAnchor as e:
            # a route that cannot anchor the oracle does not satisfy the
            # scenario; only if every candidate fails this way is the map
            # genuinely missing the geometry
            anchor_error = e
            continue

        safe_ego = ego_id.replace(":", "-")
        out.append(
            ConcreteScenario(
                scenario_id=f"{rule_id}--{graph.lane_map.map_id}--{safe_ego}",
                rule_id=rule_id,
                map_id=graph.lane_map.map_id,
                environment=env_params,
                ego=EgoSetup(
                    pose=spawn,
                    route_id=ego_id,
                    route_ids=tuple(chain),
                    destination_wp=dest_route.end_wp,
                    destination=dest_route.end,
                ),
                npc_scripts=tuple(
                    NpcScript(
                        actor_id=a.actor_id, actor_type=a.actor_type,
                        behavior=a.behavior, pose=a.pose,
                        # moving actors keep driving past their matched route
                        route_ids=(
                            (a.route_id,)
                            if a.target_speed_mps <= 0
                            else tuple(successor_chain(graph, a.route_id, cfg.npc_chain_m))
                        ),
                        target_speed_mps=a.target_speed_mps,
                    )
                    for a in assignments
                ),
                monitor=monitor,
            )
        )
    if not out and anchor_error is not None:
        raise anchor_error
    return out


def generate(
    rep: ScenarioRep,
    graph: RouteGraph,
    cfg: GenConfig = GenConfig(),
    thresholds: Thresholds = Thresholds(),
    time_limit_s: float = SimConfig().time_limit_s,
    rule_id: str = "rep",
) -> ConcreteScenario:
    """First satisfying scenario in ego-route id order."""
    scenarios = generate_all(
        rep, graph, cfg, thresholds, time_limit_s=time_limit_s, rule_id=rule_id
    )
    if not scenarios:
        candidates = filter_routes(graph, rep.road_network, cfg)
        ego_ids = find_ego_routes(graph, rep.ego, candidates, cfg)
        raise ScenarioUnsupportedOnMap(
            graph.lane_map.map_id,
            f"{len(candidates)} routes pass the road filter, "
            f"{len(ego_ids)} match the ego, none yields a full NPC assignment",
        )
    return scenarios[0]
