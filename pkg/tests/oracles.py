"""Reference implementations used to cross-check scenario generation.

Everything here re-derives its answers from raw map data (routes, lane
markers, regions, signs) with local arithmetic and shapely, deliberately
avoiding the package's search, chain-assembly, and anchoring code. The
deciders are exhaustive where the package is greedy, so they double as a
completeness oracle.
"""

import math

from shapely.geometry import LineString, Point, Polygon

from rulescene.catalog import SENTINEL, normalize_token as norm
from rulescene.config import GenConfig


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _dist(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _angle_deg(ref, vec):
    return math.degrees(
        math.atan2(_cross(ref, vec), _dot(ref, vec))
    )


# ---------------------------------------------------------------------------
# predicates mirrored from raw map data

def predecessor_window(graph, rid, generations):
    seen = {rid}
    frontier = [rid]
    for _ in range(generations):
        frontier = [
            p
            for r in frontier
            for p in graph.routes[r].predecessors
            if p not in seen and not seen.add(p)
        ]
    return seen


def window_sign_tokens(graph, rid, generations):
    return {
        norm(t)
        for r in predecessor_window(graph, rid, generations)
        for t in graph.routes[r].signs_on_route
    }


def lane_marker_tokens(graph, route):
    if route.lane_id is None:
        return set()
    lane = graph.lane_map.lanes[route.lane_id]
    return {norm(lane.left_marker), norm(lane.right_marker)}


def road_filter_ok(graph, route, road, cfg):
    if norm(road.road_type) != SENTINEL:
        if norm(road.road_type) not in {norm(t) for t in route.region_tags}:
            return False
    if norm(road.road_marker) != SENTINEL:
        if norm(road.road_marker) not in lane_marker_tokens(graph, route):
            return False
    wanted = [norm(t) for t in road.traffic_signs]
    if wanted:
        window = window_sign_tokens(graph, route.id, cfg.sign_lookback_routes)
        if not all(t in window for t in wanted):
            return False
    return True


def approach_angle_deg(graph, route):
    if route.predecessors:
        ref = graph.routes[min(route.predecessors)].direction
        return _angle_deg(ref, route.direction)
    if route.successors:
        nxt = graph.routes[min(route.successors)].direction
        return _angle_deg(route.direction, nxt)
    return 0.0


def conflict_kind(a, b):
    if a.id == b.id:
        return "none"
    if a.end_wp == b.end_wp:
        return "merging"
    if LineString([a.start, a.end]).crosses(LineString([b.start, b.end])):
        return "crossing"
    return "none"


def behavior_ok(graph, route, behavior, cfg, ego_route=None):
    b = norm(behavior)
    if b in (SENTINEL, "static", "decelerate"):
        return True
    angle = approach_angle_deg(graph, route)
    if b == "go forward":
        return abs(angle) < cfg.turn_threshold_deg
    if b == "turn left":
        return cfg.turn_threshold_deg < angle <= cfg.turn_max_deg
    if b == "turn right":
        return -cfg.turn_max_deg <= angle < -cfg.turn_threshold_deg
    if b in ("change lane to left", "change lane to right"):
        if route.kind != "lane_change":
            return False
        return lane_change_side(graph, route) == b.rsplit(" ", 1)[1]
    if b == "cross":
        if ego_route is None:
            return True
        return conflict_kind(ego_route, route) == "crossing"
    return True


def lane_change_side(graph, route):
    if route.predecessors:
        ref = graph.routes[min(route.predecessors)].direction
    elif route.successors:
        ref = graph.routes[min(route.successors)].direction
    else:
        ref = route.direction
    return "left" if _cross(ref, route.direction) > 0 else "right"


def chain_reachable(graph, a, b):
    def bfs(src, dst):
        seen = {src}
        frontier = [src]
        while frontier:
            frontier = [
                s
                for r in frontier
                for s in graph.routes[r].successors
                if s not in seen and not seen.add(s)
            ]
            if dst in seen:
                return True
        return False

    return a == b or bfs(a, b) or bfs(b, a)


def position_ok(graph, route, reference, relation, cfg, ego_route):
    ref = norm(reference)
    rel = norm(relation)
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
            return _dot(delta, ego_route.direction) > 0
        if rel == "behind":
            return _dot(delta, ego_route.direction) < 0
        if rel == "left":
            return _cross(ego_route.direction, delta) > 0
        if rel == "right":
            return _cross(ego_route.direction, delta) < 0
        if rel == "opposite":
            return _dot(route.direction, ego_route.direction) < cfg.opposite_dot
        if rel == "on":
            return chain_reachable(graph, route.id, ego_route.id)
        return True

    region_tokens = {
        norm(t) for region in graph.lane_map.regions for t in region.tags
    }
    if ref in region_tokens:
        tags = {norm(t) for t in route.region_tags}
        pred_tags = [
            {norm(t) for t in graph.routes[p].region_tags}
            for p in route.predecessors
        ]
        if rel in ("on", SENTINEL):
            return ref in tags
        if rel == "behind":
            return ref in tags and bool(pred_tags) and all(
                ref not in pt for pt in pred_tags
            )
        if rel == "front":
            return ref not in tags and any(ref in pt for pt in pred_tags)
        return False

    if ref in {norm(s.token) for s in graph.lane_map.signs}:
        if rel in ("behind", "on", "front", SENTINEL):
            return ref in window_sign_tokens(graph, route.id, cfg.sign_lookback_routes)
        return False

    return ref in lane_marker_tokens(graph, route)


def actor_allowed(graph, route, actor_type):
    kind = norm(actor_type)
    if route.lane_id is None:
        return kind != "pedestrian"
    lane_kind = graph.lane_map.lanes[route.lane_id].kind
    if kind == "pedestrian":
        return lane_kind == "shoulder"
    return lane_kind == "driving"


# ---------------------------------------------------------------------------
# chain and destination mirror

def mirror_chain(graph, rep, ego_rid, cfg):
    """(chain route ids, path points) as the generator should assemble them."""
    ego = graph.routes[ego_rid]
    spawn = min(ego.predecessors)
    chain = [spawn, ego_rid]
    total = ego.length
    budget = 400.0 + cfg.destination_margin_m
    seen = {ego_rid}
    while total < budget:
        succs = [s for s in graph.routes[chain[-1]].successors if s not in seen]
        if not succs:
            break
        nxt = min(succs)
        chain.append(nxt)
        seen.add(nxt)
        total += graph.routes[nxt].length

    path = [graph.routes[chain[0]].start] + [graph.routes[r].end for r in chain]
    region = anchoring_region(graph, rep)
    exit_arc = region_exit_arc(path, region.polygon) if region else None
    if exit_arc is None:
        exit_arc = sum(graph.routes[r].length for r in chain[:2])
    target = exit_arc + cfg.destination_margin_m

    acc = 0.0
    dest_index = len(chain) - 1
    for i, rid in enumerate(chain):
        acc += graph.routes[rid].length
        if acc >= target:
            dest_index = i
            break
    chain = chain[: dest_index + 1]
    path = [graph.routes[chain[0]].start] + [graph.routes[r].end for r in chain]
    return chain, path


def anchoring_region(graph, rep):
    for token in (rep.road_network.road_type, rep.ego.position.reference):
        key = norm(token)
        if key == SENTINEL:
            continue
        for region in graph.lane_map.regions:
            if key in {norm(t) for t in region.tags}:
                return region
    return None


def region_exit_arc(path, polygon):
    ls = LineString(path)
    poly = Polygon(polygon)
    arcs = []
    acc = 0.0
    for i, pt in enumerate(path):
        if i:
            acc += _dist(path[i - 1], pt)
        if poly.covers(Point(pt)):
            arcs.append(acc)
    hit = ls.intersection(poly.exterior)
    pieces = getattr(hit, "geoms", [hit] if not hit.is_empty else [])
    for g in pieces:
        for x, y in g.coords:
            arcs.append(ls.project(Point(x, y)))
    return max(arcs) if arcs else None


# ---------------------------------------------------------------------------
# oracle-anchor feasibility mirror

def chain_has_sign(graph, chain, token, need_value=False):
    for rid in chain:
        for sign in graph.route_signs.get(rid, ()):
            if norm(sign.token) == token and (not need_value or sign.value):
                return True
    return False


def needs_crossing_npc(rep, graph):
    """True when yield/decelerate anchors must fall back to an NPC conflict."""
    tokens = {norm(t) for t in rep.oracle.longitudinal}
    if not tokens & {"yield", "decelerate"}:
        return False
    return anchoring_region(graph, rep) is None


def anchor_feasible(graph, rep, ego_rid, chain, path, cfg, crossing_available):
    """None when every oracle token can anchor, else the failing token."""
    ego = graph.routes[ego_rid]
    region = anchoring_region(graph, rep)
    for token in rep.oracle.longitudinal:
        t = norm(token)
        if t == "stop":
            if chain_has_sign(graph, chain, "stop sign"):
                continue
            if region and LineString(path).distance(Polygon(region.polygon)) < 1e-9:
                continue
            return token
        if t in ("yield", "decelerate"):
            if region is None and not crossing_available:
                return token
        elif t == "keep safe distance":
            if not rep.npc_actors:
                return token
        elif t == "speed limit":
            if not chain_has_sign(graph, chain, "speed limit sign", need_value=True):
                return token
    for token in rep.oracle.lateral:
        t = norm(token)
        if t == "keep lane":
            lane_id = ego.lane_id
            if lane_id is None and ego.predecessors:
                lane_id = graph.routes[min(ego.predecessors)].lane_id
            if lane_id is None:
                return token
        elif t in ("change lane to left", "change lane to right"):
            found = None
            for i, rid in enumerate(chain):
                r = graph.routes[rid]
                if r.kind == "lane_change":
                    prev = graph.routes[chain[i - 1]].lane_id if i else None
                    nxt = (
                        graph.routes[chain[i + 1]].lane_id
                        if i + 1 < len(chain)
                        else None
                    )
                    if prev and nxt:
                        found = lane_change_side(graph, r)
                    break
            if found != t.rsplit(" ", 1)[1]:
                return token
    return None


# ---------------------------------------------------------------------------
# exhaustive search

def npc_candidate_routes(graph, ego_rid, npc, cfg, nearby):
    ego = graph.routes[ego_rid]
    out = []
    for rid in nearby:
        if rid == ego_rid:
            continue
        route = graph.routes[rid]
        if not actor_allowed(graph, route, npc.type):
            continue
        if not behavior_ok(graph, route, npc.behavior, cfg, ego_route=ego):
            continue
        if not position_ok(
            graph, route, npc.position.reference, npc.position.relation, cfg, ego
        ):
            continue
        out.append(rid)
    return out


def nearby_routes(graph, ego_rid, radius):
    ego = graph.routes[ego_rid]
    seg = LineString([ego.start, ego.end])
    return sorted(
        rid
        for rid, r in graph.routes.items()
        if min(Point(r.start).distance(seg), Point(r.end).distance(seg)) <= radius
    )


def assignment_exists(graph, ego_rid, rep, cfg, require_crossing):
    """Exhaustive: does ANY injective NPC-to-route assignment work?"""
    ego = graph.routes[ego_rid]
    spawn_route = graph.routes[min(ego.predecessors)]
    nearby = nearby_routes(graph, ego_rid, cfg.nearby_radius_m)
    cand = [
        npc_candidate_routes(graph, ego_rid, npc, cfg, nearby)
        for npc in rep.npc_actors
    ]

    def dfs(i, taken, spawns, have_crossing):
        if i == len(cand):
            return have_crossing or not require_crossing
        for rid in cand[i]:
            if rid in taken:
                continue
            start = graph.routes[rid].start
            if any(_dist(start, s) < cfg.spawn_gap_m for s in spawns):
                continue
            crosses = have_crossing or (
                conflict_kind(ego, graph.routes[rid]) == "crossing"
            )
            if dfs(i + 1, taken | {rid}, spawns + [start], crosses):
                return True
        return False

    return dfs(0, set(), [spawn_route.start], False)


def ego_candidates(graph, rep, cfg):
    out = []
    for rid in sorted(graph.routes):
        route = graph.routes[rid]
        if route.lane_id is not None:
            if graph.lane_map.lanes[route.lane_id].kind != "driving":
                continue
        if not road_filter_ok(graph, route, rep.road_network, cfg):
            continue
        if not behavior_ok(graph, route, rep.ego.behavior, cfg):
            continue
        if not position_ok(
            graph, route, rep.ego.position.reference,
            rep.ego.position.relation, cfg, None,
        ):
            continue
        out.append(rid)
    return out


def brute_force_generatable(rep, graph, cfg=GenConfig()):
    """True iff some (ego route, NPC assignment) yields a full scenario."""
    require_crossing = needs_crossing_npc(rep, graph)
    for rid in ego_candidates(graph, rep, cfg):
        if not graph.routes[rid].predecessors:
            continue
        if not assignment_exists(graph, rid, rep, cfg, require_crossing):
            continue
        chain, path = mirror_chain(graph, rep, rid, cfg)
        # a crossing partner is guaranteed by assignment_exists when required
        if anchor_feasible(graph, rep, rid, chain, path, cfg, True) is None:
            return True
    return False


# ---------------------------------------------------------------------------
# post-hoc validator for emitted scenarios

def validate_concrete(scn, rep, graph, cfg=GenConfig()):
    """List of problems found in an emitted scenario; empty means valid."""
    problems = []

    def check(cond, msg):
        if not cond:
            problems.append(msg)

    ego_rid = scn.ego.route_id
    check(ego_rid in graph.routes, f"unknown ego route {ego_rid}")
    if ego_rid not in graph.routes:
        return problems
    ego = graph.routes[ego_rid]
    safe = ego_rid.replace(":", "-")
    check(
        scn.scenario_id == f"{scn.rule_id}--{scn.map_id}--{safe}",
        f"scenario id {scn.scenario_id!r} malformed",
    )
    check(scn.map_id == graph.lane_map.map_id, "map id mismatch")

    # spawn pose sits at the start of the lowest-id predecessor
    check(bool(ego.predecessors), "ego route has no approach")
    if ego.predecessors:
        spawn = graph.routes[min(ego.predecessors)]
        check(
            (scn.ego.pose.x, scn.ego.pose.y) == spawn.start,
            "ego pose is not the approach start",
        )
        want_heading = math.atan2(spawn.direction[1], spawn.direction[0])
        check(
            abs(scn.ego.pose.heading - want_heading) < 1e-9,
            "ego heading mismatch",
        )
        check(scn.ego.route_ids[0] == spawn.id, "chain must open with the approach")
    check(len(scn.ego.route_ids) >= 2 and scn.ego.route_ids[1] == ego_rid,
          "chain must continue with the matched route")

    for a, b in zip(scn.ego.route_ids, scn.ego.route_ids[1:]):
        check(
            graph.routes[a].end_wp == graph.routes[b].start_wp,
            f"chain break between {a} and {b}",
        )
    last = graph.routes[scn.ego.route_ids[-1]]
    check(scn.ego.destination == last.end, "destination is not the chain end")
    check(scn.ego.destination_wp == last.end_wp, "destination waypoint mismatch")

    chain, _ = mirror_chain(graph, rep, ego_rid, cfg)
    check(
        list(scn.ego.route_ids) == chain,
        f"chain {list(scn.ego.route_ids)} != expected {chain}",
    )

    # npc scripts
    check(len(scn.npc_scripts) == len(rep.npc_actors), "npc count mismatch")
    seen_routes = {ego_rid}
    spawns = [(scn.ego.pose.x, scn.ego.pose.y)]
    for i, npc in enumerate(scn.npc_scripts):
        check(npc.actor_id == f"npc{i}", f"npc id {npc.actor_id}")
        first = graph.routes[npc.route_ids[0]]
        check((npc.pose.x, npc.pose.y) == first.start, f"{npc.actor_id} pose")
        check(npc.route_ids[0] not in seen_routes, f"{npc.actor_id} reuses a route")
        seen_routes.add(npc.route_ids[0])
        check(
            all(_dist(first.start, s) >= cfg.spawn_gap_m for s in spawns),
            f"{npc.actor_id} spawns too close",
        )
        spawns.append(first.start)
        for a, b in zip(npc.route_ids, npc.route_ids[1:]):
            check(
                graph.routes[a].end_wp == graph.routes[b].start_wp,
                f"{npc.actor_id} chain break",
            )
        if npc.target_speed_mps <= 0:
            check(len(npc.route_ids) == 1, "static npc should hold one route")
        if norm(npc.behavior) == "static":
            check(npc.target_speed_mps == 0.0, "static npc must not move")
        elif norm(npc.actor_type) == "pedestrian":
            check(npc.target_speed_mps == cfg.pedestrian_speed_mps, "ped speed")
        else:
            check(npc.target_speed_mps == cfg.npc_speed_mps, "vehicle speed")
        spec = rep.npc_actors[i]
        if norm(spec.type) != SENTINEL:
            check(npc.actor_type == spec.type, f"{npc.actor_id} type")
        cand = npc_candidate_routes(
            graph, ego_rid, spec, cfg,
            nearby_routes(graph, ego_rid, cfg.nearby_radius_m),
        )
        check(npc.route_ids[0] in cand, f"{npc.actor_id} route fails its predicates")

    # monitor checks cover the oracle tokens in order and anchor on the map
    want = [(norm(t), "longitudinal") for t in rep.oracle.longitudinal]
    want += [(norm(t), "lateral") for t in rep.oracle.lateral]
    got = [(norm(c.token), c.axis) for c in scn.monitor.checks]
    check(got == want, f"checks {got} != oracle {want}")
    for c in scn.monitor.checks:
        problems.extend(
            f"{c.token}: {p}" for p in _check_anchor_on_map(c, scn, rep, graph)
        )
    return problems


def _check_anchor_on_map(check_spec, scn, rep, graph):
    problems = []
    t = norm(check_spec.token)
    p = check_spec.params
    path = [graph.routes[scn.ego.route_ids[0]].start] + [
        graph.routes[r].end for r in scn.ego.route_ids
    ]
    ls = LineString(path)
    region = anchoring_region(graph, rep)
    npc_ids = [n.actor_id for n in scn.npc_scripts]

    if t == "stop":
        pt = Point(p["point"])
        if pt.distance(ls) > 0.5:
            problems.append("stop point off the ego path")
        near_sign = any(
            pt.distance(Point(s.x, s.y)) < 6.0
            for s in graph.lane_map.signs
            if norm(s.token) == "stop sign"
        )
        on_region = region is not None and (
            Polygon(region.polygon).exterior.distance(pt) < 0.5
            or Polygon(region.polygon).covers(pt)
        )
        if not (near_sign or on_region):
            problems.append("stop point anchored to nothing on the map")
    elif t == "yield":
        poly = p["conflict_region"]["polygon"]
        if region is not None:
            if [list(q) for q in region.polygon] != poly:
                problems.append("conflict region is not the named map region")
        if sorted(p.get("privileged", [])) != sorted(npc_ids):
            problems.append("privileged set is not the npc set")
    elif t == "decelerate":
        poly = Polygon(p["trigger_region"]["polygon"])
        if region is not None and not poly.equals(Polygon(region.polygon)):
            problems.append("trigger region is not the named map region")
        if ls.distance(poly) > 1e-6:
            problems.append("ego path misses the trigger region")
    elif t == "keep safe distance":
        if p["lead_id"] not in npc_ids:
            problems.append("lead actor is not in the scenario")
    elif t == "speed limit":
        signs = [
            s
            for s in graph.lane_map.signs
            if norm(s.token) == "speed limit sign" and s.value == p["limit_mps"]
        ]
        if not signs:
            problems.append("limit value matches no map sign")
        if Point(p["start"]).distance(ls) > 0.5:
            problems.append("limit start off the ego path")
    elif t == "keep lane":
        lane = graph.lane_map.lanes.get(p["lane_id"])
        if lane is None:
            problems.append("unknown lane")
        else:
            want = [[x, y] for x, y in graph.lane_map.lane_polyline(p["lane_id"])]
            if p["centerline"] != want:
                problems.append("centerline does not match the lane")
            if p["width"] != lane.width:
                problems.append("width does not match the lane")
    elif t in ("change lane to left", "change lane to right"):
        if p["from_lane"] not in graph.lane_map.lanes:
            problems.append("unknown from_lane")
        if p["to_lane"] not in graph.lane_map.lanes:
            problems.append("unknown to_lane")
        if p["direction"] != t.rsplit(" ", 1)[1]:
            problems.append("direction does not match the token")
    return problems
