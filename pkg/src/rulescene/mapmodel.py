"""Lane-level map files and the route graph derived from them.

A map is JSON with sections `meta`, `waypoints`, `lanes`, `connectors`,
`regions`, `signs`; meters, radians, right-handed x/y. Routes are the unit of
all downstream reasoning: one route per adjacent waypoint pair along a lane
(ids `lane:<lane_id>:<index>`), plus one per declared connector
(ids `link:<connector_id>`). Connectors model both junction movements and
lane changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import geometry as geo

SCHEMA = "lanemap.v1"
MAX_WAYPOINT_SPACING = 10.0
SIGN_ATTACH_WINDOW = 15.0  # meters past the lane end a sign may still bind

LANE_KINDS = ("driving", "shoulder")
CONNECTOR_KINDS = ("junction", "lane_change")


class MapError(Exception):
    pass


class SchemaError(MapError):
    pass


class GeometryError(MapError):
    pass


class UnknownRoute(MapError):
    def __init__(self, route_id: str):
        self.route_id = route_id
        super().__init__(f"unknown route id: {route_id!r}")


@dataclass(frozen=True)
class Waypoint:
    id: str
    x: float
    y: float
    heading: float
    lane_id: str


@dataclass(frozen=True)
class Lane:
    id: str
    road_id: str
    waypoint_ids: tuple[str, ...]
    width: float
    left_marker: str
    right_marker: str
    kind: str


@dataclass(frozen=True)
class Connector:
    id: str
    start_wp: str
    end_wp: str
    kind: str


@dataclass(frozen=True)
class Region:
    id: str
    tags: tuple[str, ...]
    polygon: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Sign:
    id: str
    token: str
    x: float
    y: float
    lane_id: str
    value: float | None = None


@dataclass(frozen=True)
class LaneMap:
    map_id: str
    waypoints: dict[str, Waypoint]
    lanes: dict[str, Lane]
    connectors: tuple[Connector, ...]
    regions: tuple[Region, ...]
    signs: tuple[Sign, ...]

    def lane_polyline(self, lane_id: str) -> list[tuple[float, float]]:
        lane = self.lanes[lane_id]
        return [(self.waypoints[w].x, self.waypoints[w].y) for w in lane.waypoint_ids]


def _require(cond: bool, exc: type, path: str, msg: str) -> None:
    if not cond:
        raise exc(f"{path}: {msg}")


def _field(d: dict, key: str, path: str):
    if key not in d:
        raise SchemaError(f"{path}: missing {key!r}")
    return d[key]


def load_map(path: str | Path) -> LaneMap:
    """Load and fully validate a map file."""
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"map file not found: {p}")
    try:
        data = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{p}: not valid JSON ({e})") from e

    meta = _field(data, "meta", "meta")
    _require(meta.get("schema") == SCHEMA, SchemaError, "meta.schema",
             f"expected {SCHEMA!r}, got {meta.get('schema')!r}")
    map_id = _field(meta, "id", "meta")

    waypoints: dict[str, Waypoint] = {}
    for i, w in enumerate(_field(data, "waypoints", "waypoints")):
        path_i = f"waypoints[{i}]"
        wp = Waypoint(
            id=_field(w, "id", path_i), x=float(_field(w, "x", path_i)),
            y=float(_field(w, "y", path_i)),
            heading=float(_field(w, "heading", path_i)),
            lane_id=_field(w, "lane", path_i),
        )
        _require(wp.id not in waypoints, SchemaError, path_i, f"duplicate id {wp.id!r}")
        _require(-math.pi <= wp.heading < math.pi, GeometryError, path_i,
                 "heading outside [-pi, pi)")
        waypoints[wp.id] = wp

    lanes: dict[str, Lane] = {}
    lane_list = _field(data, "lanes", "lanes")
    _require(bool(lane_list), SchemaError, "lanes", "empty lanes list")
    for i, l in enumerate(lane_list):
        path_i = f"lanes[{i}]"
        lane = Lane(
            id=_field(l, "id", path_i), road_id=_field(l, "road", path_i),
            waypoint_ids=tuple(_field(l, "waypoints", path_i)),
            width=float(_field(l, "width", path_i)),
            left_marker=l.get("left_marker", "none"),
            right_marker=l.get("right_marker", "none"),
            kind=l.get("kind", "driving"),
        )
        _require(lane.id not in lanes, SchemaError, path_i, f"duplicate id {lane.id!r}")
        _require(lane.kind in LANE_KINDS, SchemaError, path_i,
                 f"lane kind {lane.kind!r} not in {LANE_KINDS}")
        _require(len(lane.waypoint_ids) >= 2, GeometryError, path_i,
                 "lane needs at least 2 waypoints")
        _require(lane.width > 0, GeometryError, path_i, "width must be > 0")
        for j, wid in enumerate(lane.waypoint_ids):
            _require(wid in waypoints, SchemaError, f"{path_i}.waypoints[{j}]",
                     f"unknown waypoint {wid!r}")
            _require(waypoints[wid].lane_id == lane.id, SchemaError,
                     f"{path_i}.waypoints[{j}]",
                     f"waypoint {wid!r} belongs to lane {waypoints[wid].lane_id!r}")
        for j in range(len(lane.waypoint_ids) - 1):
            a = waypoints[lane.waypoint_ids[j]]
            b = waypoints[lane.waypoint_ids[j + 1]]
            d = math.hypot(b.x - a.x, b.y - a.y)
            _require(d > 0, GeometryError, f"{path_i}.waypoints[{j}]",
                     "coincident consecutive waypoints")
            _require(d <= MAX_WAYPOINT_SPACING + 1e-9, GeometryError,
                     f"{path_i}.waypoints[{j}]",
                     f"spacing {d:.2f} m exceeds {MAX_WAYPOINT_SPACING} m")
        lanes[lane.id] = lane

    connectors = []
    seen_conn = set()
    for i, c in enumerate(data.get("connectors", [])):
        path_i = f"connectors[{i}]"
        conn = Connector(
            id=_field(c, "id", path_i), start_wp=_field(c, "from", path_i),
            end_wp=_field(c, "to", path_i), kind=c.get("kind", "junction"),
        )
        _require(conn.id not in seen_conn, SchemaError, path_i, "duplicate id")
        _require(conn.kind in CONNECTOR_KINDS, SchemaError, path_i,
                 f"connector kind {conn.kind!r} not in {CONNECTOR_KINDS}")
        _require(conn.start_wp in waypoints, SchemaError, path_i,
                 f"unknown waypoint {conn.start_wp!r}")
        _require(conn.end_wp in waypoints, SchemaError, path_i,
                 f"unknown waypoint {conn.end_wp!r}")
        _require(conn.start_wp != conn.end_wp, GeometryError, path_i,
                 "connector start equals end")
        seen_conn.add(conn.id)
        connectors.append(conn)

    regions = []
    for i, r in enumerate(data.get("regions", [])):
        path_i = f"regions[{i}]"
        poly = tuple((float(x), float(y)) for x, y in _field(r, "polygon", path_i))
        _require(len(poly) >= 3, GeometryError, path_i, "polygon needs >= 3 points")
        tags = tuple(_field(r, "tags", path_i))
        _require(bool(tags), SchemaError, path_i, "region needs at least one tag")
        regions.append(Region(id=_field(r, "id", path_i), tags=tags, polygon=poly))

    signs = []
    for i, s in enumerate(data.get("signs", [])):
        path_i = f"signs[{i}]"
        sign = Sign(
            id=_field(s, "id", path_i), token=_field(s, "token", path_i),
            x=float(_field(s, "x", path_i)), y=float(_field(s, "y", path_i)),
            lane_id=_field(s, "lane", path_i),
            value=(float(s["value"]) if s.get("value") is not None else None),
        )
        _require(sign.lane_id in lanes, SchemaError, path_i,
                 f"unknown lane {sign.lane_id!r}")
        _require(sign.value is None or sign.value > 0, SchemaError, path_i,
                 "sign value must be positive when present")
        signs.append(sign)

    return LaneMap(
        map_id=map_id, waypoints=waypoints, lanes=lanes,
        connectors=tuple(connectors), regions=tuple(regions), signs=tuple(signs),
    )


# ---------------------------------------------------------------------------
# routes

@dataclass(frozen=True)
class Route:
    id: str
    start_wp: str
    end_wp: str
    start: tuple[float, float]
    end: tuple[float, float]
    length: float
    direction: tuple[float, float]
    lane_id: str | None  # None for connector routes
    kind: str  # lane | junction | lane_change
    predecessors: tuple[str, ...]
    successors: tuple[str, ...]
    signs_on_route: tuple[str, ...]
    region_tags: frozenset[str]

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.start[0] + self.end[0]) / 2.0, (self.start[1] + self.end[1]) / 2.0)


@dataclass(frozen=True)
class RouteGraph:
    lane_map: LaneMap
    routes: dict[str, Route]  # id-sorted insertion order
    route_signs: dict[str, tuple[Sign, ...]]
    _grid: dict[tuple[int, int], tuple[str, ...]]
    cell_size: float

    def route(self, route_id: str) -> Route:
        try:
            return self.routes[route_id]
        except KeyError:
            raise UnknownRoute(route_id) from None

    def sorted_ids(self) -> list[str]:
        return list(self.routes)


def _region_tags_for(point, regions) -> frozenset[str]:
    tags: set[str] = set()
    for region in regions:
        # boundary points resolve away from junction-style tags, so a route
        # ending exactly on the polygon edge is not "in the intersection"
        strict = any("intersection" in t for t in region.tags)
        inside = (
            geo.point_strictly_in_polygon(point, region.polygon)
            if strict else geo.point_in_polygon(point, region.polygon)
        )
        if inside:
            tags.update(region.tags)
    return frozenset(tags)


def _grid_cells(bbox, cell: float):
    (x0, y0, x1, y1) = bbox
    for cx in range(math.floor(x0 / cell), math.floor(x1 / cell) + 1):
        for cy in range(math.floor(y0 / cell), math.floor(y1 / cell) + 1):
            yield (cx, cy)


def build_routes(lane_map: LaneMap, cell_size: float = 20.0) -> RouteGraph:
    """Derive the route graph. Deterministic: ids sort lanes before links."""
    raw: dict[str, dict] = {}

    for lane_id in sorted(lane_map.lanes):
        lane = lane_map.lanes[lane_id]
        for i in range(len(lane.waypoint_ids) - 1):
            a = lane_map.waypoints[lane.waypoint_ids[i]]
            b = lane_map.waypoints[lane.waypoint_ids[i + 1]]
            rid = f"lane:{lane_id}:{i:03d}"
            raw[rid] = {
                "start_wp": a.id, "end_wp": b.id,
                "start": (a.x, a.y), "end": (b.x, b.y),
                "lane_id": lane_id, "kind": "lane",
            }
    for conn in sorted(lane_map.connectors, key=lambda c: c.id):
        a = lane_map.waypoints[conn.start_wp]
        b = lane_map.waypoints[conn.end_wp]
        raw[f"link:{conn.id}"] = {
            "start_wp": a.id, "end_wp": b.id,
            "start": (a.x, a.y), "end": (b.x, b.y),
            "lane_id": None, "kind": conn.kind,
        }

    by_start: dict[str, list[str]] = {}
    by_end: dict[str, list[str]] = {}
    for rid in sorted(raw):
        by_start.setdefault(raw[rid]["start_wp"], []).append(rid)
        by_end.setdefault(raw[rid]["end_wp"], []).append(rid)

    # signs bind to the lane route whose arc interval holds their projection;
    # a sign projecting past the lane end still binds within a short window
    signs_by_route: dict[str, list[Sign]] = {}
    for sign in lane_map.signs:
        pts = lane_map.lane_polyline(sign.lane_id)
        s_sign, _ = geo.project_onto_polyline(pts, (sign.x, sign.y))
        lane = lane_map.lanes[sign.lane_id]
        acc = 0.0
        target = None
        for i in range(len(lane.waypoint_ids) - 1):
            a = lane_map.waypoints[lane.waypoint_ids[i]]
            b = lane_map.waypoints[lane.waypoint_ids[i + 1]]
            seg = math.hypot(b.x - a.x, b.y - a.y)
            last = i == len(lane.waypoint_ids) - 2
            hi = acc + seg + (SIGN_ATTACH_WINDOW if last else 0.0)
            if acc <= s_sign < hi or (last and s_sign == hi):
                target = f"lane:{sign.lane_id}:{i:03d}"
                break
            acc += seg
        if target is not None:
            signs_by_route.setdefault(target, []).append(sign)

    routes: dict[str, Route] = {}
    grid: dict[tuple[int, int], list[str]] = {}
    for rid in sorted(raw):
        r = raw[rid]
        length = geo.dist(r["start"], r["end"])
        routes[rid] = Route(
            id=rid, start_wp=r["start_wp"], end_wp=r["end_wp"],
            start=r["start"], end=r["end"], length=length,
            direction=geo.unit(r["end"][0] - r["start"][0], r["end"][1] - r["start"][1]),
            lane_id=r["lane_id"], kind=r["kind"],
            predecessors=tuple(by_end.get(r["start_wp"], ())),
            successors=tuple(by_start.get(r["end_wp"], ())),
            signs_on_route=tuple(s.token for s in signs_by_route.get(rid, ())),
            region_tags=_region_tags_for(
                ((r["start"][0] + r["end"][0]) / 2.0, (r["start"][1] + r["end"][1]) / 2.0),
                lane_map.regions,
            ),
        )
        bbox = (
            min(r["start"][0], r["end"][0]), min(r["start"][1], r["end"][1]),
            max(r["start"][0], r["end"][0]), max(r["start"][1], r["end"][1]),
        )
        for cell in _grid_cells(bbox, cell_size):
            grid.setdefault(cell, []).append(rid)

    return RouteGraph(
        lane_map=lane_map, routes=routes,
        route_signs={k: tuple(v) for k, v in signs_by_route.items()},
        _grid={k: tuple(v) for k, v in grid.items()},
        cell_size=cell_size,
    )


def routes_within(graph: RouteGraph, center_id: str, radius: float) -> list[str]:
    """Ids of routes with an endpoint within `radius` of the center segment.

    Includes the center route itself; result sorted by id.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    center = graph.route(center_id)
    bbox = (
        min(center.start[0], center.end[0]) - radius,
        min(center.start[1], center.end[1]) - radius,
        max(center.start[0], center.end[0]) + radius,
        max(center.start[1], center.end[1]) + radius,
    )
    candidates: set[str] = set()
    for cell in _grid_cells(bbox, graph.cell_size):
        candidates.update(graph._grid.get(cell, ()))
    hits = []
    for rid in candidates:
        r = graph.routes[rid]
        d = min(
            geo.dist_point_segment(r.start, center.start, center.end),
            geo.dist_point_segment(r.end, center.start, center.end),
        )
        if d <= radius:
            hits.append(rid)
    return sorted(hits)


def routes_conflict(a: Route, b: Route) -> str:
    """Topological conflict between two routes: crossing, merging or none."""
    if a.id == b.id:
        return "none"
    if a.end_wp == b.end_wp:
        return "merging"
    if geo.segments_cross(a.start, a.end, b.start, b.end):
        return "crossing"
    return "none"


def locate_lane(
    lane_map: LaneMap, point: tuple[float, float], kinds: tuple[str, ...] = ("driving",)
) -> str | None:
    """Lane whose centerline is nearest, if within half its width."""
    best: tuple[float, str] | None = None
    for lane_id in sorted(lane_map.lanes):
        lane = lane_map.lanes[lane_id]
        if lane.kind not in kinds:
            continue
        _, d = geo.project_onto_polyline(lane_map.lane_polyline(lane_id), point)
        if d <= lane.width / 2.0 + 1e-9 and (best is None or d < best[0]):
            best = (d, lane_id)
    return best[1] if best else None
