#!/usr/bin/env python3
"""Author the fixture maps under maps/.

Maps are committed; rerun this script only when the layouts change. All three
share conventions: right-hand traffic, 3.5 m driving lanes, waypoints every
10 m at most.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "maps"

LANE_W = 3.5
HALF = LANE_W / 2.0  # 1.75, lane centers hug the road axis


def heading_of(dx: float, dy: float) -> float:
    a = math.atan2(dy, dx)
    return -math.pi if a >= math.pi else a


class MapBuilder:
    def __init__(self, map_id: str):
        self.map_id = map_id
        self.waypoints = []
        self.lanes = []
        self.connectors = []
        self.regions = []
        self.signs = []
        self._wp_count = 0

    def lane(self, lane_id, road, points, kind="driving", width=LANE_W,
             left_marker="broken line", right_marker="solid line"):
        ids = []
        for i, (x, y) in enumerate(points):
            if i + 1 < len(points):
                dx, dy = points[i + 1][0] - x, points[i + 1][1] - y
            else:
                dx, dy = x - points[i - 1][0], y - points[i - 1][1]
            wid = f"w{self._wp_count:04d}"
            self._wp_count += 1
            self.waypoints.append(
                {"id": wid, "x": x, "y": y, "heading": heading_of(dx, dy), "lane": lane_id}
            )
            ids.append(wid)
        self.lanes.append(
            {"id": lane_id, "road": road, "waypoints": ids, "width": width,
             "left_marker": left_marker, "right_marker": right_marker, "kind": kind}
        )
        return ids

    def wp_at(self, lane_id, index):
        lane = next(l for l in self.lanes if l["id"] == lane_id)
        return lane["waypoints"][index]

    def connector(self, conn_id, from_wp, to_wp, kind="junction"):
        self.connectors.append({"id": conn_id, "from": from_wp, "to": to_wp, "kind": kind})

    def region(self, region_id, tags, polygon):
        self.regions.append({"id": region_id, "tags": tags, "polygon": polygon})

    def sign(self, sign_id, token, x, y, lane_id, value=None):
        self.signs.append(
            {"id": sign_id, "token": token, "x": x, "y": y, "lane": lane_id, "value": value}
        )

    def write(self):
        OUT.mkdir(exist_ok=True)
        data = {
            "meta": {"schema": "lanemap.v1", "id": self.map_id, "lane_width": LANE_W},
            "waypoints": self.waypoints,
            "lanes": self.lanes,
            "connectors": self.connectors,
            "regions": self.regions,
            "signs": self.signs,
        }
        path = OUT / f"{self.map_id}.map.json"
        path.write_text(json.dumps(data, indent=1) + "\n", "utf-8")
        print(f"wrote {path} ({len(self.lanes)} lanes, {len(self.connectors)} connectors)")


def span(a, b, step=10):
    out = []
    v = a
    sgn = 1 if b >= a else -1
    while (v - b) * sgn < 0:
        out.append(v)
        v += sgn * step
    out.append(b)
    return out


def cross4():
    """4-way intersection, one in and one out lane per arm, stop signs on the
    north and south approaches."""
    b = MapBuilder("cross4")
    # inbound lanes end at the junction edge (|10|), outbound start there
    b.lane("n_in", "north", [(-HALF, y) for y in span(50, 10)])
    b.lane("s_in", "south", [(HALF, y) for y in span(-50, -10)])
    b.lane("e_in", "east", [(x, HALF) for x in span(50, 10)])
    b.lane("w_in", "west", [(x, -HALF) for x in span(-50, -10)])
    b.lane("n_out", "north", [(HALF, y) for y in span(10, 50)])
    b.lane("s_out", "south", [(-HALF, y) for y in span(-10, -50)])
    b.lane("e_out", "east", [(x, -HALF) for x in span(10, 50)])
    b.lane("w_out", "west", [(x, HALF) for x in span(-10, -50)])

    ends = {l: b.wp_at(l, -1) for l in ("n_in", "s_in", "e_in", "w_in")}
    starts = {l: b.wp_at(l, 0) for l in ("n_out", "s_out", "e_out", "w_out")}
    # per approach: straight, left, right
    movements = [
        ("n_s", "n_in", "s_out"), ("n_e", "n_in", "e_out"), ("n_w", "n_in", "w_out"),
        ("s_n", "s_in", "n_out"), ("s_w", "s_in", "w_out"), ("s_e", "s_in", "e_out"),
        ("e_w", "e_in", "w_out"), ("e_s", "e_in", "s_out"), ("e_n", "e_in", "n_out"),
        ("w_e", "w_in", "e_out"), ("w_n", "w_in", "n_out"), ("w_s", "w_in", "s_out"),
    ]
    for cid, src, dst in movements:
        b.connector(cid, ends[src], starts[dst])

    b.region("center", ["intersection"],
             [[-10, -10], [10, -10], [10, 10], [-10, 10]])
    b.sign("stop_n", "stop sign", -HALF - 2.5, 10.5, "n_in")
    b.sign("stop_s", "stop sign", HALF + 2.5, -10.5, "s_in")
    b.write()


def tee3():
    """T-junction: the north street terminates on an east-west through
    street. Stop sign on the terminating approach."""
    b = MapBuilder("tee3")
    b.lane("n_in", "north", [(-HALF, y) for y in span(50, 10)])
    b.lane("n_out", "north", [(HALF, y) for y in span(10, 50)])
    b.lane("e_in", "east", [(x, HALF) for x in span(50, 10)])
    b.lane("e_out", "east", [(x, -HALF) for x in span(10, 50)])
    b.lane("w_in", "west", [(x, -HALF) for x in span(-50, -10)])
    b.lane("w_out", "west", [(x, HALF) for x in span(-10, -50)])

    n_end = b.wp_at("n_in", -1)
    e_end = b.wp_at("e_in", -1)
    w_end = b.wp_at("w_in", -1)
    b.connector("n_left", n_end, b.wp_at("e_out", 0))
    b.connector("n_right", n_end, b.wp_at("w_out", 0))
    b.connector("ew", w_end, b.wp_at("e_out", 0))
    b.connector("we", e_end, b.wp_at("w_out", 0))
    b.connector("w_left", w_end, b.wp_at("n_out", 0))
    b.connector("e_right", e_end, b.wp_at("n_out", 0))

    # region reaches one route up the terminating street so the final
    # approach segment counts as "at the junction"
    b.region("junction", ["t-intersection"],
             [[-12, -6], [12, -6], [12, 16], [-12, 16]])
    b.sign("stop_n", "stop sign", -HALF - 2.5, 10.5, "n_in")
    b.write()


def straight2():
    """Two parallel eastbound lanes with a lane-change gap, a posted speed
    limit, and a pedestrian crosswalk."""
    b = MapBuilder("straight2")
    b.lane("a", "main", [(x, 0.0) for x in span(0, 200)],
           left_marker="broken line", right_marker="solid line")
    b.lane("b", "main", [(x, LANE_W) for x in span(0, 200)],
           left_marker="solid line", right_marker="broken line")
    b.lane("p", "xwalk", [(102.0, -4.0), (102.0, 2.0), (102.0, 8.0)],
           kind="shoulder", width=2.0, left_marker="none", right_marker="none")

    b.connector("ab", b.wp_at("a", 6), b.wp_at("b", 7), kind="lane_change")
    b.connector("ba", b.wp_at("b", 8), b.wp_at("a", 9), kind="lane_change")

    b.region("road", ["multi-lane road"],
             [[-5, -2], [205, -2], [205, 5.5], [-5, 5.5]])
    b.region("xwalk", ["crosswalk"],
             [[98, -5], [106, -5], [106, 9], [98, 9]])
    b.sign("limit", "speed limit sign", 50.0, -2.2, "a", value=5.0)
    b.write()


if __name__ == "__main__":
    cross4()
    tee3()
    straight2()
