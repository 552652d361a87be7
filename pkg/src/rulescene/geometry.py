"""Plain 2D geometry helpers shared by the map model, simulator and monitor.

Points are (x, y) tuples, angles are radians in [-pi, pi). Everything here is
pure and allocation-light; no numpy on purpose, these run per frame.
"""

from __future__ import annotations

import math
from typing import Sequence

Point = tuple[float, float]

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    a = math.fmod(a + math.pi, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return a - math.pi


def angle_of(dx: float, dy: float) -> float:
    return math.atan2(dy, dx)


def signed_angle_between(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Signed angle (radians) turning from direction a to direction b, CCW positive."""
    return normalize_angle(math.atan2(b[1], b[0]) - math.atan2(a[1], a[0]))


def dist(p: Point, q: Point) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def dot(a: tuple[float, float], b: tuple[float, float]) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: tuple[float, float], b: tuple[float, float]) -> float:
    return a[0] * b[1] - a[1] * b[0]


def unit(dx: float, dy: float) -> tuple[float, float]:
    n = math.hypot(dx, dy)
    if n == 0.0:
        raise ValueError("zero-length direction")
    return (dx / n, dy / n)


def dist_point_segment(p: Point, a: Point, b: Point) -> float:
    """Distance from point p to segment ab."""
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(apx, apy)
    t = (apx * abx + apy * aby) / denom
    t = max(0.0, min(1.0, t))
    return math.hypot(p[0] - (a[0] + t * abx), p[1] - (a[1] + t * aby))


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True iff the open segments properly intersect (single interior point).

    Touching at an endpoint or collinear overlap does not count.
    """
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    )


def segment_intersection_point(p1: Point, p2: Point, q1: Point, q2: Point) -> Point | None:
    """Intersection point of two properly crossing segments, else None."""
    if not segments_cross(p1, p2, q1, q2):
        return None
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    t = ((q1[0] - p1[0]) * sy - (q1[1] - p1[1]) * sx) / denom
    return (p1[0] + t * rx, p1[1] + t * ry)


def point_on_polygon_boundary(p: Point, poly: Sequence[Point], eps: float = 1e-9) -> bool:
    n = len(poly)
    for i in range(n):
        if dist_point_segment(p, poly[i], poly[(i + 1) % n]) <= eps:
            return True
    return False


def point_in_polygon(p: Point, poly: Sequence[Point]) -> bool:
    """Even-odd test. Points exactly on the boundary are treated as inside."""
    if point_on_polygon_boundary(p, poly):
        return True
    x, y = p
    inside = False
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def point_strictly_in_polygon(p: Point, poly: Sequence[Point]) -> bool:
    if point_on_polygon_boundary(p, poly):
        return False
    return point_in_polygon(p, poly)


# ---------------------------------------------------------------------------
# polylines

def polyline_length(pts: Sequence[Point]) -> float:
    return sum(dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def project_onto_polyline(pts: Sequence[Point], p: Point) -> tuple[float, float]:
    """Project p onto a polyline.

    Returns (arc_length, lateral_distance) of the closest point. Lateral
    distance is unsigned.
    """
    best_s = 0.0
    best_d = math.inf
    acc = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        abx, aby = b[0] - a[0], b[1] - a[1]
        seg_len = math.hypot(abx, aby)
        if seg_len == 0.0:
            continue
        t = ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / (seg_len * seg_len)
        t = max(0.0, min(1.0, t))
        cx, cy = a[0] + t * abx, a[1] + t * aby
        d = math.hypot(p[0] - cx, p[1] - cy)
        if d < best_d:
            best_d = d
            best_s = acc + t * seg_len
        acc += seg_len
    return best_s, best_d


def signed_lateral_offset(pts: Sequence[Point], p: Point) -> float:
    """Lateral offset of p from a polyline, positive to the left of travel."""
    best = (math.inf, 0.0)
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        abx, aby = b[0] - a[0], b[1] - a[1]
        seg_len2 = abx * abx + aby * aby
        if seg_len2 == 0.0:
            continue
        t = ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / seg_len2
        t = max(0.0, min(1.0, t))
        cx, cy = a[0] + t * abx, a[1] + t * aby
        d = math.hypot(p[0] - cx, p[1] - cy)
        if d < best[0]:
            side = cross((abx, aby), (p[0] - cx, p[1] - cy))
            best = (d, math.copysign(d, side) if side != 0.0 else 0.0)
    return best[1]


def point_at_arc(pts: Sequence[Point], s: float) -> tuple[Point, float]:
    """Point and tangent heading at arc length s along a polyline (clamped)."""
    if s <= 0.0:
        a, b = pts[0], pts[1]
        return pts[0], angle_of(b[0] - a[0], b[1] - a[1])
    acc = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        seg = dist(a, b)
        if acc + seg >= s and seg > 0.0:
            t = (s - acc) / seg
            return (
                (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])),
                angle_of(b[0] - a[0], b[1] - a[1]),
            )
        acc += seg
    a, b = pts[-2], pts[-1]
    return pts[-1], angle_of(b[0] - a[0], b[1] - a[1])


# ---------------------------------------------------------------------------
# oriented boxes

def obb_corners(cx: float, cy: float, heading: float, length: float, width: float) -> list[Point]:
    """Corners of an oriented box, CCW starting front-left."""
    ch, sh = math.cos(heading), math.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    out = []
    for lx, ly in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append((cx + lx * ch - ly * sh, cy + lx * sh + ly * ch))
    return out


def obb_overlap(a: Sequence[Point], b: Sequence[Point]) -> float | None:
    """Separating-axis test for two convex quads.

    Returns the penetration depth (> 0) when the boxes strictly overlap,
    otherwise None. Touching edges (zero overlap on some axis) is not a hit.
    """
    min_pen = math.inf
    for quad in (a, b):
        for i in range(4):
            ex = quad[(i + 1) % 4][0] - quad[i][0]
            ey = quad[(i + 1) % 4][1] - quad[i][1]
            # outward normal of the edge, no need to normalize for the
            # disjointness test but penetration wants real units
            n = math.hypot(ex, ey)
            if n == 0.0:
                continue
            ax, ay = -ey / n, ex / n
            a_lo = min(p[0] * ax + p[1] * ay for p in a)
            a_hi = max(p[0] * ax + p[1] * ay for p in a)
            b_lo = min(p[0] * ax + p[1] * ay for p in b)
            b_hi = max(p[0] * ax + p[1] * ay for p in b)
            pen = min(a_hi, b_hi) - max(a_lo, b_lo)
            if pen <= 0.0:
                return None
            min_pen = min(min_pen, pen)
    return min_pen
