"""Low-level geographic and planar geometry helpers.

Positions are WGS-ish latitude/longitude degrees. Intersection tests run in
a local equirectangular projection (x = lon * cos(lat0), y = lat, degree
units) centered on the shape under test; at desk scale (shapes well under
~1000 NM across) the distortion is far below the tolerances used by the
capture logic. Great-circle leg lengths use the haversine formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import FmdsError

EARTH_RADIUS_NM = 3440.065

# Parallel-segment rejection threshold for the 2x2 intersection solve.
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Waypoint:
    """A latitude/longitude fix in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise FmdsError("MALFORMED_RECORD", f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise FmdsError("MALFORMED_RECORD", f"longitude out of range: {self.lon}")


def haversine_nm(a: Waypoint, b: Waypoint) -> float:
    """Great-circle distance between two waypoints in nautical miles."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return EARTH_RADIUS_NM * 2 * math.asin(math.sqrt(h))


def projection_center_lat(vertices: tuple[Waypoint, ...]) -> float:
    """Latitude of the vertex centroid, used as the projection reference."""
    return sum(w.lat for w in vertices) / len(vertices)


def project(point: Waypoint, center_lat_deg: float) -> tuple[float, float]:
    """Equirectangular projection to (x, y) in degree units."""
    c = math.cos(math.radians(center_lat_deg))
    return (point.lon * c, point.lat)


def lerp_waypoint(a: Waypoint, b: Waypoint, frac: float) -> Waypoint:
    """Linear interpolation in lat/lon between two waypoints."""
    return Waypoint(a.lat + (b.lat - a.lat) * frac, a.lon + (b.lon - a.lon) * frac)


def segment_intersection(
    p1: tuple[float, float],
    p2: tuple[float, float],
    q1: tuple[float, float],
    q2: tuple[float, float],
) -> tuple[float, float] | None:
    """Intersection of segments p1-p2 and q1-q2 in the plane.

    Returns (s, u) with the crossing at p1 + s*(p2-p1) = q1 + u*(q2-q1),
    both in [0, 1], or None. Parallel and collinear overlaps return None:
    a grazing pass along a boundary does not count as a crossing.
    """
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    if abs(denom) < _PARALLEL_EPS:
        return None
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    s = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    if 0.0 <= s <= 1.0 and 0.0 <= u <= 1.0:
        return (s, u)
    return None


def polygon_edges(vertices: tuple[Waypoint, ...]) -> list[tuple[Waypoint, Waypoint]]:
    """Edges of an implicitly closed polygon (last vertex connects to first)."""
    n = len(vertices)
    return [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]


def polygon_is_self_intersecting(vertices: tuple[Waypoint, ...]) -> bool:
    """True when any two non-adjacent edges of the closed polygon intersect.

    Adjacent edges share a vertex by construction and are skipped.
    """
    n = len(vertices)
    if n < 3:
        return False
    lat0 = projection_center_lat(vertices)
    pts = [project(w, lat0) for w in vertices]
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segment_intersection(*edges[i], *edges[j]) is not None:
                return True
    return False


def point_in_polygon(x: float, y: float, pts: list[tuple[float, float]]) -> bool:
    """Even-odd ray-casting test in projected coordinates.

    Boundary points are not guaranteed either way; callers treat the
    boundary as measure zero.
    """
    inside = False
    n = len(pts)
    j = n - 1
    for i in range(n):
        xi, yi = pts[i]
        xj, yj = pts[j]
        if (yi > y) != (yj > y):
            x_cross = xj + (y - yj) / (yi - yj) * (xi - xj)
            if x_cross > x:
                inside = not inside
        j = i
    return inside
