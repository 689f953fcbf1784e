"""Flow areas, trajectory capture, and demand histograms.

A flow area is a drawn evaluation/constraint shape: an open polyline or a
closed polygon with an altitude band and an active window. Capture finds,
per flight, the first point where its trajectory crosses the shape inside
the altitude band with a crossing time inside the window.

Trajectory model: a flight departs at its effective departure time and
flies its route at constant ground speed; within a leg the position is
linear in latitude/longitude, and leg durations come from great-circle leg
lengths. Crossing times are therefore linear interpolations along the
intersecting leg. All intersection tests run in the area-centered
equirectangular projection (see geo module).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FmdsError
from .geo import (
    Waypoint,
    haversine_nm,
    lerp_waypoint,
    point_in_polygon,
    polygon_is_self_intersecting,
    project,
    projection_center_lat,
    segment_intersection,
)
from .schedule_ingest import Flight

DESIGNATIONS = ("FEA", "FCA")
SHAPE_KINDS = ("POLYLINE", "POLYGON")

DEFAULT_BIN_WIDTH = 900  # 15-minute demand bins


@dataclass(frozen=True)
class FlowArea:
    """A drawn FEA/FCA with altitude band and active window."""

    area_id: str
    designation: str
    shape_kind: str
    vertices: tuple[Waypoint, ...]
    floor_ft: int
    ceiling_ft: int
    active_start: int
    active_end: int
    name: str = ""

    def to_record(self) -> dict:
        return {
            "area_id": self.area_id,
            "designation": self.designation,
            "shape_kind": self.shape_kind,
            "vertices": [[w.lat, w.lon] for w in self.vertices],
            "floor_ft": self.floor_ft,
            "ceiling_ft": self.ceiling_ft,
            "active_start": self.active_start,
            "active_end": self.active_end,
            "name": self.name,
        }

    @classmethod
    def from_record(cls, record: dict) -> "FlowArea":
        return cls(
            area_id=record["area_id"],
            designation=record["designation"],
            shape_kind=record["shape_kind"],
            vertices=tuple(Waypoint(lat, lon) for lat, lon in record["vertices"]),
            floor_ft=record["floor_ft"],
            ceiling_ft=record["ceiling_ft"],
            active_start=record["active_start"],
            active_end=record["active_end"],
            name=record.get("name", ""),
        )


@dataclass(frozen=True)
class Crossing:
    """First entry of one flight into one flow area."""

    flight_id: str
    area_id: str
    entry_time: int
    entry_point: Waypoint


@dataclass(frozen=True)
class DemandHistogram:
    """Per-bin demand counts over a contiguous span, optionally with capacity.

    ``bins`` is an ordered tuple of (bin_start, demand_count); every bin is
    exactly ``bin_width`` seconds and bins tile the span with no gaps.
    ``capacity_per_bin`` is rate * bin_width / 3600 when a rate was given.
    """

    area_id: str
    bin_width: int
    bins: tuple[tuple[int, int], ...]
    capacity_per_bin: float | None = None

    @property
    def span(self) -> tuple[int, int]:
        if not self.bins:
            return (0, 0)
        return (self.bins[0][0], self.bins[-1][0] + self.bin_width)

    @property
    def total_demand(self) -> int:
        return sum(count for _, count in self.bins)


def build_flow_area(
    designation: str,
    shape_kind: str,
    vertices: tuple[Waypoint, ...] | list[Waypoint],
    floor_ft: int,
    ceiling_ft: int,
    active_window: tuple[int, int],
    name: str = "",
    area_id: str = "",
) -> FlowArea:
    """Validate parameters and construct a FlowArea (no storage side effects)."""
    vertices = tuple(vertices)
    if designation not in DESIGNATIONS:
        raise FmdsError("INVALID_SHAPE", f"unknown designation {designation!r}")
    if shape_kind not in SHAPE_KINDS:
        raise FmdsError("INVALID_SHAPE", f"unknown shape kind {shape_kind!r}")
    min_vertices = 2 if shape_kind == "POLYLINE" else 3
    if len(vertices) < min_vertices:
        raise FmdsError(
            "INVALID_SHAPE",
            f"{shape_kind} needs >= {min_vertices} vertices, got {len(vertices)}",
        )
    for a, b in zip(vertices, vertices[1:]):
        if a == b:
            raise FmdsError("INVALID_SHAPE", f"consecutive duplicate vertex {a}")
    if shape_kind == "POLYGON" and polygon_is_self_intersecting(vertices):
        raise FmdsError("INVALID_SHAPE", "polygon is self-intersecting")
    if floor_ft >= ceiling_ft:
        raise FmdsError(
            "INVALID_ALTITUDE_BAND", f"floor {floor_ft} must be below ceiling {ceiling_ft}"
        )
    start, end = active_window
    if start >= end:
        raise FmdsError("INVALID_WINDOW", "active window start must precede end")
    return FlowArea(
        area_id=area_id,
        designation=designation,
        shape_kind=shape_kind,
        vertices=vertices,
        floor_ft=int(floor_ft),
        ceiling_ft=int(ceiling_ft),
        active_start=int(start),
        active_end=int(end),
        name=name,
    )


def route_times(flight: Flight, departure: int | None = None) -> list[float]:
    """Cumulative waypoint passage times (seconds) for a flight's route."""
    dep = float(flight.effective_departure if departure is None else departure)
    times = [dep]
    for a, b in zip(flight.route, flight.route[1:]):
        times.append(times[-1] + haversine_nm(a, b) / flight.ground_speed_kt * 3600.0)
    return times


def arrival_time(flight: Flight, departure: int | None = None) -> int:
    """Arrival at the final waypoint, rounded to whole seconds."""
    return round(route_times(flight, departure)[-1])


def position_at(flight: Flight, at: float, departure: int | None = None) -> Waypoint:
    """Position along the route at a given time; clamps to the endpoints."""
    times = route_times(flight, departure)
    if at <= times[0]:
        return flight.route[0]
    if at >= times[-1]:
        return flight.route[-1]
    for i in range(len(times) - 1):
        if times[i] <= at < times[i + 1]:
            frac = (at - times[i]) / (times[i + 1] - times[i])
            return lerp_waypoint(flight.route[i], flight.route[i + 1], frac)
    return flight.route[-1]


def _leg_crossing_candidates(
    p_a: tuple[float, float],
    p_b: tuple[float, float],
    t_a: float,
    t_b: float,
    edges: list[tuple[tuple[float, float], tuple[float, float]]],
) -> list[tuple[float, float]]:
    """(time, leg fraction) for every edge intersection of one flight leg."""
    hits = []
    for e1, e2 in edges:
        hit = segment_intersection(p_a, p_b, e1, e2)
        if hit is not None:
            s, _ = hit
            hits.append((t_a + s * (t_b - t_a), s))
    return hits


def first_crossing(
    area: FlowArea, flight: Flight, departure: int | None = None
) -> Crossing | None:
    """Earliest crossing of the flight into the area, or None.

    Polyline shapes count any transversal intersection (either direction);
    polygon shapes count boundary crossings from outside to inside. A route
    that starts inside a polygon produces no crossing until it exits and
    re-enters. Only candidates whose interpolated time falls inside the
    area's active window qualify; the earliest such candidate wins.
    """
    if not (area.floor_ft <= flight.cruise_altitude_ft <= area.ceiling_ft):
        return None

    lat0 = projection_center_lat(area.vertices)
    shape_pts = [project(w, lat0) for w in area.vertices]
    if area.shape_kind == "POLYLINE":
        edges = list(zip(shape_pts, shape_pts[1:]))
    else:
        n = len(shape_pts)
        edges = [(shape_pts[i], shape_pts[(i + 1) % n]) for i in range(n)]

    times = route_times(flight, departure)
    route_pts = [project(w, lat0) for w in flight.route]

    # Walk legs in order collecting candidate entries as (time, leg, frac).
    candidates: list[tuple[float, int, float]] = []
    if area.shape_kind == "POLYLINE":
        for i in range(len(route_pts) - 1):
            for t, s in _leg_crossing_candidates(
                route_pts[i], route_pts[i + 1], times[i], times[i + 1], edges
            ):
                candidates.append((t, i, s))
    else:
        inside = point_in_polygon(route_pts[0][0], route_pts[0][1], shape_pts)
        events: list[tuple[float, int, float]] = []
        for i in range(len(route_pts) - 1):
            for t, s in _leg_crossing_candidates(
                route_pts[i], route_pts[i + 1], times[i], times[i + 1], edges
            ):
                events.append((t, i, s))
        events.sort(key=lambda e: e[0])
        # Each boundary hit toggles the inside state; record entries only.
        for t, i, s in events:
            inside = not inside
            if inside:
                candidates.append((t, i, s))

    candidates.sort(key=lambda c: c[0])
    for t, i, s in candidates:
        entry = round(t)
        if area.active_start <= entry < area.active_end:
            return Crossing(
                flight_id=flight.flight_id,
                area_id=area.area_id,
                entry_time=entry,
                entry_point=lerp_waypoint(flight.route[i], flight.route[i + 1], s),
            )
    return None


def capture_flights(
    area: FlowArea,
    flights: list[Flight],
    departures: dict[str, int] | None = None,
) -> list[Crossing]:
    """Crossings for every flight captured by the area.

    ``departures`` overrides per-flight departure times (flight_id -> epoch
    seconds); flights not in the map use their effective departure. Output
    is ordered by (entry_time, flight_id) and is deterministic.
    """
    crossings = []
    for flight in flights:
        dep = None if departures is None else departures.get(flight.flight_id)
        crossing = first_crossing(area, flight, departure=dep)
        if crossing is not None:
            crossings.append(crossing)
    crossings.sort(key=lambda c: (c.entry_time, c.flight_id))
    return crossings


def aligned_span(start: int, min_end: int, bin_width: int) -> tuple[int, int]:
    """Smallest [start, end) covering min_end with (end-start) a bin multiple."""
    length = max(min_end - start, bin_width)
    n_bins = (length + bin_width - 1) // bin_width
    return (start, start + n_bins * bin_width)


def demand_histogram(
    crossings: list[Crossing],
    span: tuple[int, int],
    bin_width: int = DEFAULT_BIN_WIDTH,
    rate: int | None = None,
    area_id: str | None = None,
) -> DemandHistogram:
    """Bin crossing entry times over [start, end).

    The span length must be an exact multiple of bin_width. Crossings
    outside the span are ignored; the sum of bin counts always equals the
    number of crossings whose entry time lies inside the span.
    """
    if bin_width <= 0:
        raise FmdsError("INVALID_BIN_WIDTH", f"bin width must be positive, got {bin_width}")
    start, end = span
    if end < start or (end - start) % bin_width != 0:
        raise FmdsError(
            "MISALIGNED_SPAN", f"span [{start}, {end}) is not a multiple of {bin_width} s"
        )
    n_bins = (end - start) // bin_width
    counts = [0] * n_bins
    for c in crossings:
        if start <= c.entry_time < end:
            counts[(c.entry_time - start) // bin_width] += 1
    if area_id is None:
        area_id = crossings[0].area_id if crossings else ""
    return DemandHistogram(
        area_id=area_id,
        bin_width=bin_width,
        bins=tuple((start + i * bin_width, counts[i]) for i in range(n_bins)),
        capacity_per_bin=None if rate is None else rate * bin_width / 3600.0,
    )
