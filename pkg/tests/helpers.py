"""Shared test builders and independent oracles.

The oracles here deliberately re-derive geometry and rationing from first
principles (brute force, dense sampling) instead of calling the package's
implementations, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import math
import random

from fmds import Flight, FlowArea, Waypoint

EARTH_RADIUS_NM = 3440.065


# --------------------------------------------------------------------------
# builders


def make_flight(
    flight_id: str,
    route,
    departure: int = 0,
    speed: float = 450.0,
    altitude: int = 35000,
    category: str = "NONE",
) -> Flight:
    return Flight(
        flight_id=flight_id,
        callsign=f"TST{flight_id[-3:] if len(flight_id) >= 3 else flight_id}",
        origin="AAA",
        destination="BBB",
        scheduled_departure=departure,
        cruise_altitude_ft=altitude,
        ground_speed_kt=speed,
        route=tuple(Waypoint(lat, lon) for lat, lon in route),
        exempt_category=category,
    )


# Eastbound along latitude 40 from 100W to 90W, crossing the 95W meridian.
EAST_ROUTE = ((40.0, -100.0), (40.0, -90.0))
MERIDIAN_LINE = (Waypoint(35.0, -95.0), Waypoint(45.0, -95.0))


def meridian_transit_seconds(speed: float = 450.0) -> int:
    """Whole seconds from departure to the 95W meridian on EAST_ROUTE.

    Independent closed form: along a parallel, the 5-degree run from 100W
    to 95W is half the leg; haversine at constant latitude gives the leg
    length, speed converts to time.
    """
    lat = math.radians(40.0)
    dlon = math.radians(5.0)
    # haversine with dlat = 0
    a = math.cos(lat) * math.cos(lat) * math.sin(dlon / 2) ** 2
    nm = 2 * EARTH_RADIUS_NM * math.asin(math.sqrt(a))
    return round(nm / speed * 3600.0)


def entry_controlled_flight(
    flight_id: str, entry_time: int, speed: float = 450.0, category: str = "NONE"
) -> Flight:
    """A flight whose meridian-crossing time is exactly ``entry_time``.

    All such flights share EAST_ROUTE; scheduling departure = entry - T
    places the (integer-rounded) crossing at the requested second.
    """
    return make_flight(
        flight_id,
        EAST_ROUTE,
        departure=entry_time - meridian_transit_seconds(speed),
        speed=speed,
        category=category,
    )


def meridian_area(window: tuple[int, int], designation: str = "FCA") -> FlowArea:
    return FlowArea(
        area_id=f"{designation}-TEST",
        designation=designation,
        shape_kind="POLYLINE",
        vertices=MERIDIAN_LINE,
        floor_ft=0,
        ceiling_ft=60000,
        active_start=window[0],
        active_end=window[1],
        name="test meridian",
    )


# --------------------------------------------------------------------------
# independent crossing oracle (1 s dense sampling, own geometry code)


def _own_project(lat: float, lon: float, center_lat: float) -> tuple[float, float]:
    return (lon * math.cos(math.radians(center_lat)), lat)


def _own_segments_intersect(p1, p2, q1, q2) -> bool:
    d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
    d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
    denom = d1x * d2y - d1y * d2x
    if abs(denom) < 1e-15:
        return False
    ex, ey = q1[0] - p1[0], q1[1] - p1[1]
    s = (ex * d2y - ey * d2x) / denom
    u = (ex * d1y - ey * d1x) / denom
    return 0.0 <= s <= 1.0 and 0.0 <= u <= 1.0


def _own_point_in_polygon(x: float, y: float, pts) -> bool:
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x_cross > x:
                inside = not inside
    return inside


def _own_position(flight: Flight, t: float, departure: int) -> tuple[float, float]:
    """(lat, lon) at time t: linear interpolation along haversine-timed legs."""
    times = [float(departure)]
    for a, b in zip(flight.route, flight.route[1:]):
        lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
        lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
        h = (
            math.sin((lat2 - lat1) / 2) ** 2
            + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
        )
        nm = 2 * EARTH_RADIUS_NM * math.asin(math.sqrt(h))
        times.append(times[-1] + nm / flight.ground_speed_kt * 3600.0)
    if t <= times[0]:
        return (flight.route[0].lat, flight.route[0].lon)
    if t >= times[-1]:
        return (flight.route[-1].lat, flight.route[-1].lon)
    for i in range(len(times) - 1):
        if times[i] <= t < times[i + 1]:
            f = (t - times[i]) / (times[i + 1] - times[i])
            a, b = flight.route[i], flight.route[i + 1]
            return (a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon))
    return (flight.route[-1].lat, flight.route[-1].lon)


def _own_arrival(flight: Flight, departure: int) -> float:
    total = 0.0
    for a, b in zip(flight.route, flight.route[1:]):
        lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
        lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
        h = (
            math.sin((lat2 - lat1) / 2) ** 2
            + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
        )
        total += 2 * EARTH_RADIUS_NM * math.asin(math.sqrt(h)) / flight.ground_speed_kt * 3600.0
    return departure + total


def dense_sampling_entry(area: FlowArea, flight: Flight, departure: int) -> int | None:
    """First area entry found by sampling the trajectory every second.

    Polygon: first second whose position is inside after an outside second.
    Polyline: first second whose 1 s movement segment crosses the line.
    Returns the sample second, or None when the flight is never captured.
    """
    if not (area.floor_ft <= flight.cruise_altitude_ft <= area.ceiling_ft):
        return None
    center = sum(w.lat for w in area.vertices) / len(area.vertices)
    shape = [_own_project(w.lat, w.lon, center) for w in area.vertices]
    t_end = int(math.ceil(_own_arrival(flight, departure)))

    if area.shape_kind == "POLYGON":
        def inside_at(t: float) -> bool:
            lat, lon = _own_position(flight, t, departure)
            x, y = _own_project(lat, lon, center)
            return _own_point_in_polygon(x, y, shape)

        prev_inside = inside_at(departure)
        for t in range(departure + 1, t_end + 1):
            now_inside = inside_at(t)
            if now_inside and not prev_inside:
                if area.active_start <= t < area.active_end:
                    return t
            prev_inside = now_inside
        return None

    edges = list(zip(shape, shape[1:]))
    prev_lat, prev_lon = _own_position(flight, departure, departure)
    prev_pt = _own_project(prev_lat, prev_lon, center)
    for t in range(departure + 1, t_end + 1):
        lat, lon = _own_position(flight, t, departure)
        pt = _own_project(lat, lon, center)
        for e1, e2 in edges:
            if _own_segments_intersect(prev_pt, pt, e1, e2):
                if area.active_start <= t < area.active_end:
                    return t
                return None
        prev_pt = pt
    return None


# --------------------------------------------------------------------------
# independent RBS optimality oracle (branch and bound over slot choices)


def oracle_min_total_delay(
    ordered: list[tuple[int, bool]],
    rate: int,
    window: tuple[int, int],
) -> int:
    """Minimum total controlled delay over order-preserving assignments.

    ``ordered`` is the processing sequence as (entry_time, is_exempt),
    already sorted. Controlled flights may take any unconsumed grid slot at
    or after their entry, with slot times increasing along the controlled
    subsequence; exempt flights deterministically consume the earliest
    unconsumed in-window slot at or after their entry (if one exists) at
    zero delay. Explores every controlled choice with branch-and-bound.
    """
    spacing = 3600 // rate
    start, end = window
    n = len(ordered)
    best = math.inf

    def first_k(entry: int) -> int:
        if entry <= start:
            return 0
        return -(-(entry - start) // spacing)

    def rec(i: int, consumed: frozenset, last_controlled_k: int, total: int) -> None:
        nonlocal best
        if total >= best:
            return
        if i == n:
            best = total
            return
        entry, exempt = ordered[i]
        if exempt:
            k = first_k(entry)
            chosen = None
            while start + k * spacing < end:
                if k not in consumed:
                    chosen = k
                    break
                k += 1
            if chosen is None:
                rec(i + 1, consumed, last_controlled_k, total)
            else:
                rec(i + 1, consumed | {chosen}, last_controlled_k, total)
        else:
            k = max(first_k(entry), last_controlled_k + 1)
            tried = 0
            while tried <= n:  # beyond n free slots above first-feasible never helps
                if k not in consumed:
                    rec(i + 1, consumed | {k}, k, total + start + k * spacing - entry)
                    tried += 1
                k += 1

    rec(0, frozenset(), -1, 0)
    return int(best)


def brute_force_slot_simulator(
    entries: list[int], rate: int, window: tuple[int, int]
) -> list[int]:
    """All-controlled greedy slot walk, written independently: each flight
    (entries pre-sorted) takes the next free grid time >= its entry."""
    spacing = 3600 // rate
    taken: set[int] = set()
    slots = []
    for entry in entries:
        t = window[0]
        while t < entry or t in taken:
            t += spacing
        taken.add(t)
        slots.append(t)
    return slots


def random_rbs_instance(rng: random.Random, max_n: int = 10):
    """A small random rationing instance: entries in-window, mixed exemption."""
    n = rng.randint(1, max_n)
    rate = rng.choice([6, 10, 12, 20, 30, 60, 120])
    start = rng.randrange(0, 100000, 60)
    length = rng.choice([1800, 3600, 7200])
    window = (start, start + length)
    entries = sorted(rng.randrange(start, start + length) for _ in range(n))
    exempt = [rng.random() < 0.3 for _ in range(n)]
    return entries, exempt, rate, window
