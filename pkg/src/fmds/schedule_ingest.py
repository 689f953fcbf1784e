"""Flight schedule and constraint overlay ingest.

Both file formats are UTF-8 line-delimited JSON, one self-describing record
per line; the key sets are fixed and unknown keys are rejected so that a
schema drift upstream fails loudly instead of being silently dropped.

Loaded flights form the canonical flight store for the rest of the system.
EDCT and controlling-program fields are runtime state assigned by traffic
management initiatives, never read from schedule files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FmdsError
from .geo import Waypoint, polygon_is_self_intersecting
from .timeutil import format_iso8601, parse_iso8601

EXEMPT_CATEGORIES = ("NONE", "AIRBORNE", "INTERNATIONAL", "LIFEGUARD")
OVERLAY_KINDS = ("WEATHER", "SPACE_LAUNCH", "SUA", "OTHER")
SEVERITIES = ("INFO", "MODERATE", "SEVERE")
# Higher sorts first in constraint summaries.
_SEVERITY_RANK = {"SEVERE": 0, "MODERATE": 1, "INFO": 2}

_SCHEDULE_KEYS = (
    "flight_id",
    "callsign",
    "origin",
    "destination",
    "scheduled_departure",
    "cruise_altitude_ft",
    "ground_speed_kt",
    "route",
    "exempt_category",
)
_OVERLAY_KEYS = (
    "overlay_id",
    "kind",
    "polygon",
    "active_start",
    "active_end",
    "severity",
    "label",
)


@dataclass
class Flight:
    """A scheduled flight with a waypoint route.

    ``edct`` and ``controlling_afp`` are mutable runtime state written by
    the TMI engine when the flight is captured by an active program.
    """

    flight_id: str
    callsign: str
    origin: str
    destination: str
    scheduled_departure: int
    cruise_altitude_ft: int
    ground_speed_kt: float
    route: tuple[Waypoint, ...]
    exempt_category: str = "NONE"
    edct: int | None = None
    controlling_afp: str | None = None

    def __post_init__(self):
        if isinstance(self.route, list):
            self.route = tuple(self.route)
        validate_flight(self)

    @property
    def effective_departure(self) -> int:
        """EDCT when controlled, otherwise the scheduled departure."""
        return self.edct if self.edct is not None else self.scheduled_departure


@dataclass(frozen=True)
class ConstraintOverlay:
    """A static NAS constraint polygon (weather cell, launch hazard, SUA...)."""

    overlay_id: str
    kind: str
    polygon: tuple[Waypoint, ...]
    active_start: int
    active_end: int
    severity: str
    label: str = ""


def validate_flight(f: Flight) -> None:
    if not f.flight_id:
        raise FmdsError("MALFORMED_RECORD", "flight_id must be non-empty")
    if len(f.route) < 2:
        raise FmdsError("MALFORMED_RECORD", f"{f.flight_id}: route needs >= 2 waypoints")
    for a, b in zip(f.route, f.route[1:]):
        if a == b:
            raise FmdsError(
                "MALFORMED_RECORD", f"{f.flight_id}: consecutive duplicate waypoint {a}"
            )
    if not isinstance(f.scheduled_departure, int):
        raise FmdsError("MALFORMED_RECORD", f"{f.flight_id}: departure must be integral seconds")
    if f.ground_speed_kt <= 0:
        raise FmdsError("MALFORMED_RECORD", f"{f.flight_id}: ground speed must be positive")
    if f.cruise_altitude_ft <= 0:
        raise FmdsError("MALFORMED_RECORD", f"{f.flight_id}: cruise altitude must be positive")
    if f.exempt_category not in EXEMPT_CATEGORIES:
        raise FmdsError(
            "MALFORMED_RECORD", f"{f.flight_id}: unknown exempt_category {f.exempt_category!r}"
        )
    if f.edct is not None and f.edct < f.scheduled_departure:
        raise FmdsError("MALFORMED_RECORD", f"{f.flight_id}: EDCT before scheduled departure")


def _validate_overlay(o: ConstraintOverlay) -> None:
    if not o.overlay_id:
        raise FmdsError("MALFORMED_RECORD", "overlay_id must be non-empty")
    if o.kind not in OVERLAY_KINDS:
        raise FmdsError("MALFORMED_RECORD", f"{o.overlay_id}: unknown kind {o.kind!r}")
    if o.severity not in SEVERITIES:
        raise FmdsError("MALFORMED_RECORD", f"{o.overlay_id}: unknown severity {o.severity!r}")
    if len(o.polygon) < 3:
        raise FmdsError("INVALID_POLYGON", f"{o.overlay_id}: polygon needs >= 3 vertices")
    if polygon_is_self_intersecting(o.polygon):
        raise FmdsError("INVALID_POLYGON", f"{o.overlay_id}: polygon is self-intersecting")
    if o.active_start >= o.active_end:
        raise FmdsError("INVALID_WINDOW", f"{o.overlay_id}: active window start must precede end")


def _parse_route(raw, where: str) -> tuple[Waypoint, ...]:
    if not isinstance(raw, list):
        raise FmdsError("MALFORMED_RECORD", f"{where}: route must be a list of [lat, lon] pairs")
    points = []
    for pair in raw:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise FmdsError("MALFORMED_RECORD", f"{where}: bad route point {pair!r}")
        points.append(Waypoint(float(pair[0]), float(pair[1])))
    return tuple(points)


def _iter_records(path: str | Path, keys: tuple[str, ...]):
    """Yield (line_number, record dict) pairs, enforcing the exact key set."""
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FmdsError("MALFORMED_RECORD", f"line {lineno}: invalid JSON ({exc.msg})")
        if not isinstance(record, dict):
            raise FmdsError("MALFORMED_RECORD", f"line {lineno}: record must be an object")
        unknown = set(record) - set(keys)
        if unknown:
            raise FmdsError(
                "MALFORMED_RECORD", f"line {lineno}: unknown keys {sorted(unknown)}"
            )
        missing = set(keys) - set(record)
        if missing:
            raise FmdsError(
                "MALFORMED_RECORD", f"line {lineno}: missing keys {sorted(missing)}"
            )
        yield lineno, record


def load_schedule(path: str | Path) -> list[Flight]:
    """Load and validate a schedule file.

    Returns flights sorted by (scheduled_departure, flight_id). Rejects
    duplicate flight ids anywhere in the file and empty schedules.
    """
    flights: list[Flight] = []
    seen: set[str] = set()
    for lineno, rec in _iter_records(path, _SCHEDULE_KEYS):
        try:
            flight = Flight(
                flight_id=str(rec["flight_id"]),
                callsign=str(rec["callsign"]),
                origin=str(rec["origin"]),
                destination=str(rec["destination"]),
                scheduled_departure=parse_iso8601(rec["scheduled_departure"]),
                cruise_altitude_ft=int(rec["cruise_altitude_ft"]),
                ground_speed_kt=float(rec["ground_speed_kt"]),
                route=_parse_route(rec["route"], str(rec["flight_id"])),
                exempt_category=str(rec["exempt_category"]),
            )
        except FmdsError as exc:
            raise FmdsError(exc.code, f"line {lineno}: {exc.detail}")
        except (ValueError, TypeError) as exc:
            raise FmdsError("MALFORMED_RECORD", f"line {lineno}: {exc}")
        if flight.flight_id in seen:
            raise FmdsError("DUPLICATE_ID", f"line {lineno}: duplicate flight_id {flight.flight_id}")
        seen.add(flight.flight_id)
        flights.append(flight)
    if not flights:
        raise FmdsError("EMPTY_SCHEDULE", f"{path}: no flight records")
    flights.sort(key=lambda f: (f.scheduled_departure, f.flight_id))
    return flights


def save_schedule(flights: list[Flight], path: str | Path) -> None:
    """Write flights in the canonical line-delimited form (load round-trips)."""
    lines = []
    for f in sorted(flights, key=lambda f: (f.scheduled_departure, f.flight_id)):
        record = {
            "flight_id": f.flight_id,
            "callsign": f.callsign,
            "origin": f.origin,
            "destination": f.destination,
            "scheduled_departure": format_iso8601(f.scheduled_departure),
            "cruise_altitude_ft": f.cruise_altitude_ft,
            "ground_speed_kt": f.ground_speed_kt,
            "route": [[w.lat, w.lon] for w in f.route],
            "exempt_category": f.exempt_category,
        }
        lines.append(json.dumps(record, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_overlays(path: str | Path) -> list[ConstraintOverlay]:
    """Load and validate a constraint overlay file."""
    overlays: list[ConstraintOverlay] = []
    seen: set[str] = set()
    for lineno, rec in _iter_records(path, _OVERLAY_KEYS):
        try:
            overlay = ConstraintOverlay(
                overlay_id=str(rec["overlay_id"]),
                kind=str(rec["kind"]),
                polygon=_parse_route(rec["polygon"], str(rec["overlay_id"])),
                active_start=parse_iso8601(rec["active_start"]),
                active_end=parse_iso8601(rec["active_end"]),
                severity=str(rec["severity"]),
                label=str(rec["label"]),
            )
            _validate_overlay(overlay)
        except FmdsError as exc:
            raise FmdsError(exc.code, f"line {lineno}: {exc.detail}")
        except (ValueError, TypeError) as exc:
            raise FmdsError("MALFORMED_RECORD", f"line {lineno}: {exc}")
        if overlay.overlay_id in seen:
            raise FmdsError("DUPLICATE_ID", f"line {lineno}: duplicate overlay_id {overlay.overlay_id}")
        seen.add(overlay.overlay_id)
        overlays.append(overlay)
    return overlays


def save_overlays(overlays: list[ConstraintOverlay], path: str | Path) -> None:
    """Write overlays in the canonical line-delimited form."""
    lines = []
    for o in overlays:
        record = {
            "overlay_id": o.overlay_id,
            "kind": o.kind,
            "polygon": [[w.lat, w.lon] for w in o.polygon],
            "active_start": format_iso8601(o.active_start),
            "active_end": format_iso8601(o.active_end),
            "severity": o.severity,
            "label": o.label,
        }
        lines.append(json.dumps(record, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def constraint_summary(
    overlays: list[ConstraintOverlay], window: tuple[int, int]
) -> list[ConstraintOverlay]:
    """Overlays whose active window intersects [start, end).

    Ordered by severity (SEVERE first), then active_start, then overlay_id.
    """
    start, end = window
    if start >= end:
        raise FmdsError("INVALID_WINDOW", "summary window start must precede end")
    hits = [o for o in overlays if o.active_start < end and o.active_end > start]
    hits.sort(key=lambda o: (_SEVERITY_RANK[o.severity], o.active_start, o.overlay_id))
    return hits
