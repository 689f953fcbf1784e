"""Seeded scenario generation for demos and reproducible simulations.

Everything here is deterministic in the seed: the same seed always yields
byte-identical schedule and overlay files. The demo geography is a
west-to-east stream of flights funneling through a north-south corridor
near 95W, which is where demos draw their flow evaluation areas.
"""

from __future__ import annotations

import random
from pathlib import Path

from .geo import Waypoint
from .schedule_ingest import (
    ConstraintOverlay,
    Flight,
    save_overlays,
    save_schedule,
)
from .timeutil import parse_iso8601

DEMO_T0 = parse_iso8601("2024-06-01T12:00:00Z")

_ORIGINS = ("LAX", "SFO", "PHX", "DEN", "SEA", "LAS", "SLC", "PDX")
_DESTINATIONS = ("JFK", "BOS", "ATL", "ORD", "DCA", "PHL", "CLT", "MIA")
_CARRIERS = ("AAL", "DAL", "UAL", "SWA", "JBU", "ASA")


def corridor_polygon() -> list[Waypoint]:
    """A tall quadrilateral straddling the 95W corridor used by demo routes."""
    return [
        Waypoint(30.0, -96.5),
        Waypoint(30.0, -93.5),
        Waypoint(44.0, -93.5),
        Waypoint(44.0, -96.5),
    ]


def corridor_line() -> list[Waypoint]:
    """A north-south flow evaluation line across the 95W corridor."""
    return [Waypoint(29.0, -95.0), Waypoint(45.0, -95.0)]


def random_flight(rng: random.Random, index: int, t0: int = DEMO_T0) -> Flight:
    """One eastbound flight through the corridor, deterministic in rng state."""
    lat_w = rng.uniform(31.0, 43.0)
    lat_e = lat_w + rng.uniform(-3.0, 3.0)
    lon_w = rng.uniform(-120.0, -105.0)
    lon_e = rng.uniform(-85.0, -72.0)
    mid_lat = (lat_w + lat_e) / 2 + rng.uniform(-1.5, 1.5)
    route = [
        Waypoint(round(lat_w, 4), round(lon_w, 4)),
        Waypoint(round(mid_lat, 4), -95.0 - round(rng.uniform(3.0, 6.0), 4)),
        Waypoint(round(mid_lat + rng.uniform(-0.5, 0.5), 4), -95.0 + round(rng.uniform(3.0, 6.0), 4)),
        Waypoint(round(lat_e, 4), round(lon_e, 4)),
    ]
    category = "NONE"
    if index % 11 == 7:
        category = "INTERNATIONAL"
    elif index % 13 == 5:
        category = "LIFEGUARD"
    return Flight(
        flight_id=f"FL{index:04d}",
        callsign=f"{rng.choice(_CARRIERS)}{rng.randint(100, 999)}",
        origin=rng.choice(_ORIGINS),
        destination=rng.choice(_DESTINATIONS),
        scheduled_departure=t0 + rng.randrange(0, 4 * 3600),
        cruise_altitude_ft=rng.randrange(28, 42) * 1000,
        ground_speed_kt=float(rng.randrange(380, 521)),
        route=tuple(route),
        exempt_category=category,
    )


def make_demo_scenario(
    seed: int = 2024, n_flights: int = 60, t0: int = DEMO_T0
) -> tuple[list[Flight], list[ConstraintOverlay]]:
    """A reproducible day of traffic plus a couple of NAS constraints."""
    rng = random.Random(seed)
    flights = [random_flight(rng, i, t0) for i in range(n_flights)]
    overlays = [
        ConstraintOverlay(
            overlay_id="WX-0001",
            kind="WEATHER",
            polygon=(
                Waypoint(35.0, -99.0),
                Waypoint(35.0, -97.0),
                Waypoint(37.5, -97.0),
                Waypoint(37.5, -99.0),
            ),
            active_start=t0 + 1800,
            active_end=t0 + 5 * 3600,
            severity="SEVERE",
            label="Convective SIGMET 27C",
        ),
        ConstraintOverlay(
            overlay_id="SL-0001",
            kind="SPACE_LAUNCH",
            polygon=(
                Waypoint(28.2, -81.2),
                Waypoint(28.2, -80.0),
                Waypoint(29.2, -80.0),
                Waypoint(29.2, -81.2),
            ),
            active_start=t0 + 2 * 3600,
            active_end=t0 + 3 * 3600,
            severity="MODERATE",
            label="Launch hazard area",
        ),
    ]
    return flights, overlays


def write_scenario(
    directory: str | Path,
    flights: list[Flight],
    overlays: list[ConstraintOverlay],
) -> tuple[Path, Path]:
    """Write schedule.jsonl and overlays.jsonl into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    schedule_path = directory / "schedule.jsonl"
    overlays_path = directory / "overlays.jsonl"
    save_schedule(flights, schedule_path)
    save_overlays(overlays, overlays_path)
    return schedule_path, overlays_path
