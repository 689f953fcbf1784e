"""Deterministic simulated NAS time and flight position queries.

The clock only moves forward, in whole seconds. Positions and phases are
pure functions of (flight, time): the simulation never stores per-tick
state, which is what makes split-step advancement equivalent to one big
step. Wall-clock pacing (speedup) is a service-layer scheduling concern
and never affects outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FmdsError
from .flow_geometry import arrival_time, position_at
from .geo import Waypoint
from .schedule_ingest import Flight

PHASES = ("PREDEP", "ENROUTE", "ARRIVED")


@dataclass
class SimClock:
    """Monotone simulated time source."""

    now: int = 0
    speedup: float = 1.0
    running: bool = False
    step_seconds: int = 1

    def advance_to(self, to: int) -> None:
        if to < self.now:
            raise FmdsError("TIME_REGRESSION", f"cannot advance clock from {self.now} to {to}")
        self.now = int(to)


@dataclass(frozen=True)
class FlightPosition:
    flight_id: str
    position: Waypoint
    phase: str


def flight_phase(flight: Flight, at: int) -> str:
    """PREDEP before effective departure, ARRIVED at/after route end."""
    dep = flight.effective_departure
    if at < dep:
        return "PREDEP"
    if at >= arrival_time(flight, dep):
        return "ARRIVED"
    return "ENROUTE"


def positions(flights: list[Flight], at: int) -> list[FlightPosition]:
    """Deterministic snapshot of every flight's position and phase."""
    out = []
    for f in flights:
        phase = flight_phase(f, at)
        out.append(
            FlightPosition(
                flight_id=f.flight_id,
                position=position_at(f, at, departure=f.effective_departure),
                phase=phase,
            )
        )
    return out


@dataclass(frozen=True)
class ComplianceRecord:
    """Actual program entries per bin versus the rationed capacity, to date.

    ``frozen_at`` is the query time clamped to the purge time for purged
    programs: a purged program's record never changes again.
    """

    afp_id: str
    at: int
    frozen_at: int
    bin_width: int
    bins: tuple[tuple[int, int], ...]
    capacity_per_bin: float
    total_actual: int
