"""Traffic management initiatives: airspace flow programs with rationed slots.

The centerpiece is ration-by-schedule (RBS): captured flights are processed
in order of their original crossing times and assigned the earliest free
slot on a fixed grid anchored at the program start. Exempt flights consume
capacity (a slot, when one is free inside the window) but are never given
a delay; controlled flights absorb whatever displacement is left, with the
slot sequence continuing past the window end when demand overflows.

``TmiEngine`` is the single stateful owner of flights, flow areas, and
programs. Every mutating transition appends exactly one NTML entry and
publishes one event; replaying the NTML log against the same scenario
files rebuilds identical state (modeling never reads mutable flight state,
so re-execution is deterministic).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import FmdsError
from .events import Event, EventBus
from .flow_geometry import (
    DemandHistogram,
    FlowArea,
    aligned_span,
    arrival_time,
    build_flow_area,
    capture_flights,
    demand_histogram,
)
from .geo import Waypoint
from .nas_clock import ComplianceRecord, SimClock
from .ntml_log import NtmlLog
from .schedule_ingest import EXEMPT_CATEGORIES, Flight

AFP_STATUSES = ("PROPOSED", "SCHEDULED", "ACTIVE", "PURGED")
_STATUS_RANK = {s: i for i, s in enumerate(AFP_STATUSES)}

ELIGIBILITIES = ("CONTROLLED", "EXEMPT")

DEFAULT_BIN_WIDTH = 900


def slot_spacing(rate: int) -> int:
    """Seconds between slots for an hourly rate, truncated to whole seconds."""
    if not isinstance(rate, int) or isinstance(rate, bool) or rate < 1:
        raise FmdsError("INVALID_RATE", f"rate must be a positive integer, got {rate!r}")
    spacing = 3600 // rate
    if spacing < 1:
        raise FmdsError("INVALID_RATE", f"rate {rate} exceeds one slot per second")
    return spacing


def _validate_window(window: tuple[int, int]) -> tuple[int, int]:
    start, end = int(window[0]), int(window[1])
    if start >= end:
        raise FmdsError("INVALID_WINDOW", f"window start {start} must precede end {end}")
    return start, end


def _validate_exempt_categories(categories: Iterable[str]) -> frozenset[str]:
    cats = frozenset(categories)
    unknown = cats - set(EXEMPT_CATEGORIES)
    if unknown:
        raise FmdsError(
            "MALFORMED_RECORD",
            f"unknown exempt categories: {sorted(unknown)}",
        )
    return cats


@dataclass(frozen=True)
class SlotAssignment:
    """One captured flight's outcome under a program."""

    flight_id: str
    original_entry: int
    assigned_slot: int
    delay_seconds: int
    edct: int
    eligibility: str

    def to_record(self) -> dict:
        return {
            "flight_id": self.flight_id,
            "original_entry": self.original_entry,
            "assigned_slot": self.assigned_slot,
            "delay_seconds": self.delay_seconds,
            "edct": self.edct,
            "eligibility": self.eligibility,
        }


@dataclass(frozen=True)
class Revision:
    revision_index: int
    revised_at: int
    new_rate: int | None
    new_window: tuple[int, int] | None
    reason: str

    def to_record(self) -> dict:
        return {
            "revision_index": self.revision_index,
            "revised_at": self.revised_at,
            "new_rate": self.new_rate,
            "new_window": list(self.new_window) if self.new_window else None,
            "reason": self.reason,
        }


@dataclass
class AfpProgram:
    """A live airspace flow program bound to one FCA."""

    afp_id: str
    area_id: str
    rate: int
    program_start: int
    program_end: int
    exempt_categories: frozenset[str]
    status: str
    created_by: str
    created_at: int
    assignments: list[SlotAssignment] = field(default_factory=list)
    revisions: list[Revision] = field(default_factory=list)
    purged_at: int | None = None

    @property
    def window(self) -> tuple[int, int]:
        return (self.program_start, self.program_end)

    def transition(self, new_status: str) -> None:
        if new_status not in _STATUS_RANK:
            raise FmdsError("MALFORMED_RECORD", f"unknown status {new_status!r}")
        if self.status == "PURGED":
            raise FmdsError("AFP_TERMINAL", f"{self.afp_id} is purged and cannot change")
        if _STATUS_RANK[new_status] <= _STATUS_RANK[self.status]:
            raise FmdsError(
                "AFP_TERMINAL",
                f"{self.afp_id} cannot move from {self.status} to {new_status}",
            )
        self.status = new_status

    def to_record(self) -> dict:
        return {
            "afp_id": self.afp_id,
            "area_id": self.area_id,
            "rate": self.rate,
            "program_start": self.program_start,
            "program_end": self.program_end,
            "exempt_categories": sorted(self.exempt_categories),
            "status": self.status,
            "created_by": self.created_by,
            "created_at": self.created_at,
            "assignments": [a.to_record() for a in self.assignments],
            "revisions": [r.to_record() for r in self.revisions],
            "purged_at": self.purged_at,
        }


@dataclass(frozen=True)
class DataCard:
    """Shareable summary of one modeled or implemented program outcome."""

    card_id: str
    ref_id: str
    rate: int
    window: tuple[int, int]
    flights_captured: int
    flights_delayed: int
    flights_exempt: int
    total_delay_seconds: int
    max_delay_seconds: int
    average_delay_seconds: float
    histogram: DemandHistogram

    def to_record(self) -> dict:
        return {
            "card_id": self.card_id,
            "ref_id": self.ref_id,
            "rate": self.rate,
            "window": list(self.window),
            "flights_captured": self.flights_captured,
            "flights_delayed": self.flights_delayed,
            "flights_exempt": self.flights_exempt,
            "total_delay_seconds": self.total_delay_seconds,
            "max_delay_seconds": self.max_delay_seconds,
            "average_delay_seconds": self.average_delay_seconds,
            "histogram": {
                "area_id": self.histogram.area_id,
                "bin_width": self.histogram.bin_width,
                "bins": [list(b) for b in self.histogram.bins],
                "capacity_per_bin": self.histogram.capacity_per_bin,
            },
        }

    @classmethod
    def from_record(cls, record: dict) -> "DataCard":
        hist = record["histogram"]
        return cls(
            card_id=record["card_id"],
            ref_id=record["ref_id"],
            rate=record["rate"],
            window=(record["window"][0], record["window"][1]),
            flights_captured=record["flights_captured"],
            flights_delayed=record["flights_delayed"],
            flights_exempt=record["flights_exempt"],
            total_delay_seconds=record["total_delay_seconds"],
            max_delay_seconds=record["max_delay_seconds"],
            average_delay_seconds=record["average_delay_seconds"],
            histogram=DemandHistogram(
                area_id=hist["area_id"],
                bin_width=hist["bin_width"],
                bins=tuple((b[0], b[1]) for b in hist["bins"]),
                capacity_per_bin=hist["capacity_per_bin"],
            ),
        )


def _first_slot_index(entry: int, window_start: int, spacing: int) -> int:
    """Index of the earliest grid slot at or after the entry time."""
    if entry <= window_start:
        return 0
    return -(-(entry - window_start) // spacing)


def run_rbs(
    ordered: Sequence[tuple[int, str]],
    flights: Mapping[str, Flight],
    rate: int,
    window: tuple[int, int],
    exempt_categories: frozenset[str],
) -> list[SlotAssignment]:
    """Ration-by-schedule over (original_entry, flight_id) ordered demand.

    Slots live on the grid window_start + k * floor(3600 / rate). Exempt
    flights consume the earliest unconsumed in-window slot at or after
    their entry (if any) and take zero delay; controlled flights take the
    earliest unconsumed slot at or after their entry, with the sequence
    continuing past the window end on overflow.
    """
    spacing = slot_spacing(rate)
    start, end = _validate_window(window)
    consumed: set[int] = set()
    assignments: list[SlotAssignment] = []
    for entry, flight_id in ordered:
        flight = flights[flight_id]
        exempt = flight.exempt_category in exempt_categories
        k = _first_slot_index(entry, start, spacing)
        if exempt:
            while start + k * spacing < end:
                if k not in consumed:
                    consumed.add(k)
                    break
                k += 1
            assigned = entry
            delay = 0
        else:
            while k in consumed:
                k += 1
            consumed.add(k)
            assigned = start + k * spacing
            delay = assigned - entry
        assignments.append(
            SlotAssignment(
                flight_id=flight_id,
                original_entry=entry,
                assigned_slot=assigned,
                delay_seconds=delay,
                edct=flight.scheduled_departure + delay,
                eligibility="EXEMPT" if exempt else "CONTROLLED",
            )
        )
    return assignments


@dataclass(frozen=True)
class _SlotCrossing:
    """Assigned-slot pseudo-crossing used to bin post-program demand."""

    flight_id: str
    area_id: str
    entry_time: int


def _histogram_span(
    assignments: Sequence[SlotAssignment],
    window: tuple[int, int],
    bin_width: int,
) -> tuple[int, int]:
    """Bin-aligned span covering the program window and any overflow slots."""
    min_end = window[1]
    for a in assignments:
        if a.assigned_slot >= min_end:
            min_end = a.assigned_slot + 1
    return aligned_span(window[0], min_end, bin_width)


def build_data_card(
    ref_id: str,
    assignments: Sequence[SlotAssignment],
    rate: int,
    window: tuple[int, int],
    area_id: str | None = None,
    bin_width: int = DEFAULT_BIN_WIDTH,
) -> DataCard:
    """Summarize a slot assignment outcome. Deterministic: identical inputs
    always produce the identical card, including its id."""
    controlled = [a for a in assignments if a.eligibility == "CONTROLLED"]
    delays = [a.delay_seconds for a in controlled]
    delayed = [d for d in delays if d > 0]
    total = sum(delays)
    span = _histogram_span(assignments, window, bin_width)
    slot_crossings = [
        _SlotCrossing(flight_id=a.flight_id, area_id=area_id or "", entry_time=a.assigned_slot)
        for a in assignments
    ]
    histogram = demand_histogram(
        slot_crossings, span, bin_width=bin_width, rate=rate, area_id=area_id or ""
    )
    content = json.dumps(
        {
            "ref_id": ref_id,
            "rate": rate,
            "window": list(window),
            "area_id": area_id,
            "assignments": [a.to_record() for a in assignments],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    card_id = "CARD-" + hashlib.sha256(content.encode("utf-8")).hexdigest()[:12]
    return DataCard(
        card_id=card_id,
        ref_id=ref_id,
        rate=rate,
        window=window,
        flights_captured=len(assignments),
        flights_delayed=len(delayed),
        flights_exempt=sum(1 for a in assignments if a.eligibility == "EXEMPT"),
        total_delay_seconds=total,
        max_delay_seconds=max(delays, default=0),
        average_delay_seconds=(total / len(controlled)) if controlled else 0.0,
        histogram=histogram,
    )


def compare_cards(cards: Sequence[DataCard]) -> list[dict]:
    """Side-by-side table, least total delay first, with deltas to that row.

    Each row's delta is first_row_metric - row_metric, so worse options show
    negative improvements relative to the best. Ordering ties break on
    flights_delayed, then card_id, making the table input-order invariant.
    """
    if not cards:
        raise FmdsError("EMPTY_INPUT", "no cards to compare")
    rows = sorted(
        cards,
        key=lambda c: (c.total_delay_seconds, c.flights_delayed, c.card_id),
    )
    best = rows[0]
    table = []
    for card in rows:
        table.append(
            {
                "card_id": card.card_id,
                "ref_id": card.ref_id,
                "rate": card.rate,
                "window": list(card.window),
                "flights_captured": card.flights_captured,
                "flights_delayed": card.flights_delayed,
                "flights_exempt": card.flights_exempt,
                "total_delay_seconds": card.total_delay_seconds,
                "max_delay_seconds": card.max_delay_seconds,
                "average_delay_seconds": card.average_delay_seconds,
                "delta": {
                    "total_delay_seconds": best.total_delay_seconds - card.total_delay_seconds,
                    "flights_delayed": best.flights_delayed - card.flights_delayed,
                    "max_delay_seconds": best.max_delay_seconds - card.max_delay_seconds,
                    "average_delay_seconds": best.average_delay_seconds
                    - card.average_delay_seconds,
                },
            }
        )
    return table


class TmiEngine:
    """Owns flights, flow areas, programs, the NTML log, and the sim clock.

    All mutating operations go through this class; each appends one NTML
    entry and publishes one matching event. ``apply_ntml_entry`` re-executes
    a logged transition without logging, which is how recovery rebuilds
    state from the NTML log plus the original scenario files.
    """

    def __init__(
        self,
        flights: Sequence[Flight],
        ntml: NtmlLog | None = None,
        bus: EventBus | None = None,
        clock: SimClock | None = None,
    ):
        self.flights: dict[str, Flight] = {f.flight_id: f for f in flights}
        self.flight_order: list[str] = [f.flight_id for f in flights]
        self.areas: dict[str, FlowArea] = {}
        self.afps: dict[str, AfpProgram] = {}
        self.ntml = ntml if ntml is not None else NtmlLog()
        self.bus = bus if bus is not None else EventBus()
        self.clock = clock if clock is not None else SimClock()
        self.on_clock_persist: Callable[[SimClock], None] | None = None
        self._counters: dict[str, int] = {"FEA": 0, "FCA": 0, "AFP": 0}

    # ------------------------------------------------------------------ ids

    def _next_id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}-{self._counters[prefix]:04d}"

    def _register_counter(self, identifier: str) -> None:
        prefix, _, num = identifier.rpartition("-")
        if prefix in self._counters and num.isdigit():
            self._counters[prefix] = max(self._counters[prefix], int(num))

    # ---------------------------------------------------------------- log

    def _log(self, timestamp: int, actor: str, event_type: str, subject_id: str, payload: dict):
        entry = self.ntml.append(timestamp, actor, event_type, subject_id, payload)
        self.bus.publish("ntml", timestamp, entry.to_record())
        return entry

    # -------------------------------------------------------------- areas

    def create_flow_area(
        self,
        designation: str,
        shape_kind: str,
        vertices: Sequence[Waypoint | tuple[float, float]],
        floor_ft: int,
        ceiling_ft: int,
        active_start: int,
        active_end: int,
        name: str = "",
        actor: str = "anonymous",
    ) -> FlowArea:
        area = build_flow_area(
            designation=designation,
            shape_kind=shape_kind,
            vertices=tuple(
                v if isinstance(v, Waypoint) else Waypoint(v[0], v[1]) for v in vertices
            ),
            floor_ft=floor_ft,
            ceiling_ft=ceiling_ft,
            active_window=(active_start, active_end),
            name=name,
            area_id=self._peek_area_id(designation),
        )
        self._counters[designation] += 1
        self.areas[area.area_id] = area
        self._log(
            self.clock.now,
            actor,
            f"{designation}_CREATED",
            area.area_id,
            {"area": area.to_record()},
        )
        return area

    def _peek_area_id(self, designation: str) -> str:
        if designation not in ("FEA", "FCA"):
            raise FmdsError("INVALID_SHAPE", f"designation must be FEA or FCA, got {designation!r}")
        return f"{designation}-{self._counters[designation] + 1:04d}"

    def get_area(self, area_id: str) -> FlowArea:
        area = self.areas.get(area_id)
        if area is None:
            raise FmdsError("UNKNOWN_AREA", f"no flow area {area_id!r}")
        return area

    # ----------------------------------------------------------- modeling

    def _capture_for_program(
        self, area: FlowArea, window: tuple[int, int]
    ) -> list[tuple[int, str]]:
        """Crossings of the area within the program window, ration order.

        Modeling always uses original scheduled departures — ration *by
        schedule* — so outcomes never depend on previously issued EDCTs.
        """
        start, end = window
        program_area = dataclasses.replace(area, active_start=start, active_end=end)
        flights = [self.flights[fid] for fid in self.flight_order]
        departures = {f.flight_id: f.scheduled_departure for f in flights}
        crossings = capture_flights(program_area, flights, departures=departures)
        return [(c.entry_time, c.flight_id) for c in crossings]

    def model_afp(
        self,
        area_id: str,
        rate: int,
        window: tuple[int, int],
        exempt_categories: Iterable[str] = (),
        ref_id: str | None = None,
    ) -> tuple[list[SlotAssignment], DataCard]:
        """Pure what-if: capture, ration, and summarize. No state changes."""
        area = self.get_area(area_id)
        if area.designation != "FCA":
            raise FmdsError("NOT_AN_FCA", f"{area_id} is an FEA; programs require an FCA")
        slot_spacing(rate)
        start, end = _validate_window(window)
        cats = _validate_exempt_categories(exempt_categories)
        ordered = self._capture_for_program(area, (start, end))
        assignments = run_rbs(ordered, self.flights, rate, (start, end), cats)
        card = build_data_card(
            ref_id or f"proposal:{area_id}",
            assignments,
            rate,
            (start, end),
            area_id=area_id,
        )
        return assignments, card

    # ------------------------------------------------------------ programs

    def _check_overlap(self, area_id: str, window: tuple[int, int], ignore: str | None = None):
        for afp in self.afps.values():
            if afp.afp_id == ignore or afp.area_id != area_id or afp.status == "PURGED":
                continue
            if afp.program_start < window[1] and window[0] < afp.program_end:
                raise FmdsError(
                    "OVERLAPPING_AFP",
                    f"{afp.afp_id} already covers {area_id} over an overlapping window",
                )

    def _write_edcts(self, afp: AfpProgram, assignments: Sequence[SlotAssignment]):
        for a in assignments:
            flight = self.flights[a.flight_id]
            if a.eligibility == "CONTROLLED":
                flight.edct = a.edct
                flight.controlling_afp = afp.afp_id

    def _release_flight(self, flight_id: str, afp_id: str) -> None:
        flight = self.flights[flight_id]
        if flight.controlling_afp == afp_id:
            flight.edct = None
            flight.controlling_afp = None

    def implement_afp(
        self,
        area_id: str,
        rate: int,
        window: tuple[int, int],
        exempt_categories: Iterable[str] = (),
        schedule_only: bool = False,
        actor: str = "anonymous",
    ) -> tuple[AfpProgram, DataCard]:
        """Turn a modeled proposal into a live (or scheduled) program."""
        start, end = _validate_window(window)
        cats = _validate_exempt_categories(exempt_categories)
        self._check_overlap(area_id, (start, end))
        afp_id = f"AFP-{self._counters['AFP'] + 1:04d}"
        assignments, card = self.model_afp(
            area_id, rate, (start, end), cats, ref_id=afp_id
        )
        self._counters["AFP"] += 1
        now = self.clock.now
        scheduled = schedule_only and start > now
        afp = AfpProgram(
            afp_id=afp_id,
            area_id=area_id,
            rate=rate,
            program_start=start,
            program_end=end,
            exempt_categories=cats,
            status="SCHEDULED" if scheduled else "ACTIVE",
            created_by=actor,
            created_at=now,
            assignments=list(assignments),
        )
        self.afps[afp_id] = afp
        self._write_edcts(afp, assignments)
        payload = {
            "area_id": area_id,
            "rate": rate,
            "window": [start, end],
            "exempt_categories": sorted(cats),
            "schedule_only": bool(schedule_only),
            "card_id": card.card_id,
            "flights_controlled": sum(
                1 for a in assignments if a.eligibility == "CONTROLLED"
            ),
            "total_delay_seconds": card.total_delay_seconds,
        }
        event_type = "AFP_SCHEDULED" if scheduled else "AFP_IMPLEMENTED"
        self._log(now, actor, event_type, afp_id, payload)
        return afp, card

    def get_afp(self, afp_id: str) -> AfpProgram:
        afp = self.afps.get(afp_id)
        if afp is None:
            raise FmdsError("UNKNOWN_AFP", f"no program {afp_id!r}")
        return afp

    def _merged_rbs(
        self,
        afp: AfpProgram,
        rate: int,
        window: tuple[int, int],
        now: int,
    ) -> tuple[list[SlotAssignment], set[str]]:
        """Re-ration around departed flights when a program is revised.

        Flights already departed under their assignment (scheduled_departure
        + delay <= now) keep it verbatim; the capacity interval containing
        each kept crossing is consumed on the new slot grid before RBS is
        re-run over the remaining (undeparted) captured flights. Returns the
        merged assignment list and the set of released flight ids.
        """
        spacing = slot_spacing(rate)
        start, end = window
        area = self.get_area(afp.area_id)
        prior = {a.flight_id: a for a in afp.assignments}
        departed = {
            fid: a
            for fid, a in prior.items()
            if self.flights[fid].scheduled_departure + a.delay_seconds <= now
        }
        consumed: set[int] = set()
        for _fid, kept in sorted(departed.items()):
            if kept.assigned_slot < start:
                continue  # crosses before the new window; uses none of it
            k = (kept.assigned_slot - start) // spacing
            while k in consumed:
                k += 1
            consumed.add(k)

        captured = self._capture_for_program(area, window)
        merged: list[SlotAssignment] = list(departed.values())
        for entry, fid in captured:
            if fid in departed:
                continue
            flight = self.flights[fid]
            exempt = flight.exempt_category in afp.exempt_categories
            k = _first_slot_index(entry, start, spacing)
            if exempt:
                while start + k * spacing < end:
                    if k not in consumed:
                        consumed.add(k)
                        break
                    k += 1
                assigned = entry
                delay = 0
            else:
                while k in consumed:
                    k += 1
                consumed.add(k)
                assigned = start + k * spacing
                delay = assigned - entry
            merged.append(
                SlotAssignment(
                    flight_id=fid,
                    original_entry=entry,
                    assigned_slot=assigned,
                    delay_seconds=delay,
                    edct=flight.scheduled_departure + delay,
                    eligibility="EXEMPT" if exempt else "CONTROLLED",
                )
            )
        merged.sort(key=lambda a: (a.original_entry, a.flight_id))
        released = set(prior) - {a.flight_id for a in merged}
        return merged, released

    def revise_afp(
        self,
        afp_id: str,
        new_rate: int | None = None,
        new_window: tuple[int, int] | None = None,
        reason: str = "",
        actor: str = "anonymous",
    ) -> tuple[AfpProgram, DataCard]:
        afp = self.get_afp(afp_id)
        if afp.status == "PURGED":
            raise FmdsError("AFP_TERMINAL", f"{afp_id} is purged and cannot be revised")
        if new_rate is None and new_window is None:
            raise FmdsError("NO_CHANGE", "revision must change the rate or the window")
        rate = afp.rate if new_rate is None else new_rate
        slot_spacing(rate)
        window = afp.window if new_window is None else _validate_window(new_window)
        if new_window is not None:
            self._check_overlap(afp.area_id, window, ignore=afp_id)
        now = self.clock.now
        merged, released = self._merged_rbs(afp, rate, window, now)
        return self._commit_revision(
            afp, rate, window, reason, now, merged, released, actor, log=True
        )

    def _commit_revision(
        self,
        afp: AfpProgram,
        rate: int,
        window: tuple[int, int],
        reason: str,
        now: int,
        merged: list[SlotAssignment],
        released: set[str],
        actor: str,
        log: bool,
    ) -> tuple[AfpProgram, DataCard]:
        new_rate = rate if rate != afp.rate else None
        new_window = window if window != afp.window else None
        afp.rate = rate
        afp.program_start, afp.program_end = window
        afp.assignments = merged
        revision = Revision(
            revision_index=len(afp.revisions) + 1,
            revised_at=now,
            new_rate=new_rate,
            new_window=new_window,
            reason=reason,
        )
        afp.revisions.append(revision)
        departed_ids = {
            a.flight_id
            for a in merged
            if self.flights[a.flight_id].scheduled_departure + a.delay_seconds <= now
        }
        for a in merged:
            if a.eligibility == "CONTROLLED" and a.flight_id not in departed_ids:
                flight = self.flights[a.flight_id]
                flight.edct = a.edct
                flight.controlling_afp = afp.afp_id
        for fid in sorted(released):
            self._release_flight(fid, afp.afp_id)
        card = build_data_card(afp.afp_id, merged, rate, window, area_id=afp.area_id)
        if log:
            self._log(
                now,
                actor,
                "AFP_REVISED",
                afp.afp_id,
                {
                    "new_rate": new_rate,
                    "new_window": list(new_window) if new_window else None,
                    "reason": reason,
                    "now": now,
                    "card_id": card.card_id,
                    "revision_index": revision.revision_index,
                },
            )
        return afp, card

    def purge_afp(self, afp_id: str, actor: str = "anonymous") -> AfpProgram:
        afp = self.get_afp(afp_id)
        now = self.clock.now
        self._apply_purge(afp, now)
        self._log(now, actor, "AFP_PURGED", afp_id, {"now": now})
        return afp

    def _apply_purge(self, afp: AfpProgram, now: int) -> None:
        afp.transition("PURGED")
        afp.purged_at = now
        for a in afp.assignments:
            if self.flights[a.flight_id].scheduled_departure + a.delay_seconds > now:
                self._release_flight(a.flight_id, afp.afp_id)

    # -------------------------------------------------------------- clock

    def _flight_transitions(self, prev: int, to: int) -> list[tuple[int, int, str, str]]:
        """(time, priority, kind, flight_id) for phase changes in (prev, to]."""
        out = []
        for fid in self.flight_order:
            flight = self.flights[fid]
            dep = flight.effective_departure
            if prev < dep <= to:
                out.append((dep, 1, "ENROUTE", fid))
            arr = arrival_time(flight, dep)
            if prev < arr <= to:
                out.append((arr, 2, "ARRIVED", fid))
        return out

    def advance_clock(self, to: int, actor: str = "clock") -> list[Event]:
        """Move simulated time forward, firing transitions in (prev, now].

        Every event carries the simulated time at which its transition
        occurred, never the advance boundary, so splitting one advance into
        several produces a byte-identical event log.
        """
        prev = self.clock.now
        self.clock.advance_to(to)
        if self.on_clock_persist is not None:
            self.on_clock_persist(self.clock)
        if to == prev:
            return []
        events: list[Event] = []
        moves = self._flight_transitions(prev, to)
        activations = [
            afp
            for afp in self.afps.values()
            if afp.status == "SCHEDULED" and afp.program_start <= to
        ]
        work: list[tuple[int, int, str, str]] = list(moves)
        for afp in activations:
            work.append((max(afp.program_start, prev), 0, "ACTIVATE", afp.afp_id))
        work.sort(key=lambda item: (item[0], item[1], item[3]))
        for ts, _prio, kind, subject in work:
            if kind == "ACTIVATE":
                afp = self.afps[subject]
                afp.transition("ACTIVE")
                entry = self.ntml.append(
                    max(ts, self.ntml.last_timestamp or ts),
                    actor,
                    "AFP_IMPLEMENTED",
                    subject,
                    {
                        "area_id": afp.area_id,
                        "rate": afp.rate,
                        "window": [afp.program_start, afp.program_end],
                        "exempt_categories": sorted(afp.exempt_categories),
                        "from_schedule": True,
                    },
                )
                events.append(self.bus.publish("ntml", entry.timestamp, entry.to_record()))
            else:
                events.append(
                    self.bus.publish(
                        "flight_phase",
                        ts,
                        {"flight_id": subject, "phase": kind, "at": ts},
                    )
                )
        return events

    def activation_sweep(self, actor: str = "recovery") -> list[Event]:
        """Activate any scheduled program whose start has already passed.

        Run after recovery: if a crash landed between the clock file write
        and the activation log append, this heals the gap idempotently.
        """
        events = []
        now = self.clock.now
        due = sorted(
            (
                afp
                for afp in self.afps.values()
                if afp.status == "SCHEDULED" and afp.program_start <= now
            ),
            key=lambda a: (a.program_start, a.afp_id),
        )
        for afp in due:
            afp.transition("ACTIVE")
            ts = max(afp.program_start, self.ntml.last_timestamp or afp.program_start)
            entry = self.ntml.append(
                ts,
                actor,
                "AFP_IMPLEMENTED",
                afp.afp_id,
                {
                    "area_id": afp.area_id,
                    "rate": afp.rate,
                    "window": [afp.program_start, afp.program_end],
                    "exempt_categories": sorted(afp.exempt_categories),
                    "from_schedule": True,
                },
            )
            events.append(self.bus.publish("ntml", entry.timestamp, entry.to_record()))
        return events

    # ---------------------------------------------------------- compliance

    def compliance(self, afp_id: str, at: int | None = None) -> ComplianceRecord:
        """Actual entries per bin under controlled trajectories, to date."""
        afp = self.get_afp(afp_id)
        if afp.status in ("PROPOSED", "SCHEDULED"):
            raise FmdsError("NOT_YET_ACTIVE", f"{afp_id} has not activated yet")
        at = self.clock.now if at is None else int(at)
        frozen_at = min(at, afp.purged_at) if afp.purged_at is not None else at
        bin_width = DEFAULT_BIN_WIDTH
        span = _histogram_span(afp.assignments, afp.window, bin_width)
        counts: dict[int, int] = {
            b: 0 for b in range(span[0], span[1], bin_width)
        }
        total = 0
        for a in afp.assignments:
            t = a.assigned_slot
            if t <= frozen_at and span[0] <= t < span[1]:
                counts[span[0] + ((t - span[0]) // bin_width) * bin_width] += 1
                total += 1
        return ComplianceRecord(
            afp_id=afp_id,
            at=at,
            frozen_at=frozen_at,
            bin_width=bin_width,
            bins=tuple(sorted(counts.items())),
            capacity_per_bin=afp.rate * bin_width / 3600.0,
            total_actual=total,
        )

    # ------------------------------------------------------------- replay

    def apply_ntml_entry(self, entry) -> None:
        """Re-execute one logged transition without logging or publishing."""
        etype = entry.event_type
        payload = entry.payload
        if etype in ("FEA_CREATED", "FCA_CREATED"):
            area = FlowArea.from_record(payload["area"])
            self.areas[area.area_id] = area
            self._register_counter(area.area_id)
        elif etype in ("AFP_SCHEDULED", "AFP_IMPLEMENTED"):
            if payload.get("from_schedule") and entry.subject_id in self.afps:
                self.afps[entry.subject_id].transition("ACTIVE")
                return
            assignments, _card = self.model_afp(
                payload["area_id"],
                payload["rate"],
                tuple(payload["window"]),
                payload["exempt_categories"],
                ref_id=entry.subject_id,
            )
            afp = AfpProgram(
                afp_id=entry.subject_id,
                area_id=payload["area_id"],
                rate=payload["rate"],
                program_start=payload["window"][0],
                program_end=payload["window"][1],
                exempt_categories=frozenset(payload["exempt_categories"]),
                status="SCHEDULED" if etype == "AFP_SCHEDULED" else "ACTIVE",
                created_by=entry.actor,
                created_at=entry.timestamp,
                assignments=list(assignments),
            )
            self.afps[afp.afp_id] = afp
            self._register_counter(afp.afp_id)
            self._write_edcts(afp, assignments)
        elif etype == "AFP_REVISED":
            afp = self.get_afp(entry.subject_id)
            rate = payload["new_rate"] if payload["new_rate"] is not None else afp.rate
            window = (
                tuple(payload["new_window"])
                if payload["new_window"] is not None
                else afp.window
            )
            now = payload["now"]
            merged, released = self._merged_rbs(afp, rate, window, now)
            self._commit_revision(
                afp,
                rate,
                window,
                payload["reason"],
                now,
                merged,
                released,
                entry.actor,
                log=False,
            )
        elif etype == "AFP_PURGED":
            self._apply_purge(self.get_afp(entry.subject_id), payload["now"])
        # NOTE / AFP_PROPOSED entries carry no engine state.

    def replay_log(self) -> None:
        for entry in self.ntml.entries:
            self.apply_ntml_entry(entry)

    # ------------------------------------------------------------ snapshot

    def state_snapshot(self) -> dict:
        """Canonical JSON-safe view of all engine state, for equality checks."""
        return {
            "clock": self.clock.now,
            "areas": {aid: a.to_record() for aid, a in sorted(self.areas.items())},
            "afps": {aid: a.to_record() for aid, a in sorted(self.afps.items())},
            "flights": {
                fid: {
                    "edct": f.edct,
                    "controlling_afp": f.controlling_afp,
                }
                for fid, f in sorted(self.flights.items())
            },
            "ntml_last_sequence": self.ntml.last_sequence,
        }
