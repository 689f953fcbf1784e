"""HTTP service: configuration, persistence wiring, endpoints, event stream.

One process owns one data directory. All mutations — engine, clock,
collaboration — are serialized through a single writer thread so NTML
sequence order, event order, and slot assignment are race-free; reads and
stream fan-out never enter that queue.

On startup the NTML log is replayed against the scenario files to rebuild
engine state, the collaboration journal is replayed for threads and
meetings, and the event journal is reloaded so stream clients can resume
across restarts with their last seen sequence number.

Wire format: JSON bodies mirroring the domain types, timestamps as
ISO-8601 UTC strings. Actor identity comes from a request header
(default ``X-Actor``).
"""

from __future__ import annotations

import argparse
import asyncio
import functools
import json
import os
import socket
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .collaboration import CollaborationHub, Meeting, Message, Thread
from .errors import FmdsError
from .events import Event, EventBus
from .flow_geometry import FlowArea, build_flow_area
from .geo import Waypoint
from .nas_clock import ComplianceRecord, FlightPosition, SimClock, positions
from .ntml_log import NtmlLog
from .schedule_ingest import (
    ConstraintOverlay,
    Flight,
    constraint_summary,
    load_overlays,
    load_schedule,
)
from .tmi_engine import (
    AfpProgram,
    DataCard,
    DemandHistogram,
    SlotAssignment,
    TmiEngine,
    compare_cards,
    slot_spacing,
)
from .timeutil import format_iso8601, parse_iso8601

DEFAULT_ACTOR_HEADER = "X-Actor"

_HTTP_STATUS = {
    "UNKNOWN_AREA": 404,
    "UNKNOWN_AFP": 404,
    "UNKNOWN_THREAD": 404,
    "UNKNOWN_CARD": 404,
    "UNKNOWN_FLIGHT": 404,
    "OVERLAPPING_AFP": 409,
    "AFP_TERMINAL": 409,
    "TIME_REGRESSION": 409,
    "DUPLICATE_ID": 409,
    "NOT_YET_ACTIVE": 409,
}


@dataclass
class ServiceConfig:
    """Startup configuration; scenario files must exist, data dir writable."""

    listen: str = "127.0.0.1:8040"
    data_dir: str | Path = "fmds-data"
    schedule_path: str | Path = "schedule.jsonl"
    overlays_path: str | Path | None = None
    speedup: float = 1.0
    actor_header: str = DEFAULT_ACTOR_HEADER
    clock_start: int | None = None

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        if not host or not port.isdigit():
            raise FmdsError("BIND_FAILURE", f"listen address {self.listen!r} is not host:port")
        return host, int(port)


# --------------------------------------------------------------------------
# wire serialization: int epoch seconds <-> ISO-8601 UTC strings


def _ts(value) -> int:
    """Parse a wire timestamp: ISO-8601 string or integral epoch seconds."""
    if isinstance(value, bool):
        raise FmdsError("MALFORMED_RECORD", f"bad timestamp {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return parse_iso8601(value)
        except ValueError as exc:
            raise FmdsError("MALFORMED_RECORD", f"bad timestamp {value!r}: {exc}")
    raise FmdsError("MALFORMED_RECORD", f"bad timestamp {value!r}")


def _window(body: dict, key: str = "window") -> tuple[int, int]:
    raw = body.get(key)
    if not isinstance(raw, dict) or "start" not in raw or "end" not in raw:
        raise FmdsError("MALFORMED_RECORD", f"{key} must be an object with start and end")
    return (_ts(raw["start"]), _ts(raw["end"]))


def _iso_window(window: tuple[int, int]) -> dict:
    return {"start": format_iso8601(window[0]), "end": format_iso8601(window[1])}


def wire_area(area: FlowArea) -> dict:
    record = area.to_record()
    record["active_start"] = format_iso8601(area.active_start)
    record["active_end"] = format_iso8601(area.active_end)
    return record


def wire_overlay(o: ConstraintOverlay) -> dict:
    return {
        "overlay_id": o.overlay_id,
        "kind": o.kind,
        "polygon": [[w.lat, w.lon] for w in o.polygon],
        "active_start": format_iso8601(o.active_start),
        "active_end": format_iso8601(o.active_end),
        "severity": o.severity,
        "label": o.label,
    }


def wire_flight(f: Flight) -> dict:
    return {
        "flight_id": f.flight_id,
        "callsign": f.callsign,
        "origin": f.origin,
        "destination": f.destination,
        "scheduled_departure": format_iso8601(f.scheduled_departure),
        "cruise_altitude_ft": f.cruise_altitude_ft,
        "ground_speed_kt": f.ground_speed_kt,
        "route": [[w.lat, w.lon] for w in f.route],
        "exempt_category": f.exempt_category,
        "edct": None if f.edct is None else format_iso8601(f.edct),
        "controlling_afp": f.controlling_afp,
        "effective_departure": format_iso8601(f.effective_departure),
    }


def wire_assignment(a: SlotAssignment) -> dict:
    return {
        "flight_id": a.flight_id,
        "original_entry": format_iso8601(a.original_entry),
        "assigned_slot": format_iso8601(a.assigned_slot),
        "delay_seconds": a.delay_seconds,
        "edct": format_iso8601(a.edct),
        "eligibility": a.eligibility,
    }


def wire_histogram(h: DemandHistogram) -> dict:
    return {
        "area_id": h.area_id,
        "bin_width": h.bin_width,
        "span": _iso_window(h.span),
        "bins": [{"start": format_iso8601(s), "count": c} for s, c in h.bins],
        "capacity_per_bin": h.capacity_per_bin,
        "total_demand": h.total_demand,
    }


def wire_card(card: DataCard) -> dict:
    return {
        "card_id": card.card_id,
        "ref_id": card.ref_id,
        "rate": card.rate,
        "window": _iso_window(card.window),
        "flights_captured": card.flights_captured,
        "flights_delayed": card.flights_delayed,
        "flights_exempt": card.flights_exempt,
        "total_delay_seconds": card.total_delay_seconds,
        "max_delay_seconds": card.max_delay_seconds,
        "average_delay_seconds": card.average_delay_seconds,
        "histogram": wire_histogram(card.histogram),
    }


def wire_afp(afp: AfpProgram) -> dict:
    return {
        "afp_id": afp.afp_id,
        "area_id": afp.area_id,
        "rate": afp.rate,
        "window": _iso_window(afp.window),
        "exempt_categories": sorted(afp.exempt_categories),
        "status": afp.status,
        "created_by": afp.created_by,
        "created_at": format_iso8601(afp.created_at),
        "assignments": [wire_assignment(a) for a in afp.assignments],
        "revisions": [
            {
                "revision_index": r.revision_index,
                "revised_at": format_iso8601(r.revised_at),
                "new_rate": r.new_rate,
                "new_window": None if r.new_window is None else _iso_window(r.new_window),
                "reason": r.reason,
            }
            for r in afp.revisions
        ],
        "purged_at": None if afp.purged_at is None else format_iso8601(afp.purged_at),
    }


def wire_compliance(record: ComplianceRecord) -> dict:
    return {
        "afp_id": record.afp_id,
        "at": format_iso8601(record.at),
        "frozen_at": format_iso8601(record.frozen_at),
        "bin_width": record.bin_width,
        "bins": [{"start": format_iso8601(s), "actual": c} for s, c in record.bins],
        "capacity_per_bin": record.capacity_per_bin,
        "total_actual": record.total_actual,
    }


def wire_thread(t: Thread) -> dict:
    return t.to_record()


def wire_message(m: Message) -> dict:
    record = m.to_record()
    record["sent_at"] = format_iso8601(m.sent_at)
    return record


def wire_meeting(m: Meeting) -> dict:
    record = m.to_record()
    record["scheduled_for"] = format_iso8601(m.scheduled_for)
    record["created_at"] = format_iso8601(m.created_at)
    return record


def wire_position(p: FlightPosition) -> dict:
    return {
        "flight_id": p.flight_id,
        "lat": p.position.lat,
        "lon": p.position.lon,
        "phase": p.phase,
    }


def wire_event(e: Event) -> dict:
    record = e.to_record()
    record["timestamp"] = format_iso8601(e.timestamp)
    return record


# --------------------------------------------------------------------------
# workspace: state composition, recovery, and single-writer mutation


class Workspace:
    """Everything one service process owns, wired for recovery.

    Recovery order: scenario files -> event journal -> NTML replay ->
    card registry -> collaboration journal -> scheduled-activation sweep.
    Construction raises CORRUPT_LOG (refusing to start) when a log has a
    sequence gap or a damaged non-final record.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.data_dir = Path(
            os.environ.get("FMDS_DATA_DIR") or config.data_dir
        )
        self.data_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.data_dir, os.W_OK):
            raise FmdsError("STORAGE_FAILURE", f"data dir {self.data_dir} is not writable")

        self.flights = load_schedule(config.schedule_path)
        self.overlays = (
            load_overlays(config.overlays_path) if config.overlays_path else []
        )

        clock = SimClock(speedup=config.speedup)
        clock_file = self.data_dir / "clock.json"
        if clock_file.exists():
            stored = json.loads(clock_file.read_text(encoding="utf-8"))
            clock.now = int(stored["now"])
            clock.speedup = float(stored.get("speedup", config.speedup))
            clock.running = bool(stored.get("running", False))
        elif config.clock_start is not None:
            clock.now = int(config.clock_start)
        else:
            # One hour before the first scheduled departure: demos start
            # with every flight still on the ground.
            clock.now = min(f.scheduled_departure for f in self.flights) - 3600

        self.bus = EventBus(self.data_dir / "events.log")
        self.ntml = NtmlLog(self.data_dir / "ntml.log")
        self.engine = TmiEngine(self.flights, ntml=self.ntml, bus=self.bus, clock=clock)
        self.engine.replay_log()

        self.cards: dict[str, DataCard] = {}
        self.card_order: list[str] = []
        self._cards_path = self.data_dir / "cards.jsonl"
        if self._cards_path.exists():
            self._load_cards()

        self.collab = CollaborationHub(
            now_fn=lambda: self.engine.clock.now,
            bus=self.bus,
            card_exists=lambda cid: cid in self.cards,
            journal_path=self.data_dir / "collab.log",
        )

        self.engine.on_clock_persist = self._persist_clock
        self._persist_clock(clock)
        self.engine.activation_sweep()

        self.lock = threading.RLock()
        self._writer = ThreadPoolExecutor(max_workers=1, thread_name_prefix="fmds-writer")

    # ------------------------------------------------------------ plumbing

    @property
    def clock(self) -> SimClock:
        return self.engine.clock

    def _persist_clock(self, clock: SimClock) -> None:
        target = self.data_dir / "clock.json"
        tmp = target.with_suffix(".json.tmp")
        payload = json.dumps(
            {"now": clock.now, "speedup": clock.speedup, "running": clock.running}
        )
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, target)

    def _load_cards(self) -> None:
        lines = self._cards_path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                card = DataCard.from_record(record)
            except (json.JSONDecodeError, KeyError, ValueError):
                if i == len(lines) - 1:
                    break  # torn final line from a crash mid-append
                raise FmdsError("CORRUPT_LOG", f"card registry line {i + 1} is damaged")
            if card.card_id not in self.cards:
                self.cards[card.card_id] = card
                self.card_order.append(card.card_id)

    def register_card(self, card: DataCard) -> DataCard:
        """Idempotent: cards are content-addressed, re-registering is a no-op."""
        if card.card_id in self.cards:
            return self.cards[card.card_id]
        with open(self._cards_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(card.to_record(), sort_keys=True, separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.cards[card.card_id] = card
        self.card_order.append(card.card_id)
        return card

    def get_card(self, card_id: str) -> DataCard:
        card = self.cards.get(card_id)
        if card is None:
            raise FmdsError("UNKNOWN_CARD", f"no data card {card_id!r}")
        return card

    def mutate_sync(self, fn, *args, **kwargs):
        """Run a mutation on the single writer thread and wait for it."""
        def locked():
            with self.lock:
                return fn(*args, **kwargs)

        return self._writer.submit(locked).result()

    async def mutate(self, fn, *args, **kwargs):
        loop = asyncio.get_running_loop()

        def locked():
            with self.lock:
                return fn(*args, **kwargs)

        return await loop.run_in_executor(self._writer, locked)

    def close(self) -> None:
        self.collab.close()
        self._writer.shutdown(wait=True)

    # ----------------------------------------------------------- commands

    def create_area(self, body: dict, actor: str) -> dict:
        """POST /areas: plain FEA/FCA creation, or FCA + modeled program in
        one round trip when a rate is supplied (one-place rate entry).

        Validation is all-or-nothing: every parameter (shape, altitudes,
        window, rate, exemptions) is checked before anything persists.
        """
        designation = body.get("designation")
        vertices = [Waypoint(p[0], p[1]) for p in body.get("vertices", [])]
        floor_ft = body.get("floor_ft")
        ceiling_ft = body.get("ceiling_ft")
        start = _ts(body.get("active_start"))
        end = _ts(body.get("active_end"))
        name = body.get("name", "")
        rate = body.get("rate")
        # Dry-run the full validation before committing anything.
        build_flow_area(
            designation=designation,
            shape_kind=body.get("shape_kind"),
            vertices=vertices,
            floor_ft=floor_ft,
            ceiling_ft=ceiling_ft,
            active_window=(start, end),
            name=name,
            area_id="PREVIEW",
        )
        categories = body.get("exempt_categories", [])
        if rate is not None:
            if designation != "FCA":
                raise FmdsError("NOT_AN_FCA", "a rate can only be attached to an FCA")
            slot_spacing(rate)

        area = self.engine.create_flow_area(
            designation=designation,
            shape_kind=body.get("shape_kind"),
            vertices=vertices,
            floor_ft=floor_ft,
            ceiling_ft=ceiling_ft,
            active_start=start,
            active_end=end,
            name=name,
            actor=actor,
        )
        response = {"area": wire_area(area)}
        if rate is not None:
            assignments, card = self.engine.model_afp(
                area.area_id, rate, (start, end), categories
            )
            self.register_card(card)
            response["assignments"] = [wire_assignment(a) for a in assignments]
            response["card"] = wire_card(card)
        return response

    def model_program(self, body: dict) -> dict:
        assignments, card = self.engine.model_afp(
            body.get("area_id", ""),
            body.get("rate"),
            _window(body),
            body.get("exempt_categories", []),
        )
        self.register_card(card)
        return {
            "assignments": [wire_assignment(a) for a in assignments],
            "card": wire_card(card),
        }

    def implement_program(self, body: dict, actor: str) -> dict:
        afp, card = self.engine.implement_afp(
            body.get("area_id", ""),
            body.get("rate"),
            _window(body),
            body.get("exempt_categories", []),
            schedule_only=bool(body.get("schedule_only", False)),
            actor=actor,
        )
        self.register_card(card)
        return {"afp": wire_afp(afp), "card": wire_card(card)}

    def revise_program(self, afp_id: str, body: dict, actor: str) -> dict:
        new_window = _window(body, "new_window") if body.get("new_window") else None
        afp, card = self.engine.revise_afp(
            afp_id,
            new_rate=body.get("new_rate"),
            new_window=new_window,
            reason=body.get("reason", ""),
            actor=actor,
        )
        self.register_card(card)
        return {"afp": wire_afp(afp), "card": wire_card(card)}

    def purge_program(self, afp_id: str, actor: str) -> dict:
        afp = self.engine.purge_afp(afp_id, actor=actor)
        return {"afp": wire_afp(afp)}

    def advance_clock(self, body: dict, actor: str) -> dict:
        to = _ts(body.get("to"))
        events = self.engine.advance_clock(to, actor=actor)
        return {
            "now": format_iso8601(self.clock.now),
            "events": [wire_event(e) for e in events],
        }

    def set_clock_run(self, body: dict) -> dict:
        if "speedup" in body:
            speedup = float(body["speedup"])
            if speedup <= 0:
                raise FmdsError("MALFORMED_RECORD", "speedup must be positive")
            self.clock.speedup = speedup
        self.clock.running = bool(body.get("running", self.clock.running))
        self._persist_clock(self.clock)
        return self.clock_state()

    def post_note(self, body: dict, actor: str) -> dict:
        text = body.get("text", "")
        if not text.strip():
            raise FmdsError("MALFORMED_RECORD", "note text must be non-empty")
        entry = self.engine.ntml.append(
            self.clock.now, actor, "NOTE", body.get("subject_id", ""), {"text": text}
        )
        self.bus.publish("ntml", entry.timestamp, entry.to_record())
        return {"entry": entry.to_record()}

    # -------------------------------------------------------------- reads

    def clock_state(self) -> dict:
        return {
            "now": format_iso8601(self.clock.now),
            "running": self.clock.running,
            "speedup": self.clock.speedup,
        }

    def snapshot(self) -> dict:
        """Initial console payload: everything needed to render, plus the
        stream cursor to resume from."""
        return {
            "clock": self.clock_state(),
            "areas": [wire_area(a) for a in self.engine.areas.values()],
            "afps": [wire_afp(a) for a in self.engine.afps.values()],
            "flights": [wire_flight(f) for f in self.flights],
            "overlays": [wire_overlay(o) for o in self.overlays],
            "threads": [wire_thread(t) for t in self.collab.list_threads()],
            "meetings": [wire_meeting(m) for m in self.collab.calendar()],
            "cards": [wire_card(self.cards[cid]) for cid in self.card_order],
            "last_seq": self.bus.last_seq,
        }

    def state_fingerprint(self) -> dict:
        """Canonical recovery-equality view (used by crash-restart tests)."""
        return {
            "engine": self.engine.state_snapshot(),
            "threads": [t.to_record() for t in self.collab.list_threads()],
            "messages": {
                tid: [m.to_record() for m in self.collab.list_messages(tid)]
                for tid in self.collab.thread_order
            },
            "meetings": [m.to_record() for m in self.collab.calendar()],
            "cards": list(self.card_order),
            "clock": {"now": self.clock.now, "speedup": self.clock.speedup},
        }


# --------------------------------------------------------------------------
# HTTP app


async def _body(request: Request) -> dict:
    try:
        parsed = await request.json()
    except json.JSONDecodeError:
        raise FmdsError("MALFORMED_RECORD", "request body must be a JSON object")
    if not isinstance(parsed, dict):
        raise FmdsError("MALFORMED_RECORD", "request body must be a JSON object")
    return parsed


def build_app(ws: Workspace) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        ticker = asyncio.create_task(_run_ticker(ws))
        try:
            yield
        finally:
            ticker.cancel()
            try:
                await ticker
            except asyncio.CancelledError:
                pass
            ws.close()

    app = FastAPI(title="fmds", lifespan=lifespan)

    def actor_of(request: Request) -> str:
        return request.headers.get(ws.config.actor_header, "anonymous")

    @app.exception_handler(FmdsError)
    async def fmds_error_handler(_request: Request, exc: FmdsError):
        return JSONResponse(
            status_code=_HTTP_STATUS.get(exc.code, 400),
            content={"error": exc.code, "detail": exc.detail},
        )

    # ---- areas

    @app.post("/areas")
    async def post_areas(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.create_area, body, actor_of(request))

    @app.get("/areas")
    async def get_areas():
        with ws.lock:
            return {"areas": [wire_area(a) for a in ws.engine.areas.values()]}

    # ---- programs

    @app.post("/afps/model")
    async def post_model(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.model_program, body)

    @app.post("/afps")
    async def post_afps(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.implement_program, body, actor_of(request))

    @app.get("/afps")
    async def get_afps():
        with ws.lock:
            return {"afps": [wire_afp(a) for a in ws.engine.afps.values()]}

    @app.post("/afps/{afp_id}/revise")
    async def post_revise(afp_id: str, request: Request):
        body = await _body(request)
        return await ws.mutate(ws.revise_program, afp_id, body, actor_of(request))

    @app.post("/afps/{afp_id}/purge")
    async def post_purge(afp_id: str, request: Request):
        await _drain(request)
        return await ws.mutate(ws.purge_program, afp_id, actor_of(request))

    @app.get("/afps/{afp_id}/compliance")
    async def get_compliance(afp_id: str, at: str | None = None):
        with ws.lock:
            record = ws.engine.compliance(afp_id, None if at is None else _ts(at))
            return wire_compliance(record)

    # ---- cards

    @app.get("/cards")
    async def get_cards(ref_id: str | None = None):
        with ws.lock:
            cards = [ws.cards[cid] for cid in ws.card_order]
            if ref_id is not None:
                cards = [c for c in cards if c.ref_id == ref_id]
            return {"cards": [wire_card(c) for c in cards]}

    @app.get("/cards/{card_id}")
    async def get_card(card_id: str):
        with ws.lock:
            return {"card": wire_card(ws.get_card(card_id))}

    @app.post("/cards/compare")
    async def post_compare(request: Request):
        body = await _body(request)
        ids = body.get("card_ids")
        if not isinstance(ids, list):
            raise FmdsError("MALFORMED_RECORD", "card_ids must be a list")
        with ws.lock:
            table = compare_cards([ws.get_card(cid) for cid in ids])
        for row in table:
            row["window"] = _iso_window(tuple(row["window"]))
        return {"table": table}

    # ---- NTML

    @app.get("/ntml")
    async def get_ntml(
        start: str | None = None,
        end: str | None = None,
        event_types: str | None = None,
        subject_id: str | None = None,
    ):
        with ws.lock:
            entries = ws.ntml.query(
                start=None if start is None else _ts(start),
                end=None if end is None else _ts(end),
                event_types=event_types.split(",") if event_types else None,
                subject_id=subject_id,
            )
            return {"entries": [e.to_record() for e in entries]}

    @app.post("/ntml/note")
    async def post_ntml_note(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.post_note, body, actor_of(request))

    # ---- collaboration

    @app.post("/threads")
    async def post_threads(request: Request):
        body = await _body(request)
        thread = await ws.mutate(
            ws.collab.create_thread, body.get("topic", ""), body.get("members", [])
        )
        return {"thread": wire_thread(thread)}

    @app.get("/threads")
    async def get_threads():
        with ws.lock:
            return {"threads": [wire_thread(t) for t in ws.collab.list_threads()]}

    @app.post("/threads/{thread_id}/messages")
    async def post_message(thread_id: str, request: Request):
        body = await _body(request)
        message = await ws.mutate(
            ws.collab.post_message,
            thread_id,
            actor_of(request),
            text=body.get("text"),
            card_id=body.get("card_id"),
        )
        return {"message": wire_message(message)}

    @app.get("/threads/{thread_id}/messages")
    async def get_messages(thread_id: str):
        with ws.lock:
            return {
                "messages": [wire_message(m) for m in ws.collab.list_messages(thread_id)]
            }

    @app.post("/threads/{thread_id}/emphasis")
    async def post_emphasis(thread_id: str, request: Request):
        body = await _body(request)
        thread = await ws.mutate(
            ws.collab.set_emphasis, thread_id, bool(body.get("emphasized"))
        )
        return {"thread": wire_thread(thread)}

    @app.post("/threads/{thread_id}/mute")
    async def post_mute(thread_id: str, request: Request):
        body = await _body(request)
        thread = await ws.mutate(
            ws.collab.set_mute, thread_id, actor_of(request), bool(body.get("muted"))
        )
        return {"thread": wire_thread(thread)}

    @app.post("/threads/{thread_id}/voice")
    async def post_voice(thread_id: str, request: Request):
        body = await _body(request)
        thread = await ws.mutate(
            ws.collab.set_voice_presence, thread_id, int(body.get("count", 0))
        )
        return {"thread": wire_thread(thread)}

    @app.post("/meetings")
    async def post_meetings(request: Request):
        body = await _body(request)
        meeting = await ws.mutate(
            ws.collab.schedule_meeting,
            body.get("thread_id", ""),
            _ts(body.get("scheduled_for")),
            body.get("title", ""),
            body.get("created_via", "BUTTON"),
        )
        return {"meeting": wire_meeting(meeting)}

    @app.get("/meetings")
    async def get_meetings():
        with ws.lock:
            return {"meetings": [wire_meeting(m) for m in ws.collab.calendar()]}

    # ---- clock & positions

    @app.post("/clock/advance")
    async def post_clock_advance(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.advance_clock, body, actor_of(request))

    @app.post("/clock/run")
    async def post_clock_run(request: Request):
        body = await _body(request)
        return await ws.mutate(ws.set_clock_run, body)

    @app.get("/clock")
    async def get_clock():
        with ws.lock:
            return ws.clock_state()

    @app.get("/positions")
    async def get_positions(at: str | None = None):
        with ws.lock:
            t = ws.clock.now if at is None else _ts(at)
            snap = positions(ws.flights, t)
            return {
                "at": format_iso8601(t),
                "positions": [wire_position(p) for p in snap],
            }

    @app.get("/flights")
    async def get_flights():
        with ws.lock:
            return {"flights": [wire_flight(f) for f in ws.flights]}

    # ---- scenario context

    @app.get("/overlays")
    async def get_overlays():
        with ws.lock:
            return {"overlays": [wire_overlay(o) for o in ws.overlays]}

    @app.get("/constraints")
    async def get_constraints(start: str, end: str):
        with ws.lock:
            matched = constraint_summary(ws.overlays, (_ts(start), _ts(end)))
            return {"overlays": [wire_overlay(o) for o in matched]}

    @app.get("/snapshot")
    async def get_snapshot():
        with ws.lock:
            return ws.snapshot()

    # ---- event stream

    @app.get("/stream")
    async def get_stream(request: Request, since: int | None = None):
        last_id = request.headers.get("Last-Event-ID")
        cursor = since if since is not None else (int(last_id) if last_id else 0)
        return StreamingResponse(
            _stream_events(ws, request, cursor),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    return app


async def _drain(request: Request) -> None:
    """Read and discard an optional request body."""
    try:
        await request.body()
    except Exception:
        pass


def _sse_frame(event: Event) -> str:
    return f"id: {event.seq}\nevent: {event.kind}\ndata: {event.to_json()}\n\n"


async def _stream_events(ws: Workspace, request: Request, since: int):
    """Server-push loop: journal catch-up from `since`, then live events.

    A queue is subscribed before the journal snapshot is taken, so nothing
    published in between is lost; duplicates are dropped by sequence number.
    """
    loop = asyncio.get_running_loop()
    queue: asyncio.Queue[Event] = asyncio.Queue()

    def listener(event: Event) -> None:
        loop.call_soon_threadsafe(queue.put_nowait, event)

    ws.bus.add_listener(listener)
    try:
        last = since
        for event in ws.bus.since(since):
            yield _sse_frame(event)
            last = event.seq
        while True:
            try:
                event = await asyncio.wait_for(queue.get(), timeout=0.5)
            except asyncio.TimeoutError:
                if await request.is_disconnected():
                    return
                yield ": keep-alive\n\n"
                continue
            if event.seq <= last:
                continue  # already sent during journal catch-up
            yield _sse_frame(event)
            last = event.seq
    finally:
        ws.bus.remove_listener(listener)


async def _run_ticker(ws: Workspace) -> None:
    """Wall-clock pacing: advance simulated time while the clock runs.

    Pacing only schedules advances; outcomes depend solely on the advance
    targets, which is why tests drive /clock/advance directly instead.
    """
    while True:
        await asyncio.sleep(1.0)
        if ws.clock.running and ws.clock.speedup > 0:
            step = max(1, round(ws.clock.speedup))
            await ws.mutate(ws.engine.advance_clock, ws.clock.now + step)


# --------------------------------------------------------------------------
# process entry point


def check_bind(host: str, port: int) -> None:
    """Fail fast with BIND_FAILURE when the listen address is unusable."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise FmdsError("BIND_FAILURE", f"cannot bind {host}:{port}: {exc}")
    finally:
        probe.close()


def serve(config: ServiceConfig) -> None:
    import uvicorn

    host, port = config.host_port
    check_bind(host, port)
    ws = Workspace(config)
    app = build_app(ws)
    uvicorn.run(app, host=host, port=port, log_level="info")


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="fmds-service",
        description="Flow management data and services over HTTP.",
    )
    parser.add_argument("--listen", default="127.0.0.1:8040", help="host:port to listen on")
    parser.add_argument("--data-dir", default="fmds-data", help="writable state directory")
    parser.add_argument("--schedule", required=True, help="schedule JSONL scenario file")
    parser.add_argument("--overlays", default=None, help="overlay JSONL scenario file")
    parser.add_argument(
        "--speedup", type=float, default=1.0, help="simulated seconds per wall second"
    )
    args = parser.parse_args(argv)
    config = ServiceConfig(
        listen=args.listen,
        data_dir=args.data_dir,
        schedule_path=args.schedule,
        overlays_path=args.overlays,
        speedup=args.speedup,
    )
    serve(config)


if __name__ == "__main__":
    main()
