"""Flow Management Data and Services: a desk-scale traffic-flow workbench.

Ingests flight schedules, evaluates drawn flow areas (FEA/FCA) against
routes, models and implements airspace flow programs with ration-by-
schedule delay assignment, logs every transition to an append-only NTML,
supports CDM chat with shareable Data Cards, and replays a whole simulated
day deterministically. An HTTP service layer exposes everything to the
operator console.
"""

from .collaboration import CollaborationHub, Meeting, Message, Thread
from .errors import FmdsError
from .events import Event, EventBus
from .flow_geometry import (
    Crossing,
    DemandHistogram,
    FlowArea,
    aligned_span,
    arrival_time,
    build_flow_area,
    capture_flights,
    demand_histogram,
    first_crossing,
    position_at,
    route_times,
)
from .geo import Waypoint, haversine_nm
from .nas_clock import ComplianceRecord, FlightPosition, SimClock, flight_phase, positions
from .ntml_log import EVENT_TYPES, NtmlEntry, NtmlLog, load_ntml, replay
from .schedule_ingest import (
    EXEMPT_CATEGORIES,
    ConstraintOverlay,
    Flight,
    constraint_summary,
    load_overlays,
    load_schedule,
    save_overlays,
    save_schedule,
)
from .service import ServiceConfig, Workspace, build_app, serve
from .tmi_engine import (
    AfpProgram,
    DataCard,
    Revision,
    SlotAssignment,
    TmiEngine,
    build_data_card,
    compare_cards,
    run_rbs,
    slot_spacing,
)

__version__ = "1.0.0"

__all__ = [
    "AfpProgram",
    "CollaborationHub",
    "ComplianceRecord",
    "ConstraintOverlay",
    "Crossing",
    "DataCard",
    "DemandHistogram",
    "EVENT_TYPES",
    "EXEMPT_CATEGORIES",
    "Event",
    "EventBus",
    "Flight",
    "FlightPosition",
    "FlowArea",
    "FmdsError",
    "Meeting",
    "Message",
    "NtmlEntry",
    "NtmlLog",
    "Revision",
    "ServiceConfig",
    "SimClock",
    "SlotAssignment",
    "Thread",
    "TmiEngine",
    "Waypoint",
    "Workspace",
    "aligned_span",
    "arrival_time",
    "build_app",
    "build_data_card",
    "build_flow_area",
    "capture_flights",
    "compare_cards",
    "constraint_summary",
    "demand_histogram",
    "first_crossing",
    "flight_phase",
    "haversine_nm",
    "load_ntml",
    "load_overlays",
    "load_schedule",
    "position_at",
    "positions",
    "replay",
    "route_times",
    "run_rbs",
    "save_overlays",
    "save_schedule",
    "serve",
    "slot_spacing",
]
