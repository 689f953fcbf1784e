"""Append-only National Traffic Management Log (NTML).

One line-delimited JSON record per entry. Sequences are gapless from 1 and
entries are immutable once appended; appends are fsync'd so the log
survives a crash. NOTE entries are free-text operator lines and carry no
replay semantics.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FmdsError
from .timeutil import format_iso8601, parse_iso8601

EVENT_TYPES = (
    "FEA_CREATED",
    "FCA_CREATED",
    "AFP_PROPOSED",
    "AFP_SCHEDULED",
    "AFP_IMPLEMENTED",
    "AFP_REVISED",
    "AFP_PURGED",
    "NOTE",
)

# Final status each event type implies for its subject during replay.
_REPLAY_STATUS = {
    "FEA_CREATED": "FEA",
    "FCA_CREATED": "FCA",
    "AFP_PROPOSED": "PROPOSED",
    "AFP_SCHEDULED": "SCHEDULED",
    "AFP_IMPLEMENTED": "ACTIVE",
    "AFP_PURGED": "PURGED",
}


@dataclass(frozen=True)
class NtmlEntry:
    sequence: int
    timestamp: int
    actor: str
    event_type: str
    subject_id: str
    payload: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "sequence": self.sequence,
            "timestamp": format_iso8601(self.timestamp),
            "actor": self.actor,
            "event_type": self.event_type,
            "subject_id": self.subject_id,
            "payload": self.payload,
        }

    @classmethod
    def from_record(cls, record: dict) -> "NtmlEntry":
        return cls(
            sequence=int(record["sequence"]),
            timestamp=parse_iso8601(record["timestamp"]),
            actor=str(record["actor"]),
            event_type=str(record["event_type"]),
            subject_id=str(record["subject_id"]),
            payload=dict(record.get("payload") or {}),
        )


class NtmlLog:
    """Append-only log with optional file durability.

    With a path, existing entries are loaded at construction and every
    append is written and fsync'd before returning. A torn final line
    (crash mid-write) is dropped: the append it belonged to never returned.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: list[NtmlEntry] = []
        if self._path is not None and self._path.exists():
            self._entries = _read_entries(self._path)

    @property
    def entries(self) -> tuple[NtmlEntry, ...]:
        return tuple(self._entries)

    @property
    def last_sequence(self) -> int:
        return self._entries[-1].sequence if self._entries else 0

    @property
    def last_timestamp(self) -> int | None:
        return self._entries[-1].timestamp if self._entries else None

    def append(
        self,
        timestamp: int,
        actor: str,
        event_type: str,
        subject_id: str,
        payload: dict | None = None,
    ) -> NtmlEntry:
        """Append one entry, persisting it before returning."""
        if event_type not in EVENT_TYPES:
            raise FmdsError("MALFORMED_RECORD", f"unknown NTML event type {event_type!r}")
        last = self.last_timestamp
        if last is not None and timestamp < last:
            raise FmdsError(
                "TIME_REGRESSION",
                f"entry timestamp {timestamp} precedes last entry at {last}",
            )
        entry = NtmlEntry(
            sequence=self.last_sequence + 1,
            timestamp=int(timestamp),
            actor=actor,
            event_type=event_type,
            subject_id=subject_id,
            payload=dict(payload or {}),
        )
        if self._path is not None:
            line = json.dumps(entry.to_record(), separators=(",", ":"), sort_keys=True)
            try:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise FmdsError("STORAGE_FAILURE", f"cannot persist NTML entry: {exc}")
        self._entries.append(entry)
        return entry

    def query(
        self,
        start: int | None = None,
        end: int | None = None,
        event_types: list[str] | None = None,
        subject_id: str | None = None,
    ) -> list[NtmlEntry]:
        """Entries matching every given filter, in sequence order.

        The time range is half-open: start <= timestamp < end. An empty
        filter returns the whole log.
        """
        wanted = set(event_types) if event_types is not None else None
        out = []
        for e in self._entries:
            if start is not None and e.timestamp < start:
                continue
            if end is not None and e.timestamp >= end:
                continue
            if wanted is not None and e.event_type not in wanted:
                continue
            if subject_id is not None and e.subject_id != subject_id:
                continue
            out.append(e)
        return out


def _read_entries(path: Path) -> list[NtmlEntry]:
    entries: list[NtmlEntry] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            entries.append(NtmlEntry.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if i == len(lines) - 1:
                break  # torn final line from a crash mid-append
            raise FmdsError("CORRUPT_LOG", f"{path}: bad record on line {i + 1}: {exc}")
    for i, e in enumerate(entries, start=1):
        if e.sequence != i:
            raise FmdsError(
                "CORRUPT_LOG", f"{path}: sequence gap (expected {i}, found {e.sequence})"
            )
    return entries


def load_ntml(path: str | Path) -> list[NtmlEntry]:
    """Read and validate an NTML file (gapless sequence from 1)."""
    return _read_entries(Path(path))


def replay(entries: list[NtmlEntry]) -> dict[str, str]:
    """Reconstruct the final status of every subject from log entries.

    Entries must be gapless from sequence 1. NOTE entries carry no state.
    The result maps subject_id to FEA/FCA for areas and to the final
    lifecycle status for AFPs.
    """
    for i, e in enumerate(entries, start=1):
        if e.sequence != i:
            raise FmdsError("GAP_DETECTED", f"expected sequence {i}, found {e.sequence}")
    statuses: dict[str, str] = {}
    for e in entries:
        status = _REPLAY_STATUS.get(e.event_type)
        if status is not None:
            statuses[e.subject_id] = status
    return statuses
