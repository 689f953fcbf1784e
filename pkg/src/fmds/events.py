"""Global event journal feeding the server-push stream.

Every observable state change (NTML append, chat message, emphasis change,
meeting, flight phase transition) is published here with a monotone global
sequence number. Subscribers replay the journal from any sequence and then
follow live; the journal is optionally write-through persisted so a stream
client can resume across a service restart.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    timestamp: int
    payload: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "timestamp": self.timestamp,
            "payload": self.payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"), sort_keys=True)


class EventBus:
    """Append-only in-memory journal with listener fan-out.

    Publishing assigns the next global sequence number, appends to the
    journal (and the journal file when configured), then invokes listeners.
    Listeners must not block: stream fan-out happens off the publishing
    thread via queue handoff in the service layer.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._journal: list[Event] = []
        self._listeners: list[Callable[[Event], None]] = []
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._journal = _read_events(self._path)

    @property
    def journal(self) -> tuple[Event, ...]:
        with self._lock:
            return tuple(self._journal)

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._journal[-1].seq if self._journal else 0

    def publish(self, kind: str, timestamp: int, payload: dict) -> Event:
        with self._lock:
            event = Event(
                seq=(self._journal[-1].seq if self._journal else 0) + 1,
                kind=kind,
                timestamp=int(timestamp),
                payload=payload,
            )
            if self._path is not None:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(event.to_json() + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._journal.append(event)
            listeners = list(self._listeners)
        for listener in listeners:
            listener(event)
        return event

    def add_listener(self, listener: Callable[[Event], None]) -> None:
        with self._lock:
            self._listeners.append(listener)

    def remove_listener(self, listener: Callable[[Event], None]) -> None:
        with self._lock:
            if listener in self._listeners:
                self._listeners.remove(listener)

    def since(self, seq: int) -> list[Event]:
        """Events with sequence strictly greater than seq, in order."""
        with self._lock:
            return [e for e in self._journal if e.seq > seq]


def _read_events(path: Path) -> list[Event]:
    events: list[Event] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            events.append(
                Event(
                    seq=int(rec["seq"]),
                    kind=str(rec["kind"]),
                    timestamp=int(rec["timestamp"]),
                    payload=dict(rec.get("payload") or {}),
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError):
            if i == len(lines) - 1:
                break  # torn final line from a crash mid-write
            raise
    return events
