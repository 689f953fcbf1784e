"""CDM collaboration: chat threads, data-card sharing, emphasis, meetings.

Threads carry a per-member mute map (everyone starts muted); message events
are identical for every subscriber and carry the list of members for whom
the event is silent, so clients self-select whether to notify. Emphasis is
per-thread and idempotent: re-setting the current value emits nothing.

The hub journals every mutation to an append-only file and rebuilds its
state from that journal at construction, mirroring the NTML recovery model.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import FmdsError
from .events import EventBus

CREATED_VIA = ("BUTTON", "HOTKEY")


@dataclass
class Thread:
    """One topic- or group-organized chat thread."""

    thread_id: str
    topic: str
    members: tuple[str, ...]
    emphasized: bool = False
    muted: dict[str, bool] = field(default_factory=dict)
    voice_presence: int = 0

    def to_record(self) -> dict:
        return {
            "thread_id": self.thread_id,
            "topic": self.topic,
            "members": list(self.members),
            "emphasized": self.emphasized,
            "muted": dict(sorted(self.muted.items())),
            "voice_presence": self.voice_presence,
        }


@dataclass(frozen=True)
class Message:
    """Immutable chat message: either text or a data-card attachment."""

    message_id: str
    thread_id: str
    sender: str
    sent_at: int
    text: str | None = None
    card_id: str | None = None

    def to_record(self) -> dict:
        return {
            "message_id": self.message_id,
            "thread_id": self.thread_id,
            "sender": self.sender,
            "sent_at": self.sent_at,
            "text": self.text,
            "card_id": self.card_id,
        }


@dataclass(frozen=True)
class Meeting:
    meeting_id: str
    thread_id: str
    scheduled_for: int
    title: str
    created_via: str
    created_at: int

    def to_record(self) -> dict:
        return {
            "meeting_id": self.meeting_id,
            "thread_id": self.thread_id,
            "scheduled_for": self.scheduled_for,
            "title": self.title,
            "created_via": self.created_via,
            "created_at": self.created_at,
        }


class CollaborationHub:
    """Stateful owner of threads, messages, and meetings.

    ``now_fn`` supplies simulated time for sent_at stamps and the
    future-meeting check. ``card_exists`` validates card attachments.
    """

    def __init__(
        self,
        now_fn: Callable[[], int],
        bus: EventBus | None = None,
        card_exists: Callable[[str], bool] | None = None,
        journal_path: str | Path | None = None,
    ):
        self.now_fn = now_fn
        self.bus = bus if bus is not None else EventBus()
        self.card_exists = card_exists
        self.threads: dict[str, Thread] = {}
        self.thread_order: list[str] = []
        self.messages: dict[str, list[Message]] = {}
        self.meetings: dict[str, Meeting] = {}
        self._counters = {"THR": 0, "MSG": 0, "MTG": 0}
        self._journal_path = Path(journal_path) if journal_path is not None else None
        self._journal_file = None
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._load_journal()
            self._journal_file = open(self._journal_path, "a", encoding="utf-8")

    # ----------------------------------------------------------- journal

    def _load_journal(self) -> None:
        raw = self._journal_path.read_bytes().decode("utf-8", errors="replace")
        lines = raw.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1 and not raw.endswith("\n"):
                    break  # torn final line from a crash mid-append
                raise FmdsError(
                    "CORRUPT_LOG", f"collaboration journal line {i + 1} is not valid"
                )
            self._apply(record)

    def _journal(self, record: dict) -> None:
        if self._journal_file is None:
            return
        try:
            self._journal_file.write(
                json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
            )
            self._journal_file.flush()
            os.fsync(self._journal_file.fileno())
        except OSError as exc:
            raise FmdsError("STORAGE_FAILURE", f"cannot persist collaboration op: {exc}")

    def _apply(self, record: dict) -> None:
        """Re-execute a journaled mutation without journaling or publishing."""
        op = record["op"]
        if op == "thread":
            thread = Thread(
                thread_id=record["thread_id"],
                topic=record["topic"],
                members=tuple(record["members"]),
                muted={m: True for m in record["members"]},
            )
            self.threads[thread.thread_id] = thread
            self.thread_order.append(thread.thread_id)
            self.messages[thread.thread_id] = []
            self._bump(thread.thread_id)
        elif op == "message":
            msg = Message(
                message_id=record["message_id"],
                thread_id=record["thread_id"],
                sender=record["sender"],
                sent_at=record["sent_at"],
                text=record.get("text"),
                card_id=record.get("card_id"),
            )
            self.messages[msg.thread_id].append(msg)
            self._bump(msg.message_id)
        elif op == "emphasis":
            self.threads[record["thread_id"]].emphasized = bool(record["emphasized"])
        elif op == "mute":
            self.threads[record["thread_id"]].muted[record["member"]] = bool(record["muted"])
        elif op == "voice":
            self.threads[record["thread_id"]].voice_presence = int(record["count"])
        elif op == "meeting":
            meeting = Meeting(
                meeting_id=record["meeting_id"],
                thread_id=record["thread_id"],
                scheduled_for=record["scheduled_for"],
                title=record["title"],
                created_via=record["created_via"],
                created_at=record["created_at"],
            )
            self.meetings[meeting.meeting_id] = meeting
            self._bump(meeting.meeting_id)
        else:
            raise FmdsError("CORRUPT_LOG", f"unknown collaboration op {op!r}")

    def _bump(self, identifier: str) -> None:
        prefix, _, num = identifier.rpartition("-")
        if prefix in self._counters and num.isdigit():
            self._counters[prefix] = max(self._counters[prefix], int(num))

    def _next_id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}-{self._counters[prefix]:04d}"

    # --------------------------------------------------------------- ops

    def get_thread(self, thread_id: str) -> Thread:
        thread = self.threads.get(thread_id)
        if thread is None:
            raise FmdsError("UNKNOWN_THREAD", f"no thread {thread_id!r}")
        return thread

    def create_thread(self, topic: str, members: list[str]) -> Thread:
        if not topic or not topic.strip():
            raise FmdsError("EMPTY_TOPIC", "thread topic must be non-empty")
        members = list(dict.fromkeys(members))
        if not members:
            raise FmdsError("NO_MEMBERS", "thread needs at least one member")
        record = {
            "op": "thread",
            "thread_id": self._next_id("THR"),
            "topic": topic,
            "members": members,
        }
        self._apply(record)
        self._journal(record)
        thread = self.threads[record["thread_id"]]
        self.bus.publish("thread", self.now_fn(), {"thread": thread.to_record()})
        return thread

    def post_message(
        self,
        thread_id: str,
        sender: str,
        text: str | None = None,
        card_id: str | None = None,
    ) -> Message:
        thread = self.get_thread(thread_id)
        if sender not in thread.members:
            raise FmdsError("NOT_A_MEMBER", f"{sender!r} is not a member of {thread_id}")
        if (text is None) == (card_id is None):
            raise FmdsError(
                "MALFORMED_RECORD", "message body must be exactly one of text or card_id"
            )
        if card_id is not None and self.card_exists is not None and not self.card_exists(card_id):
            raise FmdsError("UNKNOWN_CARD", f"no data card {card_id!r}")
        record = {
            "op": "message",
            "message_id": self._next_id("MSG"),
            "thread_id": thread_id,
            "sender": sender,
            "sent_at": self.now_fn(),
            "text": text,
            "card_id": card_id,
        }
        self._apply(record)
        self._journal(record)
        message = self.messages[thread_id][-1]
        silent_for = sorted(m for m in thread.members if thread.muted.get(m, True))
        self.bus.publish(
            "message",
            message.sent_at,
            {"message": message.to_record(), "silent_for": silent_for},
        )
        return message

    def set_emphasis(self, thread_id: str, emphasized: bool) -> Thread:
        thread = self.get_thread(thread_id)
        if thread.emphasized == bool(emphasized):
            return thread  # idempotent: no state change, no event
        record = {"op": "emphasis", "thread_id": thread_id, "emphasized": bool(emphasized)}
        self._apply(record)
        self._journal(record)
        self.bus.publish(
            "thread_emphasis",
            self.now_fn(),
            {"thread_id": thread_id, "emphasized": thread.emphasized},
        )
        return thread

    def set_mute(self, thread_id: str, member: str, muted: bool) -> Thread:
        thread = self.get_thread(thread_id)
        if member not in thread.members:
            raise FmdsError("NOT_A_MEMBER", f"{member!r} is not a member of {thread_id}")
        if thread.muted.get(member, True) == bool(muted):
            return thread
        record = {"op": "mute", "thread_id": thread_id, "member": member, "muted": bool(muted)}
        self._apply(record)
        self._journal(record)
        self.bus.publish(
            "thread_mute",
            self.now_fn(),
            {"thread_id": thread_id, "member": member, "muted": bool(muted)},
        )
        return thread

    def set_voice_presence(self, thread_id: str, count: int) -> Thread:
        thread = self.get_thread(thread_id)
        count = max(0, int(count))
        if thread.voice_presence == count:
            return thread
        record = {"op": "voice", "thread_id": thread_id, "count": count}
        self._apply(record)
        self._journal(record)
        self.bus.publish(
            "thread_voice",
            self.now_fn(),
            {"thread_id": thread_id, "voice_presence": count},
        )
        return thread

    def schedule_meeting(
        self,
        thread_id: str,
        scheduled_for: int,
        title: str,
        created_via: str = "BUTTON",
    ) -> Meeting:
        self.get_thread(thread_id)
        if created_via not in CREATED_VIA:
            raise FmdsError(
                "MALFORMED_RECORD", f"created_via must be one of {CREATED_VIA}"
            )
        now = self.now_fn()
        if scheduled_for <= now:
            raise FmdsError(
                "PAST_TIME", f"meeting time {scheduled_for} is not after now ({now})"
            )
        record = {
            "op": "meeting",
            "meeting_id": self._next_id("MTG"),
            "thread_id": thread_id,
            "scheduled_for": int(scheduled_for),
            "title": title,
            "created_via": created_via,
            "created_at": now,
        }
        self._apply(record)
        self._journal(record)
        meeting = self.meetings[record["meeting_id"]]
        self.bus.publish("meeting", now, {"meeting": meeting.to_record()})
        return meeting

    # ------------------------------------------------------------- reads

    def list_threads(self) -> list[Thread]:
        """Threads in creation order."""
        return [self.threads[tid] for tid in self.thread_order]

    def list_messages(self, thread_id: str) -> list[Message]:
        self.get_thread(thread_id)
        return list(self.messages[thread_id])

    def calendar(self) -> list[Meeting]:
        """All meetings sorted by scheduled time (ties by meeting id)."""
        return sorted(
            self.meetings.values(), key=lambda m: (m.scheduled_for, m.meeting_id)
        )

    def close(self) -> None:
        if self._journal_file is not None:
            self._journal_file.close()
            self._journal_file = None
