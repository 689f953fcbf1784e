"""Timestamp conventions.

All timestamps in the package are integral seconds since the UTC epoch.
Files and wire payloads carry ISO-8601 UTC strings; these helpers convert
between the two. Time intervals are half-open ``[start, end)`` everywhere.
"""

from __future__ import annotations

from datetime import datetime, timezone


def parse_iso8601(text: str) -> int:
    """Parse an ISO-8601 UTC timestamp to epoch seconds.

    Accepts a trailing ``Z`` or an explicit UTC offset. Sub-second digits
    are rejected: the system works in whole seconds.
    """
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be a string, got {type(text).__name__}")
    cleaned = text.strip()
    if cleaned.endswith("Z"):
        cleaned = cleaned[:-1] + "+00:00"
    dt = datetime.fromisoformat(cleaned)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    if dt.microsecond != 0:
        raise ValueError(f"sub-second timestamps not supported: {text!r}")
    return int(dt.timestamp())


def format_iso8601(ts: int) -> str:
    """Format epoch seconds as an ISO-8601 UTC string with a ``Z`` suffix."""
    dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
