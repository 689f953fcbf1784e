"""Error type shared across the package.

Every operation failure carries a stable machine-readable code (e.g.
``DUPLICATE_ID``, ``OVERLAPPING_AFP``) so callers and the HTTP layer can
dispatch on it without parsing messages.
"""

from __future__ import annotations


class FmdsError(Exception):
    """Operation failure with a stable error code.

    Attributes:
        code: machine-readable error code string.
        detail: human-readable description.
    """

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail or code
        super().__init__(f"{code}: {self.detail}" if detail else code)


# Ingest
MALFORMED_RECORD = "MALFORMED_RECORD"
DUPLICATE_ID = "DUPLICATE_ID"
EMPTY_SCHEDULE = "EMPTY_SCHEDULE"
INVALID_POLYGON = "INVALID_POLYGON"
INVALID_WINDOW = "INVALID_WINDOW"

# Flow geometry
INVALID_SHAPE = "INVALID_SHAPE"
INVALID_ALTITUDE_BAND = "INVALID_ALTITUDE_BAND"
MISALIGNED_SPAN = "MISALIGNED_SPAN"
INVALID_BIN_WIDTH = "INVALID_BIN_WIDTH"

# TMI engine
NOT_AN_FCA = "NOT_AN_FCA"
INVALID_RATE = "INVALID_RATE"
OVERLAPPING_AFP = "OVERLAPPING_AFP"
UNKNOWN_AFP = "UNKNOWN_AFP"
AFP_TERMINAL = "AFP_TERMINAL"
NO_CHANGE = "NO_CHANGE"
EMPTY_INPUT = "EMPTY_INPUT"
UNKNOWN_AREA = "UNKNOWN_AREA"

# NTML log
TIME_REGRESSION = "TIME_REGRESSION"
STORAGE_FAILURE = "STORAGE_FAILURE"
GAP_DETECTED = "GAP_DETECTED"

# Collaboration
EMPTY_TOPIC = "EMPTY_TOPIC"
NO_MEMBERS = "NO_MEMBERS"
NOT_A_MEMBER = "NOT_A_MEMBER"
UNKNOWN_THREAD = "UNKNOWN_THREAD"
UNKNOWN_CARD = "UNKNOWN_CARD"
PAST_TIME = "PAST_TIME"

# Clock / monitoring
NOT_YET_ACTIVE = "NOT_YET_ACTIVE"

# Service
BIND_FAILURE = "BIND_FAILURE"
CORRUPT_LOG = "CORRUPT_LOG"
UNKNOWN_FLIGHT = "UNKNOWN_FLIGHT"
