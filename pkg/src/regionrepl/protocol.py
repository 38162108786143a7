"""LSNs, transaction status, records and message envelopes."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

from .topology import Role

NOTHING = "Nothing"

# (epoch, counter); (0, 0) is the empty-log sentinel
Position = tuple[int, int]
ORIGIN: Position = (0, 0)


class ProtocolError(RuntimeError):
    pass


class LsnParseError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Lsn:
    role_char: str
    server: str
    epoch: int
    counter: int

    def __post_init__(self):
        if self.role_char not in ("P", "S"):
            raise ValueError(f"role_char must be 'P' or 'S', got {self.role_char!r}")
        if not re.fullmatch(r"\d{2}", self.server):
            raise ValueError(f"bad server code {self.server!r}")
        if self.epoch < 0 or self.counter < 1:
            raise ValueError("epoch must be >= 0 and counter >= 1")

    @property
    def position(self) -> Position:
        return (self.epoch, self.counter)

    def __str__(self) -> str:
        return format_lsn(self)


_LSN_RE = re.compile(r"([PS])(\d{2})W(\d{4,})")


def format_lsn(lsn: Lsn) -> str:
    return f"{lsn.role_char}{lsn.server}W{lsn.counter:04d}"


def parse_lsn(text: str, epoch: int = 0) -> Lsn:
    """Inverse of :func:`format_lsn`; the epoch travels out of band."""
    m = _LSN_RE.fullmatch(text)
    if m is None:
        raise LsnParseError(f"malformed LSN {text!r}")
    counter = int(m.group(3))
    if counter < 1 or (len(m.group(3)) > 4 and m.group(3).startswith("0")):
        raise LsnParseError(f"malformed LSN counter in {text!r}")
    return Lsn(m.group(1), m.group(2), epoch, counter)


class Status(Enum):
    # renderings are frozen exactly, including the "Level"/"level" mix
    PENDING_SEMI_SYNC = "pending from Secondary in semi synchronous replication level"
    PENDING_SYNC = "pending from Secondary in synchronous replication level"
    PRIMARY_COMMIT = "Primary commit"
    ACK_SYNC = "acknowledgement from synchronous replication Level"
    ACK_SEMI_SYNC = "acknowledgement from semi synchronous replication Level"

    def render(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Status":
        return cls(text)


class StatusEvent(Enum):
    CLIENT_WRITE_ACCEPTED = "client-write-accepted"
    FORWARD_RECEIVED = "forward-received"
    WRITE_APPLIED = "write-applied"
    COMMIT_APPLIED = "commit-applied"


_STATUS_TABLE = {
    (Role.SEMI, StatusEvent.CLIENT_WRITE_ACCEPTED): Status.PENDING_SEMI_SYNC,
    (Role.SYNC, StatusEvent.FORWARD_RECEIVED): Status.PENDING_SYNC,
    (Role.PRIMARY, StatusEvent.WRITE_APPLIED): Status.PRIMARY_COMMIT,
    (Role.SYNC, StatusEvent.COMMIT_APPLIED): Status.ACK_SYNC,
    (Role.SEMI, StatusEvent.COMMIT_APPLIED): Status.ACK_SEMI_SYNC,
}


def determine_status(role: Role, event: StatusEvent) -> Status:
    try:
        return _STATUS_TABLE[(role, event)]
    except KeyError:
        raise ProtocolError(f"no status for {role.value} on {event.value}") from None


_S = Status
_TRANSITIONS = {
    # semi-entry chain
    (None, _S.PENDING_SEMI_SYNC),
    (_S.PENDING_SEMI_SYNC, _S.PENDING_SYNC),
    (_S.PENDING_SYNC, _S.PRIMARY_COMMIT),
    (_S.PRIMARY_COMMIT, _S.ACK_SYNC),
    (_S.ACK_SYNC, _S.ACK_SEMI_SYNC),
    # primary entry
    (None, _S.PRIMARY_COMMIT),
    # sync entry
    (None, _S.PENDING_SYNC),
    # semi attached straight to a primary: promoted parent, or orphaned branch
    (_S.PENDING_SEMI_SYNC, _S.PRIMARY_COMMIT),
    (_S.PRIMARY_COMMIT, _S.ACK_SEMI_SYNC),
}


def allowed_transition(current: Status | None, new: Status) -> bool:
    return (current, new) in _TRANSITIONS


@dataclass(frozen=True)
class WriteRequest:
    request_id: str
    client: str
    key: str
    value: str
    entry_server: str


@dataclass(frozen=True)
class ReadRequest:
    request_id: str
    client: str
    key: str
    entry_server: str


@dataclass(frozen=True)
class TransactionRecord:
    request: WriteRequest
    secondary_lsn: Lsn | None = None
    primary_lsn: Lsn | None = None
    status: Status | None = None
    # position of the preceding commit in the primary's log
    prev: Position | None = None

    @property
    def request_id(self) -> str:
        return self.request.request_id

    @property
    def position(self) -> Position:
        if self.primary_lsn is None:
            raise ProtocolError(f"{self.request_id} has no primary LSN")
        return self.primary_lsn.position

    def with_status(self, status: Status) -> "TransactionRecord":
        return replace(self, status=status)


class Kind(Enum):
    FORWARD_WRITE = "ForwardWrite"
    COMMIT_BROADCAST = "CommitBroadcast"
    COMMIT_TO_SEMI = "CommitToSemi"
    ACK_TO_PRIMARY = "AckToPrimary"
    ACK_TO_SYNC_PARENT = "AckToSyncParent"
    CLIENT_WRITE = "ClientWrite"
    CLIENT_WRITE_ACK = "ClientWriteAck"
    CLIENT_READ = "ClientRead"
    CLIENT_READ_REPLY = "ClientReadReply"
    HEARTBEAT = "Heartbeat"
    CATCH_UP_REQUEST = "CatchUpRequest"
    CATCH_UP_TRANSFER = "CatchUpTransfer"
    REDIRECT_ERROR = "RedirectError"


CLIENT_BOUND = frozenset({Kind.CLIENT_WRITE_ACK, Kind.CLIENT_READ_REPLY, Kind.REDIRECT_ERROR})


@dataclass(frozen=True)
class Message:
    kind: Kind
    src: str
    dst: str
    record: TransactionRecord | None = None
    payload: Mapping[str, Any] = field(default_factory=dict)

    @property
    def request_id(self) -> str | None:
        if self.record is not None:
            return self.record.request_id
        return self.payload.get("req")
