"""Line-oriented trace format.

One event per line: ``t=<ms> <who> <event> key=value ...``. Values are
shell-quoted, so ``shlex.split`` recovers every field. The first line is a
``world config`` header.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from typing import Iterable

from ..protocol import NOTHING, Kind, Message, TransactionRecord, WriteRequest


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    at: int
    who: str
    event: str
    fields: tuple[tuple[str, str], ...] = ()
    line: int = 0

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def __getitem__(self, key: str) -> str:
        v = self.get(key)
        if v is None:
            raise KeyError(key)
        return v

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    @property
    def kind(self) -> str | None:
        return self.get("kind")

    def render(self) -> str:
        return format_line(self.at, self.who, self.event, self.fields)


def _text(v) -> str:
    if v is None:
        return NOTHING
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple) and len(v) == 2:
        return f"{v[0]}.{v[1]}"
    return str(v)


def format_line(at: int, who: str, event: str, fields: Iterable[tuple[str, object]]) -> str:
    parts = [f"t={at}", who, event]
    parts += [f"{k}={shlex.quote(_text(v))}" for k, v in fields]
    return " ".join(parts)


def parse_line(text: str, lineno: int = 0) -> TraceRecord:
    try:
        parts = shlex.split(text)
    except ValueError as exc:
        raise TraceFormatError(f"line {lineno}: {exc}") from None
    if len(parts) < 3 or not parts[0].startswith("t="):
        raise TraceFormatError(f"line {lineno}: expected 't=<ms> <who> <event> ...'")
    try:
        at = int(parts[0][2:])
    except ValueError:
        raise TraceFormatError(f"line {lineno}: bad time {parts[0]!r}") from None
    fields = []
    for p in parts[3:]:
        k, sep, v = p.partition("=")
        if not sep or not k:
            raise TraceFormatError(f"line {lineno}: bad field {p!r}")
        fields.append((k, v))
    return TraceRecord(at, parts[1], parts[2], tuple(fields), lineno)


def parse_trace(text: str) -> list[TraceRecord]:
    out = []
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() and not line.lstrip().startswith("#"):
            out.append(parse_line(line, i))
    return out


def position_text(pos) -> str:
    return NOTHING if pos is None else f"{pos[0]}.{pos[1]}"


def parse_position(text: str | None):
    if text is None or text == NOTHING:
        return None
    e, _, c = text.partition(".")
    return (int(e), int(c))


def record_fields(rec: TransactionRecord) -> list[tuple[str, object]]:
    req = rec.request
    plsn = rec.primary_lsn
    return [
        ("req", req.request_id),
        ("key", req.key),
        ("value", req.value),
        ("entry", req.entry_server),
        ("slsn", str(rec.secondary_lsn) if rec.secondary_lsn else NOTHING),
        ("plsn", str(plsn) if plsn else NOTHING),
        ("epoch", plsn.epoch if plsn else NOTHING),
        ("status", rec.status.value if rec.status else NOTHING),
    ]


def message_fields(msg: Message) -> list[tuple[str, object]]:
    if msg.record is not None:
        return record_fields(msg.record)
    p = msg.payload
    kind = msg.kind
    if kind in (Kind.CLIENT_WRITE, Kind.CLIENT_READ):
        req = p["request"]
        out = [("req", req.request_id), ("key", req.key)]
        if isinstance(req, WriteRequest):
            out.append(("value", req.value))
        return out
    if kind is Kind.CLIENT_READ_REPLY:
        return [("req", p["req"]), ("key", p["key"]), ("value", p["value"]),
                ("found", p["found"]), ("ver", position_text(p["ver"]))]
    if kind is Kind.REDIRECT_ERROR:
        return [("req", p["req"]), ("primary", p["primary"])]
    if kind is Kind.HEARTBEAT:
        return [("role", p["role"]), ("mode", p["mode"]), ("epoch", p["epoch"]),
                ("primary", p["primary"])]
    if kind is Kind.CATCH_UP_REQUEST:
        return [("after", position_text(p["after"]))]
    if kind is Kind.CATCH_UP_TRANSFER:
        entries = p["entries"]
        return [("count", len(entries)),
                ("first", position_text(entries[0].position) if entries else NOTHING),
                ("upto", position_text(p["upto"])), ("role", p["role"]),
                ("epoch", p["epoch"]), ("primary", p["primary"])]
    return sorted(p.items())


class TraceWriter:
    """Simulator observer that renders events as trace lines."""

    def __init__(self, include_heartbeats: bool = False):
        self.include_heartbeats = include_heartbeats
        self.lines: list[str] = []

    def header(self, **config) -> None:
        self.lines.append(format_line(0, "world", "config", list(config.items())))

    def __call__(self, at: int, who: str, event: str, data: dict, background: bool) -> None:
        if background and not self.include_heartbeats:
            return
        fields: list[tuple[str, object]] = []
        if event in ("send", "recv", "drop"):
            msg: Message = data["message"]
            fields.append(("kind", msg.kind.value))
            fields.append(("to", msg.dst) if event == "send" else ("from", msg.src))
            if event == "drop":
                fields.append(("to", msg.dst))
                fields.append(("reason", data["reason"]))
            fields.append(("mid", data["mid"]))
            fields += message_fields(msg)
        elif event == "issue":
            req = data["request"]
            fields += [("op", "write" if isinstance(req, WriteRequest) else "read"),
                       ("req", req.request_id), ("key", req.key)]
            if isinstance(req, WriteRequest):
                fields.append(("value", req.value))
            fields += [("to", data["to"]), ("attempt", data["attempt"]),
                       ("reason", data["reason"])]
        else:
            fields += list(data.items())
        self.lines.append(format_line(at, who, event, fields))

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

