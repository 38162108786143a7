"""Convergence check over a live world and invariant checks over a trace."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from ..engine import Mode
from ..netsim import World
from ..protocol import NOTHING, Status, allowed_transition, parse_lsn
from ..topology import Role, build_topology
from .trace import TraceRecord, parse_position, parse_trace

# -- convergence ---------------------------------------------------------------


@dataclass
class ConvergenceReport:
    servers: list[str]
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        if self.ok:
            return f"PASS converged over {len(self.servers)} live servers"
        return "FAIL " + "; ".join(self.problems)


def check_convergence(world: World) -> ConvergenceReport:
    """Live replicas must hold identical stores and logs and nothing in flight."""
    live = [r for r in world.replicas.values() if r.mode is not Mode.DOWN]
    report = ConvergenceReport(sorted(r.id for r in live))
    if not live:
        return report
    primaries = [r for r in live if r.role is Role.PRIMARY]
    ref = primaries[0] if primaries else live[0]
    ref_log = ref.log_signature()
    for r in sorted(live, key=lambda r: r.id):
        if r.pending:
            report.problems.append(f"{r.id} has pending {sorted(r.pending)}")
        if r.commit_buffer:
            report.problems.append(f"{r.id} has buffered commits {sorted(r.commit_buffer)}")
        if r.ack_wait:
            report.problems.append(f"{r.id} awaits acks for {sorted(r.ack_wait)}")
        if r is ref:
            continue
        log = r.log_signature()
        if log != ref_log:
            i = next((i for i, (a, b) in enumerate(zip(log, ref_log)) if a != b),
                     min(len(log), len(ref_log)))
            mine = log[i] if i < len(log) else NOTHING
            theirs = ref_log[i] if i < len(ref_log) else NOTHING
            report.problems.append(
                f"{r.id} log diverges from {ref.id} at index {i}: {mine} vs {theirs}")
        for key in sorted(set(r.store) | set(ref.store)):
            if r.store.get(key) != ref.store.get(key):
                report.problems.append(
                    f"{r.id} key {key!r} = {r.store.get(key)!r}, {ref.id} has "
                    f"{ref.store.get(key)!r}")
                break
    return report


# -- trace verification --------------------------------------------------------

CHECKS = ("fifo", "status", "log", "single_primary", "promotion",
          "message_count", "read_your_writes", "containment")

_RECORD_KINDS = {"ForwardWrite", "CommitBroadcast", "CommitToSemi", "AckToPrimary",
                 "AckToSyncParent", "ClientWriteAck"}
_PROTOCOL_KINDS = _RECORD_KINDS - {"ClientWriteAck"}


@dataclass(frozen=True)
class Violation:
    check: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: [{self.check}] {self.message}"


@dataclass
class TraceReport:
    violations: list[Violation] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def failed_checks(self) -> set[str]:
        return {v.check for v in self.violations}

    def lines(self) -> list[str]:
        out = []
        failed = self.failed_checks()
        for c in CHECKS:
            if c in self.skipped:
                out.append(f"SKIP {c}: {self.skipped[c]}")
            else:
                out.append(f"{'FAIL' if c in failed else 'PASS'} {c}")
        out += [str(v) for v in self.violations]
        return out


@dataclass
class _Region:
    primary: str
    order: list[str]
    roles: dict[str, Role]
    branches: int
    semis: int
    timeout_ms: int
    heartbeat_ms: int

    def expected_messages(self, entry: str) -> int:
        b, bs = self.branches, self.branches * self.semis
        role = self.roles[entry]
        base = 2 * b + 2 * bs + 1
        if role is Role.SEMI:
            return base + 2
        if role is Role.SYNC:
            return base + 1
        return base


def _region(records: list[TraceRecord]) -> _Region:
    hdr = next((r for r in records if r.who == "world" and r.event == "config"), None)
    get = (lambda k, d: hdr.get(k, d)) if hdr else (lambda k, d: d)
    branches = int(get("branches", "4"))
    semis = int(get("semis", "3"))
    topo = build_topology(branches, semis)
    order = get("order", None)
    order = order.split(",") if order else list(topo.sync_ids)
    roles = {s: topo.role_of(s) for s in topo.servers}
    return _Region(get("primary", topo.primary), order, roles, branches, semis,
                   int(get("session_timeout_ms", "200")), int(get("heartbeat_ms", "50")))


def _position(rec: TraceRecord):
    plsn = rec.get("plsn")
    if plsn in (None, NOTHING):
        return None
    return (int(rec.get("epoch")), parse_lsn(plsn).counter)


def _status(text: str | None) -> Status | None:
    if text in (None, NOTHING):
        return None
    return Status.parse(text)


def verify_trace(trace: str | Iterable[TraceRecord]) -> TraceReport:
    records = parse_trace(trace) if isinstance(trace, str) else list(trace)
    report = TraceReport()
    region = _region(records)
    for check in (_check_fifo, _check_status, _check_log, _check_single_primary,
                  _check_promotion, _check_message_count, _check_read_your_writes,
                  _check_containment):
        check(records, region, report)
    report.violations.sort(key=lambda v: (v.line, CHECKS.index(v.check)))
    return report


def _flag(report: TraceReport, check: str, rec: TraceRecord | None, message: str) -> None:
    report.violations.append(Violation(check, rec.line if rec else 0, message))


def _check_fifo(records, region, report):
    """Every receive matches an earlier identical send; pairs deliver in send order."""
    sends: dict[str, TraceRecord] = {}
    send_order: dict[tuple[str, str], list[str]] = defaultdict(list)
    recv_order: dict[tuple[str, str], list[TraceRecord]] = defaultdict(list)
    for r in records:
        if r.event == "send":
            mid = r.get("mid")
            if mid in sends:
                _flag(report, "fifo", r, f"message id {mid} sent twice")
            sends[mid] = r
            send_order[(r.who, r["to"])].append(mid)
        elif r.event in ("recv", "drop") and "mid" in r and r.get("reason") != "link":
            s = sends.get(r["mid"])
            if s is None:
                _flag(report, "fifo", r, f"{r.event} of message {r['mid']} that was never sent")
                continue
            if r.at < s.at:
                _flag(report, "fifo", r, f"message {r['mid']} delivered before it was sent")
            mine = {k: v for k, v in r.fields if k not in ("from", "to", "reason")}
            theirs = {k: v for k, v in s.fields if k not in ("from", "to")}
            if mine != theirs:
                diff = sorted(k for k in set(mine) | set(theirs) if mine.get(k) != theirs.get(k))
                _flag(report, "fifo", r, f"message {r['mid']} altered in transit: {diff}")
            recv_order[(s.who, s["to"])].append(r)
    for pair, recvs in recv_order.items():
        sent = [m for m in send_order[pair]]
        pos = {m: i for i, m in enumerate(sent)}
        last = -1
        for r in recvs:
            i = pos[r["mid"]]
            if i < last:
                _flag(report, "fifo", r,
                      f"{pair[0]}->{pair[1]} delivered message {r['mid']} out of send order")
            last = max(last, i)


def _check_status(records, region, report):
    """Each record a server emits follows from the last status it received."""
    last_in: dict[tuple[str, str], Status | None] = {}
    for r in records:
        kind = r.kind
        if kind not in _RECORD_KINDS:
            continue
        try:
            status = _status(r.get("status"))
        except ValueError:
            _flag(report, "status", r, f"unknown status {r.get('status')!r}")
            continue
        key = (r.who, r["req"])
        if r.event == "recv" and r.who in region.roles:
            last_in[key] = status
        elif r.event == "send" and kind in _PROTOCOL_KINDS:
            prior = last_in.get(key)
            if status is None or not allowed_transition(prior, status):
                before = prior.value if prior else NOTHING
                after = status.value if status else NOTHING
                _flag(report, "status", r,
                      f"{r.who} moved {r['req']} from {before!r} to {after!r}")


def _check_log(records, region, report):
    """Per-server logs are gap-free, epoch-monotone and agree with each other."""
    logs: dict[str, list[tuple[tuple[int, int], str, TraceRecord]]] = defaultdict(list)
    owner: dict[tuple[int, int], tuple[str, str]] = {}
    for r in records:
        if r.event != "apply":
            continue
        pos = (int(r["epoch"]), int(r["counter"]))
        req = r["req"]
        seen = owner.setdefault(pos, (req, r.who))
        if seen[0] != req:
            _flag(report, "log", r, f"{r.who} applied {req} at {pos[0]}.{pos[1]} where "
                                    f"{seen[1]} applied {seen[0]}")
        log = logs[r.who]
        if any(q == req for _, q, _ in log):
            _flag(report, "log", r, f"{r.who} applied {req} twice")
        if log:
            (pe, pc), _, _ = log[-1]
            if pos[0] < pe:
                _flag(report, "log", r, f"{r.who} epoch went back from {pe} to {pos[0]}")
            elif pos[0] == pe and pos[1] != pc + 1:
                _flag(report, "log", r, f"{r.who} gap: {pe}.{pc} then {pos[0]}.{pos[1]}")
            elif pos[0] > pe and pos[1] != 1:
                _flag(report, "log", r, f"{r.who} entered epoch {pos[0]} at counter {pos[1]}")
        elif pos[1] != 1:
            _flag(report, "log", r, f"{r.who} log starts at {pos[0]}.{pos[1]}")
        log.append((pos, req, r))
    # moving to a new epoch must not skip entries of the old one that others hold
    last_of_epoch: dict[int, int] = defaultdict(int)
    for (e, c) in owner:
        last_of_epoch[e] = max(last_of_epoch[e], c)
    for server, log in logs.items():
        for (a, _, _), (b, _, rec) in zip(log, log[1:]):
            if b[0] > a[0] and a[1] < last_of_epoch[a[0]]:
                _flag(report, "log", rec, f"{server} left epoch {a[0]} at counter {a[1]} "
                                          f"but {a[0]}.{last_of_epoch[a[0]]} was committed")


def _fault_times(records) -> list[int]:
    return [r.at for r in records if r.event in ("crash", "recover")]


def _check_single_primary(records, region, report):
    window = region.timeout_ms + region.heartbeat_ms
    primaries = {region.primary}
    down: set[str] = set()
    last_fault = None
    flagged = False
    for r in records:
        if r.event == "crash":
            down.add(r.who)
            last_fault = r.at
        elif r.event == "recover":
            down.discard(r.who)
            last_fault = r.at
        elif r.event == "promote":
            primaries.add(r.who)
        elif r.event == "demote":
            primaries.discard(r.who)
        live = sorted(primaries - down)
        settled = last_fault is None or r.at > last_fault + window
        if len(live) > 1 and settled:
            if not flagged:
                _flag(report, "single_primary", r, f"live primaries {live} at t={r.at}")
            flagged = True
        else:
            flagged = False


def _check_promotion(records, region, report):
    """A promoted server is the best-ranked sync-level server that was ready."""
    members = region.order + [region.primary]
    mode = {s: Mode.READ_WRITE.value for s in region.roles}
    for r in records:
        if r.event == "crash":
            mode[r.who] = Mode.DOWN.value
        elif r.event == "mode":
            mode[r.who] = r["value"]
        elif r.event == "promote":
            replaced = r.get("replaced")
            ready = [s for s in members
                     if s != replaced and (mode.get(s) == Mode.READ_WRITE.value or s == r.who)]
            if not ready or ready[0] != r.who:
                _flag(report, "promotion", r,
                      f"{r.who} promoted but {ready[0] if ready else 'nobody'} ranks first")


def _check_message_count(records, region, report):
    if _fault_times(records):
        report.skipped["message_count"] = "trace has faults"
        return
    entries: dict[str, str] = {}
    issues: dict[str, int] = defaultdict(int)
    counts: dict[str, int] = defaultdict(int)
    first: dict[str, TraceRecord] = {}
    for r in records:
        if r.event == "issue" and r.get("op") == "write":
            issues[r["req"]] += 1
            entries.setdefault(r["req"], r["to"])
            first.setdefault(r["req"], r)
        elif r.event == "send" and r.who in region.roles and "req" in r \
                and r.kind != "Heartbeat":
            counts[r["req"]] += 1
            first.setdefault(r["req"], r)
    for rid, entry in entries.items():
        if issues[rid] != 1:
            continue
        want = region.expected_messages(entry)
        if counts[rid] != want:
            _flag(report, "message_count", first[rid],
                  f"{rid} entered at {entry} produced {counts[rid]} messages, expected {want}")


def _check_read_your_writes(records, region, report):
    acked: dict[tuple[str, str], tuple[int, int]] = {}
    for r in records:
        if r.event != "send":
            continue
        if r.kind == "ClientWriteAck":
            pos = _position(r)
            key = (r.who, r["key"])
            if pos and pos > acked.get(key, (-1, -1)):
                acked[key] = pos
        elif r.kind == "ClientReadReply":
            need = acked.get((r.who, r["key"]))
            ver = parse_position(r.get("ver"))
            if need is not None and (ver is None or ver < need):
                _flag(report, "read_your_writes", r,
                      f"{r.who} served {r['key']!r} at version {r.get('ver')} after acking "
                      f"{need[0]}.{need[1]}")


def _check_containment(records, region, report):
    """A read-only semi answers writes with a redirect and never forwards them."""
    mode = {s: Mode.READ_WRITE.value for s in region.roles}
    open_write: dict[str, TraceRecord] = {}
    for r in records:
        if r.event == "crash":
            mode[r.who] = Mode.DOWN.value
        elif r.event == "mode":
            mode[r.who] = r["value"]
        elif r.event == "recv" and r.kind == "ClientWrite":
            if region.roles.get(r.who) is Role.SEMI and mode[r.who] == Mode.READ_ONLY.value:
                open_write[r.who] = r
            else:
                open_write.pop(r.who, None)
        elif r.event == "send" and r.who in open_write:
            w = open_write[r.who]
            if r.at != w.at or r.get("req") != w["req"]:
                continue
            if r.kind == "ForwardWrite":
                _flag(report, "containment", r, f"read-only {r.who} forwarded {w['req']}")
            if r.kind in ("RedirectError", "ForwardWrite", "ClientWriteAck"):
                open_write.pop(r.who)
