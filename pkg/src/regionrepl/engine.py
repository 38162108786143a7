"""Per-server replication state machine.

A :class:`Replica` is driven by the simulator one input at a time. Every
handler takes the input and the current simulated time and returns the
messages to send; side notes for the trace (applies, suspicions, promotions)
accumulate in ``notes`` and routing-relevant failover events in ``events``.
Handlers never block and never read the wall clock.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .failover import (
    FailoverEvent,
    FailureDetector,
    Situation,
    catch_up_entries,
    classify,
    handle_sync_failure,
    is_sync_level,
    next_primary,
    sync_level_members,
)
from .protocol import (
    ORIGIN,
    Kind,
    Lsn,
    Message,
    Position,
    ProtocolError,
    ReadRequest,
    Status,
    StatusEvent,
    TransactionRecord,
    WriteRequest,
    determine_status,
)
from .topology import RegionTopology, Role


class Mode(Enum):
    READ_WRITE = "ReadWrite"
    READ_ONLY = "ReadOnly"
    DOWN = "Down"


@dataclass(frozen=True)
class LogEntry:
    epoch: int
    counter: int
    request: WriteRequest

    @property
    def position(self) -> Position:
        return (self.epoch, self.counter)


@dataclass(frozen=True)
class Note:
    event: str
    fields: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Recovery:
    """A peer that triggered a failover event is healthy again."""
    detector: str
    peer: str
    at: int


_RECORD_IN = {
    Kind.FORWARD_WRITE,
    Kind.COMMIT_BROADCAST,
    Kind.COMMIT_TO_SEMI,
    Kind.ACK_TO_PRIMARY,
    Kind.ACK_TO_SYNC_PARENT,
}


class Replica:
    def __init__(self, server_id: str, topology: RegionTopology,
                 heartbeat_ms: int = 50, session_timeout_ms: int = 200):
        self.id = server_id
        self.topology = topology
        self.role = topology.role_of(server_id)
        self.parent = topology.parent_of(server_id)
        self.mode = Mode.READ_WRITE
        self.epoch = 0
        self.primary_id = topology.primary
        self.next_primary_counter = 1
        self.next_secondary_counter = 1

        self.applied_log: list[LogEntry] = []
        self.committed: dict[Position, TransactionRecord] = {}
        self.applied_requests: dict[str, Position] = {}
        self.store: dict[str, str] = {}
        self.versions: dict[str, Position] = {}

        self.pending: dict[str, TransactionRecord] = {}
        self.origin_wait: dict[str, str] = {}
        self.commit_buffer: dict[Position, TransactionRecord] = {}
        self.ack_wait: dict[Position, set[str]] = {}
        self.finished: set[Position] = set()
        self.branch_origin: dict[str, str] = {}
        self.semi_acks: Counter = Counter()
        self.orphans: set[str] = set()

        self.catching_up = False
        self.awaiting_direct = False
        self.catch_up_sent_at: int | None = None
        self.catch_up_to: str | None = None
        self.unanswered: set[str] = set()
        self.peer_status: dict[str, dict] = {}
        self.reads_served = 0

        self.detector = FailureDetector(heartbeat_ms, session_timeout_ms)
        self.detector.watch(self.monitored(), 0)
        self.notes: list[Note] = []
        self.events: list[FailoverEvent | Recovery] = []

    def __repr__(self):
        return f"Replica({self.id}, {self.role.value}, {self.mode.value}, epoch={self.epoch})"

    # -- views -------------------------------------------------------------

    @property
    def last_position(self) -> Position:
        return self.applied_log[-1].position if self.applied_log else ORIGIN

    @property
    def live(self) -> bool:
        return self.mode is not Mode.DOWN

    @property
    def accepts_writes(self) -> bool:
        return self.mode is Mode.READ_WRITE

    def monitored(self) -> list[str]:
        if self.role is Role.SEMI:
            # an orphan also watches the primary that serves it directly
            if self.parent in self.detector.suspected and self.primary_id != self.parent:
                return [self.parent, self.primary_id]
            return [self.parent]
        peers = [s for s in sync_level_members(self.topology) if s != self.id]
        return peers + list(self.topology.children_of(self.id))

    def _broadcast_targets(self) -> list[str]:
        suspected = self.detector.suspected
        return [s for s in sync_level_members(self.topology)
                if s != self.id and s not in suspected]

    def _direct_semis(self) -> list[str]:
        own = [c for c in self.topology.children_of(self.id) if c not in self.detector.suspected]
        return sorted(set(own) | self.orphans)

    def _live_children(self) -> list[str]:
        return [c for c in self.topology.children_of(self.id) if c not in self.detector.suspected]

    def _upstream(self) -> str:
        return self.parent if self.role is Role.SEMI else self.primary_id

    def _applied_status(self) -> Status:
        if self.role is Role.PRIMARY:
            return determine_status(Role.PRIMARY, StatusEvent.WRITE_APPLIED)
        return determine_status(self.role, StatusEvent.COMMIT_APPLIED)

    def _note(self, event: str, **fields) -> None:
        self.notes.append(Note(event, fields))

    def drain(self) -> tuple[list[Note], list]:
        notes, events = self.notes, self.events
        self.notes, self.events = [], []
        return notes, events

    # -- client entry points -----------------------------------------------

    def on_client_write(self, req: WriteRequest, now: int) -> list[Message]:
        if self.mode is Mode.DOWN:
            return []
        rid = req.request_id
        if rid in self.applied_requests:
            self._note("dedup", req=rid)
            self.origin_wait[rid] = req.client
            return self._origin_ack(self.committed[self.applied_requests[rid]])
        if self.mode is Mode.READ_ONLY:
            # the client is sent elsewhere; this server gives up ownership
            self.pending.pop(rid, None)
            self.origin_wait.pop(rid, None)
            return [Message(Kind.REDIRECT_ERROR, self.id, req.client,
                            payload={"req": rid, "primary": self.primary_id})]
        self.origin_wait[rid] = req.client
        if self.role is Role.PRIMARY:
            self.pending.pop(rid, None)
            return self._commit(TransactionRecord(req))

        rec = self.pending.get(rid)
        if rec is None:
            lsn = Lsn("S", self.id, self.epoch, self.next_secondary_counter)
            self.next_secondary_counter += 1
            event = (StatusEvent.CLIENT_WRITE_ACCEPTED if self.role is Role.SEMI
                     else StatusEvent.FORWARD_RECEIVED)
            rec = TransactionRecord(req, secondary_lsn=lsn,
                                    status=determine_status(self.role, event))
            self.pending[rid] = rec
        else:
            self._note("reforward", req=rid)
        return [Message(Kind.FORWARD_WRITE, self.id, self._upstream(), rec)]

    def on_client_read(self, req: ReadRequest, now: int) -> Message | None:
        if self.mode is Mode.DOWN:
            return None
        self.reads_served += 1
        value = self.store.get(req.key)
        return Message(Kind.CLIENT_READ_REPLY, self.id, req.client, payload={
            "req": req.request_id,
            "key": req.key,
            "value": value,
            "found": value is not None,
            "ver": self.versions.get(req.key),
        })

    # -- replica-to-replica traffic ------------------------------------------

    def receive(self, msg: Message, now: int) -> list[Message]:
        if self.mode is Mode.DOWN:
            return []
        if msg.src in self.topology and self.detector.heard(msg.src, now):
            self._note("alive", peer=msg.src)
        if msg.kind in _RECORD_IN and msg.record is None:
            raise ProtocolError(f"{msg.kind.value} without a record")
        handler = {
            Kind.FORWARD_WRITE: self.on_forward_write,
            Kind.COMMIT_BROADCAST: self.on_primary_commit,
            Kind.COMMIT_TO_SEMI: self.on_primary_commit,
            Kind.ACK_TO_PRIMARY: self.on_sync_ack,
            Kind.ACK_TO_SYNC_PARENT: self.on_semi_ack,
            Kind.HEARTBEAT: self.on_heartbeat,
            Kind.CATCH_UP_REQUEST: self.on_catch_up_request,
            Kind.CATCH_UP_TRANSFER: self.on_catch_up_transfer,
        }.get(msg.kind)
        if handler is None:
            raise ProtocolError(f"{self.id} cannot handle {msg.kind.value}")
        return handler(msg, now)

    def on_forward_write(self, msg: Message, now: int) -> list[Message]:
        rec = msg.record
        rid = rec.request_id
        if rec.status not in (Status.PENDING_SEMI_SYNC, Status.PENDING_SYNC):
            raise ProtocolError(f"forward of {rid} with status {rec.status}")
        if self.role is Role.SYNC:
            self.branch_origin[rid] = msg.src
            fwd = rec.with_status(determine_status(Role.SYNC, StatusEvent.FORWARD_RECEIVED))
            return [Message(Kind.FORWARD_WRITE, self.id, self.primary_id, fwd)]
        if self.role is Role.PRIMARY:
            if rid in self.applied_requests:
                self._note("dedup", req=rid)
                prior = self.committed[self.applied_requests[rid]]
                kind = (Kind.COMMIT_BROADCAST if is_sync_level(self.topology, msg.src)
                        else Kind.COMMIT_TO_SEMI)
                return [Message(kind, self.id, msg.src, prior.with_status(Status.PRIMARY_COMMIT))]
            return self._commit(rec)
        raise ProtocolError(f"semi {self.id} received a forwarded write")

    def _commit(self, rec: TransactionRecord) -> list[Message]:
        pos = (self.epoch, self.next_primary_counter)
        self.next_primary_counter += 1
        rec = replace(
            rec,
            primary_lsn=Lsn("P", self.id, *pos),
            status=determine_status(Role.PRIMARY, StatusEvent.WRITE_APPLIED),
            prev=self.last_position,
        )
        self._append(rec, "commit")
        targets = self._broadcast_targets()
        out = [Message(Kind.COMMIT_BROADCAST, self.id, t, rec) for t in targets]
        out += [Message(Kind.COMMIT_TO_SEMI, self.id, s, rec) for s in self._direct_semis()]
        if rec.request_id in self.origin_wait:
            self.pending[rec.request_id] = rec
        if targets:
            self.ack_wait[pos] = set(targets)
        else:
            out += self._finish(pos)
        return out

    def on_primary_commit(self, msg: Message, now: int) -> list[Message]:
        rec = msg.record
        if rec.primary_lsn is None or rec.status not in (Status.PRIMARY_COMMIT, Status.ACK_SYNC):
            raise ProtocolError(f"commit of {rec.request_id} with status {rec.status}")
        epoch = rec.primary_lsn.epoch
        if self.role is Role.PRIMARY:
            if epoch <= self.epoch:
                self._note("warn", reason="commit-at-primary", req=rec.request_id)
                return []
            self._demote(rec.primary_lsn.server, epoch)
        elif epoch > self.epoch:
            self._follow(rec.primary_lsn.server, epoch)

        applied = self.apply_write(rec)
        if not applied:
            rid = rec.request_id
            if rid in self.applied_requests and rid in self.origin_wait:
                return self._origin_ack(self.committed[self.applied_requests[rid]])
            if rec.position in self.commit_buffer and not self.catching_up:
                return self._catch_up_request(now, target=msg.src)
            return []
        out = []
        for r in applied:
            if self.role is Role.SYNC:
                out += [Message(Kind.COMMIT_TO_SEMI, self.id, c, r) for c in self._live_children()]
                out.append(Message(Kind.ACK_TO_PRIMARY, self.id, r.primary_lsn.server, r))
            else:
                out.append(Message(Kind.ACK_TO_SYNC_PARENT, self.id, msg.src, r))
            out += self._origin_ack(r)
        return out

    def on_sync_ack(self, msg: Message, now: int) -> list[Message]:
        rec = msg.record
        if self.role is not Role.PRIMARY:
            self._note("warn", reason="ack-at-non-primary", req=rec.request_id)
            return []
        if not is_sync_level(self.topology, msg.src):
            raise ProtocolError(f"sync ack from non-sync server {msg.src}")
        pos = rec.position
        if pos not in self.committed or rec.primary_lsn.server != self.id:
            raise ProtocolError(f"ack for unknown primary LSN {rec.primary_lsn}")
        waiting = self.ack_wait.get(pos)
        if waiting is None or msg.src not in waiting:
            self._note("warn", reason="late-ack", req=rec.request_id, peer=msg.src)
            return []
        waiting.discard(msg.src)
        if not waiting:
            return self._finish(pos)
        return []

    def _finish(self, pos: Position) -> list[Message]:
        """All awaited synchronous acks are in: the primary's commit is final."""
        self.ack_wait.pop(pos, None)
        self.finished.add(pos)
        rec = self.committed[pos]
        self._note("finish", req=rec.request_id, plsn=str(rec.primary_lsn), epoch=pos[0])
        self.pending.pop(rec.request_id, None)
        return self._origin_ack(rec)

    def on_semi_ack(self, msg: Message, now: int) -> list[Message]:
        pos = msg.record.position
        if pos not in self.committed:
            self._note("warn", reason="unknown-semi-ack", req=msg.record.request_id)
            return []
        self.semi_acks[pos] += 1
        return []

    def branch_complete(self, pos: Position) -> bool:
        children = self.topology.children_of(self.id)
        return bool(children) and self.semi_acks[pos] >= len(children)

    def _origin_ack(self, rec: TransactionRecord) -> list[Message]:
        rid = rec.request_id
        if rid not in self.origin_wait:
            return []
        if self.role is Role.PRIMARY and rec.position not in self.finished \
                and rec.position in self.ack_wait:
            return []
        client = self.origin_wait.pop(rid)
        self.pending.pop(rid, None)
        return [Message(Kind.CLIENT_WRITE_ACK, self.id, client, rec)]

    # -- log ---------------------------------------------------------------

    def apply_write(self, rec: TransactionRecord, via: str = "commit") -> list[TransactionRecord]:
        """Apply ``rec`` if it extends the log; buffer it if there is a gap.

        Returns every record applied by this call in log order, including
        buffered successors that the new entry unblocked.
        """
        pos = rec.position
        if pos <= self.last_position or pos in self.committed:
            return []
        if rec.prev != self.last_position:
            if pos not in self.commit_buffer:
                self.commit_buffer[pos] = rec
                self._note("buffer", req=rec.request_id, epoch=pos[0], counter=pos[1])
            return []
        status = self._applied_status()
        applied = [self._append(rec.with_status(status), via)]
        while True:
            last = self.last_position
            nxt = next((r for r in self.commit_buffer.values() if r.prev == last), None)
            if nxt is None:
                break
            del self.commit_buffer[nxt.position]
            applied.append(self._append(nxt.with_status(status), via))
        last = self.last_position
        for p in [p for p in self.commit_buffer if p <= last]:
            del self.commit_buffer[p]
        return applied

    def _append(self, rec: TransactionRecord, via: str) -> TransactionRecord:
        pos = rec.position
        req = rec.request
        self.applied_log.append(LogEntry(pos[0], pos[1], req))
        self.committed[pos] = rec
        self.applied_requests[req.request_id] = pos
        self.store[req.key] = req.value
        self.versions[req.key] = pos
        if self.role is not Role.PRIMARY:
            self.pending.pop(req.request_id, None)
        self.branch_origin.pop(req.request_id, None)
        self._note("apply", epoch=pos[0], counter=pos[1], req=req.request_id, via=via)
        return rec

    # -- heartbeats, detection, failover --------------------------------------

    def on_heartbeat_tick(self, now: int) -> list[Message]:
        if self.mode is Mode.DOWN:
            return []
        _, out = self.detect_failures(now)
        if (self.catching_up or self.awaiting_direct) and (
                self.catch_up_sent_at is None
                or now - self.catch_up_sent_at >= self.detector.session_timeout_ms):
            if self.awaiting_direct and self.catch_up_to is not None:
                # silent for a whole session: try the next candidate instead
                self.unanswered.add(self.catch_up_to)
            out += self._catch_up_request(now)
        info = self.heartbeat_info()
        out += [Message(Kind.HEARTBEAT, self.id, p, payload=info) for p in self.heartbeat_targets()]
        return out

    def heartbeat_targets(self) -> list[str]:
        watched = self.monitored()
        return watched + sorted(self.orphans - set(watched))

    def heartbeat_info(self) -> dict:
        return {"role": self.role.value, "mode": self.mode.value,
                "epoch": self.epoch, "primary": self.primary_id}

    def detect_failures(self, now: int) -> tuple[list[FailoverEvent], list[Message]]:
        events: list[FailoverEvent] = []
        out: list[Message] = []
        for peer in self.detector.expired(self.monitored(), now):
            situation = classify(self.topology, self.id, self.role, self.primary_id, peer)
            self._note("suspect", peer=peer, situation=situation.value if situation else "-")
            if situation is Situation.A:
                events.append(self._raise(Situation.A, peer, now))
            elif situation is Situation.B and self.role is Role.PRIMARY:
                events.append(self._raise(Situation.B, peer, now))
                out += self._primary_lost_sync(peer)
            elif situation is Situation.B:
                out += self._orphaned(now)
            elif self.role is Role.SEMI and peer == self.primary_id:
                out += self._orphan_lost_primary(peer, now)
            elif situation is Situation.C:
                event, msgs = self._primary_lost(peer, now)
                if event is not None:
                    events.append(event)
                out += msgs
        return events, out

    def _raise(self, situation: Situation, peer: str, now: int) -> FailoverEvent:
        self.detector.reported.add(peer)
        event = FailoverEvent(situation, self.id, peer, now)
        self.events.append(event)
        return event

    def _primary_lost_sync(self, failed: str) -> list[Message]:
        if self.topology.role_of(failed) is Role.SYNC:
            plan = handle_sync_failure(self.topology, failed, self.id)
            self.orphans |= set(plan.direct_delivery)
        out = []
        for pos in sorted(self.ack_wait):
            waiting = self.ack_wait[pos]
            waiting.discard(failed)
            if not waiting:
                out += self._finish(pos)
        return out

    def _orphaned(self, now: int) -> list[Message]:
        plan = handle_sync_failure(self.topology, self.parent, self.primary_id)
        assert self.id in plan.read_only
        self.awaiting_direct = True
        self.detector.last_heard[self.primary_id] = now
        self._refresh_mode()
        return self._catch_up_request(now)

    def _orphan_lost_primary(self, failed: str, now: int) -> list[Message]:
        chosen = next_primary(sync_level_members(self.topology), failed,
                              self.detector.suspected | {self.parent})
        if chosen is None:
            self._note("outage", failed=failed)
            return []
        self.primary_id = chosen
        self.awaiting_direct = True
        self.detector.last_heard[chosen] = now
        self._note("repoint", primary=chosen, epoch=self.epoch)
        return self._catch_up_request(now)

    def _primary_lost(self, failed: str, now: int):
        not_ready = {s for s, info in self.peer_status.items()
                     if info.get("mode") != Mode.READ_WRITE.value and s != self.id}
        chosen = next_primary(sync_level_members(self.topology), failed,
                              self.detector.suspected | not_ready)
        if chosen is None:
            self._note("outage", failed=failed)
            return None, []
        if chosen != self.id:
            self.primary_id = chosen
            self._note("repoint", primary=chosen, epoch=self.epoch)
            return None, []
        self.role = Role.PRIMARY
        self.epoch += 1
        self.next_primary_counter = 1
        self.primary_id = self.id
        self.ack_wait.clear()
        self.orphans.clear()
        self._note("promote", epoch=self.epoch, replaced=failed)
        self._refresh_mode()
        return self._raise(Situation.C, failed, now), []

    def _follow(self, primary: str, epoch: int) -> None:
        self.epoch = epoch
        if primary != self.primary_id:
            self.primary_id = primary
            self._note("repoint", primary=primary, epoch=epoch)

    def _demote(self, primary: str, epoch: int) -> list[Message]:
        self.role = Role.SYNC
        self.ack_wait.clear()
        self.orphans.clear()
        self.epoch = epoch
        self.primary_id = primary
        self._note("demote", primary=primary, epoch=epoch)
        if not self.catching_up:
            self.catching_up = True
            self.catch_up_sent_at = None
        self._refresh_mode()
        return []

    def on_heartbeat(self, msg: Message, now: int) -> list[Message]:
        peer, info = msg.src, dict(msg.payload)
        self.peer_status[peer] = info
        out: list[Message] = []
        claims_primary = info["role"] == Role.PRIMARY.value
        if claims_primary and info["epoch"] > self.epoch:
            if self.role is Role.PRIMARY:
                self._demote(peer, info["epoch"])
                out += self._catch_up_request(now)
            else:
                self._follow(peer, info["epoch"])
                if self.catching_up:
                    out += self._catch_up_request(now)
        elif self.role is Role.PRIMARY and self.catching_up:
            # restarted primary: resume only if the region still names it
            if info["primary"] == self.id and info["epoch"] == self.epoch:
                self.catching_up = False
                self._note("resume", epoch=self.epoch)
            elif info["primary"] != self.id and info["epoch"] >= self.epoch:
                self._demote(info["primary"], info["epoch"])
                out += self._catch_up_request(now)
        elif self.role is Role.SEMI and peer == self.parent:
            if info["epoch"] >= self.epoch:
                self.epoch = info["epoch"]
                self.primary_id = info["primary"]
            if info["mode"] == Mode.READ_WRITE.value:
                self.awaiting_direct = False

        if self.role is Role.PRIMARY and info["role"] == Role.SYNC.value \
                and info["mode"] == Mode.READ_WRITE.value:
            self.orphans -= set(self.topology.children_of(peer))
        if peer in self.detector.reported and info["mode"] == Mode.READ_WRITE.value:
            self.detector.reported.discard(peer)
            self._note("restore", peer=peer)
            self.events.append(Recovery(self.id, peer, now))
        self._refresh_mode()
        return out

    def _refresh_mode(self) -> None:
        if self.mode is Mode.DOWN:
            return
        read_only = self.catching_up
        if self.role is Role.SEMI:
            parent_mode = self.peer_status.get(self.parent, {}).get("mode", Mode.READ_WRITE.value)
            read_only = (read_only or self.parent in self.detector.suspected
                         or parent_mode != Mode.READ_WRITE.value)
        mode = Mode.READ_ONLY if read_only else Mode.READ_WRITE
        if mode is not self.mode:
            self.mode = mode
            self._note("mode", value=mode.value)

    # -- crash, recovery, catch-up --------------------------------------------

    def crash(self) -> None:
        """Process death: the applied log and store survive, volatile state does not."""
        self.mode = Mode.DOWN
        self.pending.clear()
        self.origin_wait.clear()
        self.commit_buffer.clear()
        self.ack_wait.clear()
        self.branch_origin.clear()
        self.orphans.clear()
        self.peer_status.clear()
        self.catching_up = False
        self.awaiting_direct = False
        self.catch_up_sent_at = None

    def recover(self, now: int) -> list[Message]:
        self.mode = Mode.READ_ONLY
        self.catching_up = True
        self.detector.reset(self.monitored(), now)
        self._note("mode", value=self.mode.value)
        return self._catch_up_request(now)

    def _catch_up_target(self) -> str | None:
        if self.role is Role.SEMI:
            if not self.awaiting_direct and self.parent not in self.detector.suspected:
                return self.parent
            if self.primary_id != self.parent and self.primary_id not in self.unanswered:
                return self.primary_id
            skip = self.detector.suspected | self.unanswered
            chosen = next_primary(sync_level_members(self.topology), self.parent, skip)
            if chosen is None and self.unanswered:
                self.unanswered.clear()
                chosen = next_primary(sync_level_members(self.topology), self.parent,
                                      self.detector.suspected)
            return chosen
        if self.primary_id != self.id:
            return self.primary_id
        return None

    def _catch_up_request(self, now: int, target: str | None = None) -> list[Message]:
        target = target or self._catch_up_target()
        if target is None:
            return []
        self.catch_up_sent_at = now
        self.catch_up_to = target
        return [Message(Kind.CATCH_UP_REQUEST, self.id, target,
                        payload={"after": self.last_position})]

    def on_catch_up_request(self, msg: Message, now: int) -> list[Message]:
        if self.catching_up:
            self._note("warn", reason="catch-up-while-catching-up", peer=msg.src)
            return []
        src = msg.src
        after = tuple(msg.payload["after"])
        log = [self.committed[e.position] for e in self.applied_log]
        entries = tuple(catch_up_entries(log, after))
        out = []
        if self.role is Role.PRIMARY:
            if self.topology.role_of(src) is Role.SEMI and self.topology.parent_of(src) != self.id:
                self.orphans.add(src)
            elif is_sync_level(self.topology, src):
                # the transfer stands in for acks of everything up to here
                last = self.last_position
                for pos in sorted(self.ack_wait):
                    waiting = self.ack_wait[pos]
                    if pos <= last and src in waiting:
                        waiting.discard(src)
                        if not waiting:
                            out += self._finish(pos)
        out.append(Message(Kind.CATCH_UP_TRANSFER, self.id, src, payload={
            "entries": entries,
            "upto": self.last_position,
            "role": self.role.value,
            "epoch": self.epoch,
            "primary": self.primary_id,
        }))
        return out

    def on_catch_up_transfer(self, msg: Message, now: int) -> list[Message]:
        info = msg.payload
        out = []
        self.unanswered.clear()
        if info["epoch"] > self.epoch and self.role is not Role.PRIMARY:
            self._follow(info["primary"], info["epoch"])
        for rec in info["entries"]:
            for r in self.apply_write(rec, via="transfer"):
                out += self._origin_ack(r)
        upto = tuple(info["upto"])
        if self.last_position >= upto:
            if self.catching_up:
                self.catching_up = False
                self._note("caught_up", upto=f"{upto[0]}.{upto[1]}")
            if info["role"] == Role.PRIMARY.value and self.awaiting_direct:
                self.awaiting_direct = False
                self._note("direct", primary=msg.src)
        self._refresh_mode()
        return out

    # -- convergence helpers -------------------------------------------------

    def log_signature(self) -> list[tuple[int, int, str]]:
        return [(e.epoch, e.counter, e.request.request_id) for e in self.applied_log]
