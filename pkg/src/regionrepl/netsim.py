"""Deterministic discrete-event simulation of the region.

Events are processed in ascending ``(at, seq)`` order; ``seq`` is the
insertion counter, so ties resolve in scheduling order. Links are reliable
and FIFO per directed pair with a fixed latency plus optional seeded jitter.
Time is integer milliseconds.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .engine import Mode, Replica
from .protocol import Kind, Message, ReadRequest, WriteRequest
from .topology import RegionTopology, Role


class SchedulingError(ValueError):
    pass


class EventKind(Enum):
    DELIVER = "Deliver"
    TIMER = "Timer"
    CRASH = "Crash"
    RECOVER = "Recover"
    CLIENT_OP = "ClientOp"
    CLIENT_TIMEOUT = "ClientTimeout"


@dataclass(frozen=True)
class SimEvent:
    at: int
    seq: int
    kind: EventKind
    target: str
    message: Message | None = None
    mid: int | None = None
    op: Any = None

    @property
    def background(self) -> bool:
        return self.kind is EventKind.TIMER or (
            self.kind is EventKind.DELIVER and self.message.kind is Kind.HEARTBEAT)


class EventQueue:
    def __init__(self):
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._foreground = 0
        self.now = 0

    def __len__(self):
        return len(self._heap) - len(self._cancelled)

    def schedule(self, at: int, kind: EventKind, target: str, **kw) -> SimEvent:
        if at < self.now:
            raise SchedulingError(f"cannot schedule {kind.value} at {at} < now {self.now}")
        event = SimEvent(at, self._seq, kind, target, **kw)
        self._seq += 1
        heapq.heappush(self._heap, (event.at, event.seq, event))
        if not event.background:
            self._foreground += 1
        return event

    def cancel(self, event: SimEvent) -> None:
        if event.seq not in self._cancelled:
            self._cancelled.add(event.seq)
            if not event.background:
                self._foreground -= 1

    def _skip_cancelled(self) -> None:
        while self._heap and self._heap[0][1] in self._cancelled:
            _, seq, _ = heapq.heappop(self._heap)
            self._cancelled.discard(seq)

    def peek(self) -> SimEvent | None:
        self._skip_cancelled()
        return self._heap[0][2] if self._heap else None

    def pop(self) -> SimEvent | None:
        self._skip_cancelled()
        if not self._heap:
            return None
        _, _, event = heapq.heappop(self._heap)
        self.now = event.at
        if not event.background:
            self._foreground -= 1
        return event

    def has_foreground(self) -> bool:
        return self._foreground > 0


class LinkModel:
    def __init__(self, topology: RegionTopology, jitter_ms: int = 0, seed: int = 0):
        self.topology = topology
        self.jitter_ms = jitter_ms
        self.rng = random.Random(seed)
        self.up: dict[tuple[str, str], bool] = {}
        self._last_arrival: dict[tuple[str, str], int] = {}

    def latency(self, src: str, dst: str) -> int:
        return self.topology.latency(src, dst)

    def is_up(self, src: str, dst: str) -> bool:
        return self.up.get((src, dst), True)

    def set_link(self, src: str, dst: str, up: bool) -> None:
        self.up[(src, dst)] = up

    def arrival(self, src: str, dst: str, now: int) -> int:
        delay = self.latency(src, dst)
        if self.jitter_ms:
            delay += self.rng.randint(0, self.jitter_ms)
        # jitter never reorders a directed pair
        at = max(now + delay, self._last_arrival.get((src, dst), 0))
        self._last_arrival[(src, dst)] = at
        return at


@dataclass(frozen=True)
class ClientIntent:
    """A client putting a request on the wire towards ``target``."""
    request: WriteRequest | ReadRequest
    target: str
    attempt: int
    reason: str


@dataclass
class RunResult:
    reason: str
    end_time: int
    steps: int

    @property
    def timed_out(self) -> bool:
        return self.reason != "quiescent"


Observer = Callable[[int, str, str, dict, bool], None]


def _ignore(*_args) -> None:
    pass


@dataclass
class World:
    topology: RegionTopology
    heartbeat_ms: int = 50
    session_timeout_ms: int = 200
    jitter_ms: int = 0
    seed: int = 0
    clients: Any = None
    observer: Observer = _ignore
    replicas: dict[str, Replica] = field(init=False)
    links: LinkModel = field(init=False)
    queue: EventQueue = field(init=False)

    def __post_init__(self):
        self.replicas = {s: Replica(s, self.topology, self.heartbeat_ms, self.session_timeout_ms)
                         for s in self.topology.servers}
        self.links = LinkModel(self.topology, self.jitter_ms, self.seed)
        self.queue = EventQueue()
        self.next_mid = 0
        self.steps = 0
        self.messages_by_request: dict[str, int] = {}
        self.deliveries_by_request: dict[str, int] = {}
        self.failovers: list = []
        self.availability: list[tuple[int, str, bool]] = []
        self._accepting: dict[str, bool] = {}
        self._timeouts: dict[str, SimEvent] = {}
        self._started = False

    @property
    def now(self) -> int:
        return self.queue.now

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for s in self.topology.servers:
            self.queue.schedule(0, EventKind.TIMER, s)
            self._track_availability(s)

    def schedule_fault(self, at: int, action: str, server: str) -> SimEvent:
        kind = {"crash": EventKind.CRASH, "recover": EventKind.RECOVER}[action]
        if server not in self.replicas:
            raise KeyError(server)
        return self.queue.schedule(at, kind, server)

    def schedule_op(self, at: int, op: Any) -> SimEvent:
        return self.queue.schedule(at, EventKind.CLIENT_OP, op.client, op=op)

    # -- sending ----------------------------------------------------------

    def send(self, msg: Message) -> SimEvent | None:
        now = self.now
        mid = self.next_mid
        self.next_mid += 1
        background = msg.kind is Kind.HEARTBEAT
        rid = msg.request_id
        if rid is not None and msg.src in self.replicas and not background:
            self.messages_by_request[rid] = self.messages_by_request.get(rid, 0) + 1
        if not self.links.is_up(msg.src, msg.dst):
            self.observer(now, msg.src, "drop", {"message": msg, "mid": mid, "reason": "link"},
                          background)
            return None
        at = self.links.arrival(msg.src, msg.dst, now)
        self.observer(now, msg.src, "send", {"message": msg, "mid": mid}, background)
        return self.queue.schedule(at, EventKind.DELIVER, msg.dst, message=msg, mid=mid)

    def _send_client(self, intent: ClientIntent) -> None:
        req = intent.request
        kind = Kind.CLIENT_WRITE if isinstance(req, WriteRequest) else Kind.CLIENT_READ
        self.observer(self.now, req.client, "issue",
                      {"request": req, "to": intent.target, "attempt": intent.attempt,
                       "reason": intent.reason}, False)
        self.send(Message(kind, req.client, intent.target, payload={"request": req,
                                                                     "req": req.request_id}))
        previous = self._timeouts.pop(req.request_id, None)
        if previous is not None:
            self.queue.cancel(previous)
        self._timeouts[req.request_id] = self.queue.schedule(
            self.now + self.clients.timeout_ms, EventKind.CLIENT_TIMEOUT, req.client,
            op=(req.request_id, intent.attempt))

    # -- stepping ---------------------------------------------------------

    def step(self) -> SimEvent | None:
        """Process the next event; None when the queue is empty."""
        self.start()
        ev = self.queue.pop()
        if ev is None:
            return None
        self.steps += 1
        now = ev.at
        out: list[Message] = []
        intents: list[ClientIntent] = []
        touched: Replica | None = None

        if ev.kind is EventKind.TIMER:
            touched = self.replicas[ev.target]
            if touched.live:
                self.observer(now, ev.target, "tick", {}, True)
                out = touched.on_heartbeat_tick(now)
            self.queue.schedule(now + self.heartbeat_ms, EventKind.TIMER, ev.target)
        elif ev.kind is EventKind.DELIVER:
            msg = ev.message
            if msg.dst in self.replicas:
                touched = self.replicas[msg.dst]
                out = self._deliver_to_server(touched, msg, ev.mid, now)
            else:
                self.observer(now, msg.dst, "recv", {"message": msg, "mid": ev.mid}, False)
                if msg.src in self.replicas and msg.kind is not Kind.HEARTBEAT:
                    self._count_delivery(msg)
                intents = self.clients.on_reply(msg, now)
                rid = msg.request_id
                if self.clients.is_done(rid) and rid in self._timeouts:
                    self.queue.cancel(self._timeouts.pop(rid))
        elif ev.kind is EventKind.CRASH:
            touched = self.replicas[ev.target]
            self.observer(now, ev.target, "crash", {}, False)
            touched.crash()
        elif ev.kind is EventKind.RECOVER:
            touched = self.replicas[ev.target]
            self.observer(now, ev.target, "recover", {}, False)
            out = touched.recover(now) if not touched.live else []
        elif ev.kind is EventKind.CLIENT_OP:
            intents = self.clients.on_issue(ev.op, now)
        elif ev.kind is EventKind.CLIENT_TIMEOUT:
            rid, attempt = ev.op
            self._timeouts.pop(rid, None)
            intents = self.clients.on_timeout(rid, attempt, now)
            if intents:
                self.observer(now, ev.target, "timeout", {"req": rid, "attempt": attempt}, False)

        if touched is not None:
            notes, events = touched.drain()
            for note in notes:
                self.observer(now, touched.id, note.event, dict(note.fields), False)
            for event in events:
                self.failovers.append(event)
                self.clients.on_failover(event)
            self._track_availability(touched.id)
        for msg in out:
            self.send(msg)
        for intent in intents:
            self._send_client(intent)
        return ev

    def _deliver_to_server(self, replica: Replica, msg: Message, mid: int, now: int) -> list[Message]:
        background = msg.kind is Kind.HEARTBEAT
        if not replica.live:
            self.observer(now, replica.id, "drop", {"message": msg, "mid": mid, "reason": "down"},
                          background)
            return []
        self.observer(now, replica.id, "recv", {"message": msg, "mid": mid}, background)
        if msg.src in self.replicas and not background:
            self._count_delivery(msg)
        if msg.kind is Kind.CLIENT_WRITE:
            return replica.on_client_write(msg.payload["request"], now)
        if msg.kind is Kind.CLIENT_READ:
            reply = replica.on_client_read(msg.payload["request"], now)
            return [reply] if reply is not None else []
        return replica.receive(msg, now)

    def _count_delivery(self, msg: Message) -> None:
        rid = msg.request_id
        if rid is not None:
            self.deliveries_by_request[rid] = self.deliveries_by_request.get(rid, 0) + 1

    def _track_availability(self, server: str) -> None:
        accepting = self.replicas[server].accepts_writes
        if self._accepting.get(server) != accepting:
            self._accepting[server] = accepting
            self.availability.append((self.now, server, accepting))

    # -- running ----------------------------------------------------------

    def settled(self) -> bool:
        """No failure detector, catch-up or orphan bookkeeping is still in motion."""
        for r in self.replicas.values():
            if not r.live:
                continue
            if r.catching_up or r.awaiting_direct:
                return False
            for p in r.monitored():
                if self.reaches(p, r.id) == (p in r.detector.suspected):
                    return False
            if any(self.reaches(p, r.id) for p in r.detector.reported):
                return False
            for o in r.orphans:
                parent = self.replicas[self.topology.parent_of(o)]
                if self.reaches(parent.id, r.id) and parent.mode is Mode.READ_WRITE:
                    return False
        return True

    def reaches(self, src: str, dst: str) -> bool:
        return self.replicas[src].live and self.links.is_up(src, dst)

    def quiescent(self) -> bool:
        return not self.queue.has_foreground() and self.settled()

    def run_until_quiescent(self, max_time: int) -> RunResult:
        self.start()
        while True:
            if self.quiescent():
                return RunResult("quiescent", self.now, self.steps)
            nxt = self.queue.peek()
            if nxt is None:
                return RunResult("quiescent", self.now, self.steps)
            if nxt.at > max_time:
                return RunResult("max_time", self.now, self.steps)
            self.step()

    def live_replicas(self) -> list[Replica]:
        return [r for r in self.replicas.values() if r.live]

    def primaries(self) -> list[str]:
        return sorted(r.id for r in self.live_replicas() if r.role is Role.PRIMARY)
