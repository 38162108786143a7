"""Simulated clients: routing, retries by request id and redirect handling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..engine import Recovery
from ..failover import FailoverEvent, Situation, handle_semi_failure, handle_sync_failure
from ..netsim import ClientIntent
from ..protocol import Kind, Message, ReadRequest, WriteRequest
from ..topology import RegionTopology, Role
from .scenario import ClientOp


@dataclass
class RequestState:
    op: ClientOp
    request: WriteRequest | ReadRequest
    issued_at: int
    attempts: int = 0
    redirects: int = 0
    target: str = ""
    done: bool = False
    outcome: str = "pending"
    completed_at: int | None = None
    acked_by: str | None = None
    position: tuple[int, int] | None = None
    plsn: str | None = None
    value: str | None = None
    duplicate_acks: int = 0
    targets: list[str] = field(default_factory=list)

    @property
    def latency(self) -> int | None:
        if self.completed_at is None:
            return None
        return self.completed_at - self.issued_at


class ClientPool:
    """Every client of a scenario. Routing follows failover events.

    ``routes`` maps an unavailable server to its stand-in; lookups follow
    the chain, so a semi whose parent is also down ends at the primary.
    """

    def __init__(self, topology: RegionTopology, timeout_ms: int = 1000,
                 max_attempts: int = 5, follow_redirects: bool = True):
        self.topology = topology
        self.timeout_ms = timeout_ms
        self.max_attempts = max_attempts
        self.follow_redirects = follow_redirects
        self.routes: dict[str, str] = {}
        self.requests: dict[str, RequestState] = {}

    def route(self, server: str) -> str:
        seen = {server}
        while server in self.routes and self.routes[server] not in seen:
            server = self.routes[server]
            seen.add(server)
        return server

    def _intent(self, st: RequestState, target: str, reason: str) -> list[ClientIntent]:
        st.attempts += 1
        st.target = target
        if st.request.entry_server != target:
            st.request = replace(st.request, entry_server=target)
        st.targets.append(target)
        return [ClientIntent(st.request, target, st.attempts, reason)]

    def on_issue(self, op: ClientOp, now: int) -> list[ClientIntent]:
        target = self.route(op.server)
        if op.op == "write":
            req = WriteRequest(op.request_id, op.client, op.key, op.value, target)
        else:
            req = ReadRequest(op.request_id, op.client, op.key, target)
        st = RequestState(op, req, now)
        self.requests[op.request_id] = st
        return self._intent(st, target, "new" if target == op.server else "rerouted")

    def on_reply(self, msg: Message, now: int) -> list[ClientIntent]:
        st = self.requests.get(msg.request_id)
        if st is None:
            return []
        if st.done:
            if msg.kind is Kind.CLIENT_WRITE_ACK:
                st.duplicate_acks += 1
            return []
        if msg.kind is Kind.CLIENT_WRITE_ACK:
            st.done, st.outcome, st.completed_at = True, "acked", now
            st.acked_by = msg.src
            st.position = msg.record.position
            st.plsn = str(msg.record.primary_lsn)
            return []
        if msg.kind is Kind.CLIENT_READ_REPLY:
            st.done, st.outcome, st.completed_at = True, "read", now
            st.acked_by = msg.src
            st.value = msg.payload.get("value")
            st.position = msg.payload.get("ver")
            return []
        if msg.kind is Kind.REDIRECT_ERROR:
            st.redirects += 1
            primary = msg.payload.get("primary")
            if self.follow_redirects and primary and primary != msg.src \
                    and st.attempts < self.max_attempts:
                return self._intent(st, primary, "redirect")
        return []

    def on_timeout(self, rid: str, attempt: int, now: int) -> list[ClientIntent]:
        st = self.requests.get(rid)
        if st is None or st.done or attempt != st.attempts:
            return []
        if st.attempts >= self.max_attempts:
            st.done, st.outcome = True, "failed"
            return []
        target = self.route(st.op.server)
        if target == st.target:
            # the unresponsive server may have nobody left to report it; go up a level
            parent = self.topology.parent_of(target)
            target = self.route(parent) if parent else target
        return self._intent(st, target, "timeout")

    def is_done(self, rid: str | None) -> bool:
        st = self.requests.get(rid)
        return st is not None and st.done

    def on_failover(self, event: FailoverEvent | Recovery) -> None:
        if isinstance(event, Recovery):
            self.routes.pop(event.peer, None)
            return
        if event.situation is Situation.A:
            self.routes.update(handle_semi_failure(self.topology, event.peer).reroute)
        elif event.situation is Situation.B:
            if self.topology.role_of(event.peer) is Role.SYNC:
                plan = handle_sync_failure(self.topology, event.peer, event.detector)
                self.routes.update(plan.routing.reroute)
            else:
                self.routes[event.peer] = event.detector
        else:
            self.routes[event.peer] = event.detector
            self.routes.pop(event.detector, None)

    def writes(self) -> list[RequestState]:
        return [st for st in self.requests.values() if st.op.op == "write"]

    def reads(self) -> list[RequestState]:
        return [st for st in self.requests.values() if st.op.op == "read"]
