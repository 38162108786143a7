"""Run a scenario to quiescence and collect its trace and metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..failover import FailoverEvent
from ..netsim import RunResult, World
from ..topology import failover_order
from .clients import ClientPool
from .scenario import Scenario
from .trace import TraceWriter, position_text


@dataclass
class RunOutcome:
    scenario: Scenario
    world: World
    clients: ClientPool
    result: RunResult
    trace: TraceWriter

    @property
    def trace_text(self) -> str:
        return self.trace.text

    @property
    def metrics(self) -> dict:
        return collect_metrics(self)

    def metrics_json(self) -> str:
        return json.dumps(self.metrics, indent=2, sort_keys=True) + "\n"


def build_world(scenario: Scenario, seed: int | None = None,
                trace_heartbeats: bool = False) -> tuple[World, ClientPool, TraceWriter]:
    seed = scenario.seed if seed is None else seed
    topology = scenario.topology()
    clients = ClientPool(topology, scenario.client_timeout_ms, scenario.max_attempts,
                         scenario.follow_redirects)
    writer = TraceWriter(trace_heartbeats)
    writer.header(name=scenario.name, primary=topology.primary, branches=scenario.branches,
                  semis=scenario.semis_per_branch, heartbeat_ms=scenario.heartbeat_ms,
                  session_timeout_ms=scenario.session_timeout_ms,
                  client_timeout_ms=scenario.client_timeout_ms, jitter_ms=scenario.jitter_ms,
                  seed=seed, order=",".join(failover_order(topology)))
    world = World(topology, scenario.heartbeat_ms, scenario.session_timeout_ms,
                  scenario.jitter_ms, seed, clients, writer)
    for op in scenario.ops:
        world.schedule_op(op.at, op)
    for f in scenario.faults:
        world.schedule_fault(f.at, f.action, f.server)
    return world, clients, writer


def run_scenario(scenario: Scenario, seed: int | None = None,
                 trace_heartbeats: bool = False, max_time_ms: int | None = None) -> RunOutcome:
    world, clients, writer = build_world(scenario, seed, trace_heartbeats)
    limit = scenario.max_time_ms if max_time_ms is None else max_time_ms
    result = world.run_until_quiescent(limit)
    return RunOutcome(scenario, world, clients, result, writer)


def collect_metrics(outcome: RunOutcome) -> dict:
    world, clients, result = outcome.world, outcome.clients, outcome.result
    writes = {}
    for st in clients.writes():
        rid = st.request.request_id
        writes[rid] = {
            "client": st.op.client,
            "entry": st.op.server,
            "issued_at": st.issued_at,
            "outcome": st.outcome,
            "latency_ms": st.latency,
            "attempts": st.attempts,
            "redirects": st.redirects,
            "acked_by": st.acked_by,
            "plsn": st.plsn,
            "position": position_text(st.position) if st.position else None,
            "messages": world.messages_by_request.get(rid, 0),
            "deliveries": world.deliveries_by_request.get(rid, 0),
        }
    reads = {}
    for st in clients.reads():
        reads[st.request.request_id] = {
            "client": st.op.client,
            "entry": st.op.server,
            "outcome": st.outcome,
            "latency_ms": st.latency,
            "served_by": st.acked_by,
            "value": st.value,
            "version": position_text(st.position) if st.position else None,
        }
    servers = {
        r.id: {
            "role": r.role.value,
            "mode": r.mode.value,
            "epoch": r.epoch,
            "applied": len(r.applied_log),
            "reads": r.reads_served,
            "last": position_text(r.last_position),
        }
        for r in world.replicas.values()
    }
    failovers = []
    for ev in world.failovers:
        if isinstance(ev, FailoverEvent):
            failovers.append({"at": ev.at, "situation": ev.situation.value,
                              "detector": ev.detector, "peer": ev.peer})
        else:
            failovers.append({"at": ev.at, "situation": "restore",
                              "detector": ev.detector, "peer": ev.peer})
    latencies = [w["latency_ms"] for w in writes.values() if w["latency_ms"] is not None]
    return {
        "scenario": outcome.scenario.name,
        "seed": world.seed,
        "reason": result.reason,
        "timed_out": result.timed_out,
        "end_time_ms": result.end_time,
        "steps": result.steps,
        "writes": writes,
        "reads": reads,
        "servers": servers,
        "availability": [{"at": at, "server": s, "accepting_writes": ok}
                         for at, s, ok in world.availability],
        "failovers": failovers,
        "summary": {
            "writes": len(writes),
            "acked": sum(1 for w in writes.values() if w["outcome"] == "acked"),
            "failed": sum(1 for w in writes.values() if w["outcome"] != "acked"),
            "max_latency_ms": max(latencies) if latencies else None,
            "primaries": world.primaries(),
        },
    }
