"""Scenario files: topology, timing, links, client operations and faults.

Scenarios are JSON documents::

    {
      "name": "semi_entry_write",
      "topology": {"branches": 4, "semis_per_branch": 3, "priorities": [1, 2, 3, 4]},
      "timing": {"heartbeat_ms": 50, "session_timeout_ms": 200,
                 "client_timeout_ms": 1000, "max_attempts": 5},
      "links": {"sync_ms": 10, "semi_ms": 10, "client_ms": 5, "jitter_ms": 0,
                "overrides": [{"from": "41", "to": "01", "ms": 12}]},
      "seed": 0,
      "max_time_ms": 60000,
      "ops": [{"at": 0, "client": "c1", "server": "42", "op": "write",
               "key": "x", "value": "1", "id": "w1"}],
      "faults": [{"at": 1000, "action": "crash", "server": "01"}]
    }

Everything except ``ops`` has a default. Names without a path resolve
against ``$REGIONREPL_SCENARIO_DIR`` and then the bundled scenarios.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass, field
from importlib import resources
from json.scanner import py_make_scanner
from pathlib import Path
from typing import Any

from ..failover import FailureDetector
from ..topology import ConfigurationError, RegionTopology, Role, build_topology

SCENARIO_DIR_ENV = "REGIONREPL_SCENARIO_DIR"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ClientOp:
    at: int
    client: str
    server: str
    op: str
    key: str
    value: str | None = None
    request_id: str = ""


@dataclass(frozen=True)
class Fault:
    at: int
    action: str
    server: str


@dataclass
class Scenario:
    name: str = "scenario"
    branches: int = 4
    semis_per_branch: int = 3
    priorities: list[int] | None = None
    heartbeat_ms: int = 50
    session_timeout_ms: int = 200
    client_timeout_ms: int = 1000
    max_attempts: int = 5
    follow_redirects: bool = True
    sync_ms: int = 10
    semi_ms: int = 10
    client_ms: int = 5
    jitter_ms: int = 0
    overrides: list[tuple[str, str, int]] = field(default_factory=list)
    seed: int = 0
    max_time_ms: int = 60_000
    ops: list[ClientOp] = field(default_factory=list)
    faults: list[Fault] = field(default_factory=list)

    def topology(self) -> RegionTopology:
        topo = build_topology(self.branches, self.semis_per_branch, self.priorities,
                              self.sync_ms, semi_latency_ms=self.semi_ms,
                              client_latency_ms=self.client_ms)
        for src, dst, ms in self.overrides:
            topo = topo.with_latency(src, dst, ms)
        return topo

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "topology": {"branches": self.branches, "semis_per_branch": self.semis_per_branch,
                         "priorities": self.priorities},
            "timing": {"heartbeat_ms": self.heartbeat_ms,
                       "session_timeout_ms": self.session_timeout_ms,
                       "client_timeout_ms": self.client_timeout_ms,
                       "max_attempts": self.max_attempts,
                       "follow_redirects": self.follow_redirects},
            "links": {"sync_ms": self.sync_ms, "semi_ms": self.semi_ms,
                      "client_ms": self.client_ms, "jitter_ms": self.jitter_ms,
                      "overrides": [{"from": a, "to": b, "ms": ms}
                                    for a, b, ms in self.overrides]},
            "seed": self.seed,
            "max_time_ms": self.max_time_ms,
            "ops": [_op_to_dict(op) for op in self.ops],
            "faults": [asdict(f) for f in self.faults],
        }


def _op_to_dict(op: ClientOp) -> dict[str, Any]:
    d = {"at": op.at, "client": op.client, "server": op.server, "op": op.op,
         "key": op.key, "id": op.request_id}
    if op.op == "write":
        d["value"] = op.value
    return d


class _Located(dict):
    """A JSON object that remembers the line it started on."""
    line: int | None = None


class _LocatingDecoder(json.JSONDecoder):
    def __init__(self):
        super().__init__()
        parse_object = self.parse_object

        def located(s_and_end, *args):
            text, end = s_and_end
            obj, new_end = parse_object(s_and_end, *args)
            obj = _Located(obj)
            obj.line = text.count("\n", 0, end) + 1
            return obj, new_end

        self.parse_object = located
        self.scan_once = py_make_scanner(self)


def _at(source: str, obj: Any, path: str) -> str:
    line = getattr(obj, "line", None)
    return f"{source}:{line}: {path}" if line else f"{source}: {path}"


def _int(value: Any, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}: must be >= {minimum}, got {value}")
    return value


def parse_scenario(data: dict[str, Any], source: str = "<scenario>") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    topo = data.get("topology", {})
    timing = data.get("timing", {})
    links = data.get("links", {})
    s = Scenario(name=str(data.get("name", Path(source).stem)))
    s.branches = _int(topo.get("branches", 4), _at(source, topo, "topology.branches"), 1)
    s.semis_per_branch = _int(topo.get("semis_per_branch", 3),
                              _at(source, topo, "topology.semis_per_branch"), 0)
    s.priorities = topo.get("priorities")
    s.heartbeat_ms = _int(timing.get("heartbeat_ms", 50), _at(source, timing, "timing.heartbeat_ms"), 1)
    s.session_timeout_ms = _int(timing.get("session_timeout_ms", 200),
                                _at(source, timing, "timing.session_timeout_ms"), 1)
    s.client_timeout_ms = _int(timing.get("client_timeout_ms", 1000),
                               _at(source, timing, "timing.client_timeout_ms"), 1)
    s.max_attempts = _int(timing.get("max_attempts", 5), _at(source, timing, "timing.max_attempts"), 1)
    s.follow_redirects = bool(timing.get("follow_redirects", True))
    s.sync_ms = _int(links.get("sync_ms", 10), _at(source, links, "links.sync_ms"), 1)
    s.semi_ms = _int(links.get("semi_ms", 10), _at(source, links, "links.semi_ms"), 1)
    s.client_ms = _int(links.get("client_ms", 5), _at(source, links, "links.client_ms"), 1)
    s.jitter_ms = _int(links.get("jitter_ms", 0), _at(source, links, "links.jitter_ms"), 0)
    s.seed = _int(data.get("seed", 0), _at(source, data, "seed"))
    s.max_time_ms = _int(data.get("max_time_ms", 60_000), _at(source, data, "max_time_ms"), 0)

    try:
        FailureDetector(s.heartbeat_ms, s.session_timeout_ms)
    except ConfigurationError as exc:
        raise ScenarioError(f"{_at(source, timing, 'timing')}: {exc}") from None
    try:
        topology = s.topology()
    except ConfigurationError as exc:
        raise ScenarioError(f"{_at(source, topo, 'topology')}: {exc}") from None

    for i, o in enumerate(links.get("overrides", [])):
        where = _at(source, o, f"links.overrides[{i}]")
        for end in ("from", "to"):
            if o.get(end) != "client" and o.get(end) not in topology:
                raise ScenarioError(f"{where}: unknown server {o.get(end)!r}")
        s.overrides.append((o["from"], o["to"], _int(o.get("ms"), where + ".ms", 1)))

    seen_ids = set()
    ops = []
    for i, o in enumerate(data.get("ops", [])):
        where = _at(source, o, f"ops[{i}]")
        kind = o.get("op", "write")
        if kind not in ("write", "read"):
            raise ScenarioError(f"{where}: op must be 'write' or 'read', got {kind!r}")
        server = str(o.get("server", ""))
        if server not in topology:
            raise ScenarioError(f"{where}: unknown server {server!r}")
        client = str(o.get("client", f"c{i}"))
        if client in topology or client == "client":
            raise ScenarioError(f"{where}: client id {client!r} collides with a server id")
        if "key" not in o:
            raise ScenarioError(f"{where}: missing key")
        if kind == "write" and "value" not in o:
            raise ScenarioError(f"{where}: write without value")
        rid = str(o.get("id") or f"{client}-{i}")
        if rid in seen_ids:
            raise ScenarioError(f"{where}: duplicate request id {rid!r}")
        seen_ids.add(rid)
        value = str(o["value"]) if kind == "write" else None
        ops.append(ClientOp(_int(o.get("at", 0), where + ".at", 0), client, server, kind,
                            str(o["key"]), value, rid))
    faults = []
    for i, f in enumerate(data.get("faults", [])):
        where = _at(source, f, f"faults[{i}]")
        action = f.get("action")
        if action not in ("crash", "recover"):
            raise ScenarioError(f"{where}: action must be 'crash' or 'recover', got {action!r}")
        server = str(f.get("server", ""))
        if server not in topology:
            raise ScenarioError(f"{where}: unknown server {server!r}")
        faults.append(Fault(_int(f.get("at"), where + ".at", 0), action, server))
    s.ops = sorted(ops, key=lambda op: op.at)
    s.faults = sorted(faults, key=lambda f: f.at)
    clash = {}
    for f in s.faults:
        other = clash.setdefault((f.at, f.server), f.action)
        if other != f.action:
            raise ScenarioError(f"{source}: faults: crash and recover of {f.server} "
                               f"both at t={f.at}")
    return s


def resolve_scenario_path(name: str | os.PathLike) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    stem = path.name if path.suffix == ".json" else path.name + ".json"
    candidates = []
    if os.environ.get(SCENARIO_DIR_ENV):
        candidates.append(Path(os.environ[SCENARIO_DIR_ENV]) / stem)
    candidates.append(Path(str(resources.files("regionrepl") / "scenarios" / stem)))
    for c in candidates:
        if c.is_file():
            return c
    raise ScenarioError(f"scenario {str(name)!r} not found")


def load_scenario(name: str | os.PathLike) -> Scenario:
    path = resolve_scenario_path(name)
    text = path.read_text()
    try:
        data = json.loads(text, cls=_LocatingDecoder)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, str(path))


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=2) + "\n"


def random_scenario(seed: int, writes: int = 10, *, reads: int = 0,
                    entry_roles: tuple[str, ...] = ("semi", "primary"),
                    span_ms: int = 1000, jitter_ms: int = 0, keys: int = 8,
                    clients: int = 4) -> Scenario:
    """A fault-free scenario with random entry servers on the full region."""
    rng = random.Random(seed)
    s = Scenario(name=f"random-{seed}", jitter_ms=jitter_ms, seed=seed)
    topo = s.topology()
    pools = {
        "primary": [topo.primary],
        "sync": topo.sync_ids,
        "semi": topo.semi_ids,
        "any": topo.servers,
    }
    for i in range(writes + reads):
        role = rng.choice(entry_roles)
        server = rng.choice(pools[role])
        client = f"c{rng.randrange(clients)}"
        at = rng.randrange(span_ms)
        key = f"k{rng.randrange(keys)}"
        if i < writes:
            s.ops.append(ClientOp(at, client, server, "write", key, f"v{i}", f"w{i}"))
        else:
            s.ops.append(ClientOp(at, client, server, "read", key, None, f"r{i}"))
    s.ops.sort(key=lambda op: op.at)
    return s


def entry_role(topology: RegionTopology, server: str) -> Role:
    return topology.role_of(server)
