"""Region layout: one primary, synchronous branches, semi-synchronous leaves.

Server ids are two-digit codes. The primary is ``"01"``; the synchronous
secondary of branch ``B`` is ``"B1"`` and its semi-synchronous children are
``"B2"``, ``"B3"``, ``"B4"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

CLIENT = "client"
PRIMARY_ID = "01"
MAX_BRANCHES = 4
MAX_SEMIS = 3


class ConfigurationError(ValueError):
    pass


class UnknownServerError(KeyError):
    pass


class Role(Enum):
    PRIMARY = "Primary"
    SYNC = "SyncSecondary"
    SEMI = "SemiSyncSecondary"


@dataclass(frozen=True)
class Branch:
    sync: str
    priority: int
    children: tuple[str, ...]


@dataclass(frozen=True)
class RegionTopology:
    primary: str
    branches: tuple[Branch, ...]
    links: Mapping[tuple[str, str], int]
    # latency for pairs outside the protocol graph (sync mesh, direct primary->semi)
    fallback_latency_ms: int = 10
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {self.primary: (Role.PRIMARY, None, None)}
        for b in self.branches:
            index[b.sync] = (Role.SYNC, self.primary, b)
            for c in b.children:
                index[c] = (Role.SEMI, b.sync, b)
        object.__setattr__(self, "_index", index)
        validate(self)

    @property
    def servers(self) -> list[str]:
        return sorted(self._index)

    @property
    def sync_ids(self) -> list[str]:
        return [b.sync for b in self.branches]

    @property
    def semi_ids(self) -> list[str]:
        return [c for b in self.branches for c in b.children]

    def __contains__(self, server: str) -> bool:
        return server in self._index

    def _entry(self, server: str):
        try:
            return self._index[server]
        except KeyError:
            raise UnknownServerError(server) from None

    def role_of(self, server: str) -> Role:
        return self._entry(server)[0]

    def parent_of(self, server: str) -> str | None:
        return self._entry(server)[1]

    def children_of(self, server: str) -> tuple[str, ...]:
        role, _, branch = self._entry(server)
        return branch.children if role is Role.SYNC else ()

    def priority_of(self, server: str) -> int | None:
        role, _, branch = self._entry(server)
        return branch.priority if role is Role.SYNC else None

    def protocol_edges(self) -> list[tuple[str, str]]:
        """Undirected child->parent edges of the fault-free replication graph."""
        return [(s, self.parent_of(s)) for s in self.servers if s != self.primary]

    def endpoint(self, name: str) -> str:
        return name if name in self._index else CLIENT

    def latency(self, src: str, dst: str) -> int:
        key = (self.endpoint(src), self.endpoint(dst))
        return self.links.get(key, self.fallback_latency_ms)

    def with_latency(self, src: str, dst: str, ms: int) -> "RegionTopology":
        links = dict(self.links)
        links[(self.endpoint(src), self.endpoint(dst))] = ms
        return RegionTopology(self.primary, self.branches, links, self.fallback_latency_ms)


def validate(topology: RegionTopology) -> None:
    seen = [topology.primary]
    for b in topology.branches:
        seen.append(b.sync)
        seen.extend(b.children)
    if len(seen) != len(set(seen)):
        raise ConfigurationError("server ids must be unique")
    ranks = [b.priority for b in topology.branches]
    if len(set(ranks)) != len(ranks):
        raise ConfigurationError(f"duplicate failover priorities: {ranks}")
    for pair, ms in topology.links.items():
        if ms <= 0:
            raise ConfigurationError(f"link {pair} latency must be > 0, got {ms}")
    if topology.fallback_latency_ms <= 0:
        raise ConfigurationError("fallback latency must be > 0")


def build_topology(
    branch_count: int = 4,
    semis_per_branch: int = 3,
    priorities: Iterable[int] | None = None,
    default_latency_ms: int = 10,
    *,
    semi_latency_ms: int | None = None,
    client_latency_ms: int | None = None,
) -> RegionTopology:
    """Build the region with ids assigned by branch and node digit.

    ``default_latency_ms`` covers the sync level (primary<->sync) and every
    pair outside the protocol graph; ``semi_latency_ms`` and
    ``client_latency_ms`` default to it.
    """
    if branch_count < 1:
        raise ConfigurationError("branch_count must be >= 1")
    if branch_count > MAX_BRANCHES:
        raise ConfigurationError(f"at most {MAX_BRANCHES} branches fit the id scheme")
    if not 0 <= semis_per_branch <= MAX_SEMIS:
        raise ConfigurationError(f"semis_per_branch must be in 0..{MAX_SEMIS}")
    priorities = list(range(1, branch_count + 1) if priorities is None else priorities)
    if len(priorities) != branch_count:
        raise ConfigurationError("one priority per branch is required")
    if sorted(priorities) != list(range(1, branch_count + 1)):
        raise ConfigurationError(
            f"priorities must be a permutation of 1..{branch_count}, got {priorities}"
        )
    semi_ms = default_latency_ms if semi_latency_ms is None else semi_latency_ms
    client_ms = default_latency_ms if client_latency_ms is None else client_latency_ms

    branches = []
    links: dict[tuple[str, str], int] = {}
    for b, rank in zip(range(1, branch_count + 1), priorities):
        sync = f"{b}1"
        children = tuple(f"{b}{n}" for n in range(2, 2 + semis_per_branch))
        branches.append(Branch(sync, rank, children))
        links[(sync, PRIMARY_ID)] = links[(PRIMARY_ID, sync)] = default_latency_ms
        for c in children:
            links[(c, sync)] = links[(sync, c)] = semi_ms
    for s in [PRIMARY_ID] + [x for br in branches for x in (br.sync, *br.children)]:
        links[(CLIENT, s)] = links[(s, CLIENT)] = client_ms
    return RegionTopology(PRIMARY_ID, tuple(branches), links, default_latency_ms)


def parent_of(topology: RegionTopology, server: str) -> str | None:
    return topology.parent_of(server)


def failover_order(topology: RegionTopology, down: Iterable[str] = ()) -> list[str]:
    """Synchronous secondaries by ascending priority rank, minus ``down``."""
    down = set(down)
    ranked = sorted(topology.branches, key=lambda b: b.priority)
    return [b.sync for b in ranked if b.sync not in down]
