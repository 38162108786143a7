"""Heartbeat failure detection and the three automatic-failover situations.

Situation A: a semi-synchronous secondary times out; its clients move to
the synchronous parent. Situation B: a synchronous secondary times out; its
children go read-only, the primary serves them directly and its clients move
to the primary. Situation C: the primary times out; the live synchronous
secondary with the best priority rank takes over in a new epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .topology import ConfigurationError, RegionTopology, Role, failover_order

DEFAULT_HEARTBEAT_MS = 50
DEFAULT_SESSION_TIMEOUT_MS = 200


class Situation(Enum):
    A = "A"
    B = "B"
    C = "C"


@dataclass
class FailureDetector:
    heartbeat_period_ms: int = DEFAULT_HEARTBEAT_MS
    session_timeout_ms: int = DEFAULT_SESSION_TIMEOUT_MS
    last_heard: dict[str, int] = field(default_factory=dict)
    suspected: set[str] = field(default_factory=set)
    # peers a failover event was raised for and which have not reported healthy since
    reported: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.heartbeat_period_ms <= 0:
            raise ConfigurationError("heartbeat period must be > 0")
        if self.session_timeout_ms <= self.heartbeat_period_ms:
            raise ConfigurationError(
                f"session timeout ({self.session_timeout_ms} ms) must exceed "
                f"heartbeat period ({self.heartbeat_period_ms} ms)"
            )

    def watch(self, peers: Iterable[str], now: int) -> None:
        for p in peers:
            self.last_heard.setdefault(p, now)

    def reset(self, peers: Iterable[str], now: int) -> None:
        self.last_heard = {p: now for p in peers}
        self.suspected.clear()
        self.reported.clear()

    def heard(self, peer: str, now: int) -> bool:
        """Record traffic from ``peer``; True if it was suspected until now."""
        self.last_heard[peer] = now
        if peer in self.suspected:
            self.suspected.discard(peer)
            return True
        return False

    def expired(self, peers: Iterable[str], now: int) -> list[str]:
        """Move silent peers into ``suspected`` and return the new ones."""
        newly = []
        for p in sorted(peers):
            if p in self.suspected:
                continue
            if now - self.last_heard.setdefault(p, now) > self.session_timeout_ms:
                self.suspected.add(p)
                newly.append(p)
        return newly


@dataclass(frozen=True)
class FailoverEvent:
    situation: Situation
    detector: str
    peer: str
    at: int


@dataclass(frozen=True)
class RoutingUpdate:
    reroute: Mapping[str, str]


@dataclass(frozen=True)
class SyncFailurePlan:
    failed: str
    read_only: tuple[str, ...]
    direct_delivery: tuple[str, ...]
    routing: RoutingUpdate


@dataclass(frozen=True)
class Promotion:
    server: str
    epoch: int
    replaced: str


def classify(topology: RegionTopology, observer: str, observer_role: Role,
             believed_primary: str, peer: str) -> Situation | None:
    """Which situation, if any, the observer should react to when ``peer`` times out."""
    if peer == believed_primary and observer_role is Role.SYNC:
        return Situation.C
    if observer_role is Role.SEMI and peer == topology.parent_of(observer):
        return Situation.B
    if peer in topology.children_of(observer):
        return Situation.A
    if observer_role is Role.PRIMARY and is_sync_level(topology, peer):
        return Situation.B
    return None


def is_sync_level(topology: RegionTopology, server: str) -> bool:
    return server == topology.primary or topology.role_of(server) is Role.SYNC


def sync_level_members(topology: RegionTopology) -> list[str]:
    """Synchronous secondaries by rank, then the original primary.

    A recovered former primary rejoins behind every ranked secondary.
    """
    return failover_order(topology) + [topology.primary]


def handle_semi_failure(topology: RegionTopology, failed: str,
                        down: Iterable[str] = ()) -> RoutingUpdate:
    if topology.role_of(failed) is not Role.SEMI:
        raise ValueError(f"{failed} is not a semi-synchronous secondary")
    if failed in set(down):
        return RoutingUpdate({})
    return RoutingUpdate({failed: topology.parent_of(failed)})


def handle_sync_failure(topology: RegionTopology, failed: str,
                        primary: str | None = None) -> SyncFailurePlan:
    if topology.role_of(failed) is not Role.SYNC:
        raise ValueError(f"{failed} is not a synchronous secondary")
    primary = primary or topology.primary
    children = topology.children_of(failed)
    return SyncFailurePlan(failed, children, children, RoutingUpdate({failed: primary}))


def next_primary(candidates: Iterable[str], failed: str, suspected: Iterable[str]) -> str | None:
    suspected = set(suspected)
    for s in candidates:
        if s != failed and s not in suspected:
            return s
    return None


def handle_primary_failure(topology: RegionTopology, views: Mapping[str, Iterable[str]],
                           failed: str | None = None, epoch: int = 0) -> Promotion | None:
    """Pick the promoted server from the detector views of the live sync level.

    ``views`` maps each live synchronous-level server to the peers it
    suspects. Returns None when no live candidate remains.
    """
    failed = failed or topology.primary
    live = set(views)
    for s in sync_level_members(topology):
        if s == failed or s not in live:
            continue
        if next_primary(sync_level_members(topology), failed, views[s]) == s:
            return Promotion(s, epoch + 1, failed)
    return None


def catch_up_entries(log: list, after) -> list:
    """Records of ``log`` (ordered by position) strictly after ``after``."""
    return [rec for rec in log if rec.position > tuple(after)]
