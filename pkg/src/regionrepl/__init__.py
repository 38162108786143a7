"""Replication protocol simulator for a private-cloud availability region."""

from .engine import Mode, Replica
from .netsim import World
from .protocol import Lsn, Status, format_lsn, parse_lsn
from .topology import RegionTopology, Role, build_topology

__version__ = "0.1.0"

__all__ = [
    "Lsn",
    "Mode",
    "RegionTopology",
    "Replica",
    "Role",
    "Status",
    "World",
    "build_topology",
    "format_lsn",
    "parse_lsn",
]
