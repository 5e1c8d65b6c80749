from .clock import SchedulingInPast, VirtualClock
from .latency import DelayKind, DelayMode, LatencyEmulator, RttDistribution, TransactionDelay, sample_rtt
from .topology import (
    LinkProfile,
    NoLinkProfile,
    Topology,
    TopologyError,
    bundled_topology,
    load_topology,
    topology_from_dict,
    validate_document,
)

__all__ = [
    "DelayKind",
    "DelayMode",
    "LatencyEmulator",
    "LinkProfile",
    "NoLinkProfile",
    "RttDistribution",
    "SchedulingInPast",
    "Topology",
    "TopologyError",
    "TransactionDelay",
    "VirtualClock",
    "bundled_topology",
    "load_topology",
    "sample_rtt",
    "topology_from_dict",
    "validate_document",
]
