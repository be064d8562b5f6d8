"""Shared builders for tests: small topologies with constant traffic profiles."""
from __future__ import annotations

from bulkcast.model import Edge, Topology, UserTrafficProfile


def constant_profile(frac: float = 0.05) -> UserTrafficProfile:
    return UserTrafficProfile(period=10, phase=0, peak_fraction=frac, floor_fraction=frac)


def make_topology(edge_specs, nodes=None, frac: float = 0.05) -> Topology:
    """Topology from (src, dst, capacity) triples, one directed edge each.

    Capacities are taken as-is (no normalization); profiles are constant so
    available bandwidth is capacity * (1 - frac) at every timeslot.
    """
    if nodes is None:
        seen = []
        for s, d, _ in edge_specs:
            for n in (s, d):
                if n not in seen:
                    seen.append(n)
        nodes = seen
    prof = constant_profile(frac)
    edges = tuple(
        Edge(i, s, d, float(c), prof) for i, (s, d, c) in enumerate(edge_specs)
    )
    return Topology(nodes=tuple(nodes), edges=edges)


def star_topology(uplink: float, downlinks: dict, source: str = "s", hub: str = "h",
                  frac: float = 0.05) -> Topology:
    """Physical star: source -> hub -> each receiver, constant profiles."""
    specs = [(source, hub, uplink)]
    for r in downlinks:
        specs.append((hub, r, downlinks[r]))
    return make_topology(specs, nodes=[source, hub, *downlinks], frac=frac)
