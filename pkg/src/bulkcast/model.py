"""Core domain model: topologies, background-traffic profiles, transfer requests.

Capacities are normalized traffic units: the fastest link in a loaded topology
carries 1.0 units per timeslot. Bandwidth left over for bulk transfers follows a
per-edge periodic wave between a floor and a peak fraction of link capacity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

PROFILE_STREAM = 101  # rng sub-stream tag for profile assignment

DEFAULT_PEAK_FRACTION = 0.30
DEFAULT_FLOOR_FRACTION = 0.05


class TopologyError(ValueError):
    """Raised for malformed topology documents or inconsistent graphs."""


@dataclass(frozen=True)
class UserTrafficProfile:
    """Symmetric triangular wave of background (user) traffic on one edge.

    The occupied fraction starts at ``floor_fraction`` at t = -phase, rises
    linearly to ``peak_fraction`` at half period and falls back. A profile with
    floor == peak is constant.
    """

    period: int = 10
    phase: int = 0
    peak_fraction: float = DEFAULT_PEAK_FRACTION
    floor_fraction: float = DEFAULT_FLOOR_FRACTION

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if not 0 <= self.phase < self.period:
            raise ValueError(f"phase must lie in [0, period), got {self.phase}")
        if not 0.0 <= self.floor_fraction <= self.peak_fraction < 1.0:
            raise ValueError(
                "need 0 <= floor_fraction <= peak_fraction < 1, got "
                f"{self.floor_fraction}, {self.peak_fraction}"
            )

    def fraction(self, t: float) -> float:
        """Occupied fraction of capacity at timeslot t."""
        x = ((t + self.phase) % self.period) / self.period
        tri = 2.0 * x if x <= 0.5 else 2.0 * (1.0 - x)
        return self.floor_fraction + (self.peak_fraction - self.floor_fraction) * tri

    def fraction_array(self, ts: np.ndarray) -> np.ndarray:
        # Same arithmetic as fraction(), elementwise.
        x = ((ts + self.phase) % self.period) / self.period
        tri = np.where(x <= 0.5, 2.0 * x, 2.0 * (1.0 - x))
        return self.floor_fraction + (self.peak_fraction - self.floor_fraction) * tri

    @property
    def mean_fraction(self) -> float:
        # Analytic mean of the continuous wave over one period.
        return (self.floor_fraction + self.peak_fraction) / 2.0


@dataclass(frozen=True)
class BlendedTrafficProfile:
    """Capacity-weighted mix of profiles, used on aggregated edges."""

    components: tuple  # of (capacity, profile) pairs

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("blended profile needs at least one component")

    @cached_property
    def _total_capacity(self) -> float:
        return sum(c for c, _ in self.components)

    def fraction(self, t: float) -> float:
        acc = 0.0
        for cap, prof in self.components:
            acc += cap * prof.fraction(t)
        return acc / self._total_capacity

    def fraction_array(self, ts: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(ts, dtype=float)
        for cap, prof in self.components:
            acc += cap * prof.fraction_array(ts)
        return acc / self._total_capacity

    @property
    def mean_fraction(self) -> float:
        acc = sum(cap * prof.mean_fraction for cap, prof in self.components)
        return acc / self._total_capacity


Profile = Union[UserTrafficProfile, BlendedTrafficProfile]


@dataclass(frozen=True)
class Edge:
    """Directed link with a capacity and a background-traffic profile."""

    id: int
    src: str
    dst: str
    capacity: float
    profile: Profile = field(default_factory=UserTrafficProfile)

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise TopologyError(f"edge {self.id} {self.src}->{self.dst}: capacity must be > 0")
        if self.src == self.dst:
            raise TopologyError(f"edge {self.id}: self-loop at {self.src}")


def available_bandwidth(edge: Edge, t: float) -> float:
    """Bandwidth left for bulk transfers on ``edge`` during timeslot t."""
    return edge.capacity * (1.0 - edge.profile.fraction(t))


def available_bandwidth_array(edge: Edge, ts: np.ndarray) -> np.ndarray:
    return edge.capacity * (1.0 - edge.profile.fraction_array(ts))


def mean_available_bandwidth(edge: Edge) -> float:
    """Mean of available_bandwidth over one full profile period."""
    return edge.capacity * (1.0 - edge.profile.mean_fraction)


@dataclass(frozen=True)
class Topology:
    """Directed capacitated graph over datacenter nodes."""

    nodes: tuple
    edges: tuple

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("duplicate node identifiers")
        node_set = set(self.nodes)
        seen_ids = set()
        for e in self.edges:
            if e.id in seen_ids:
                raise TopologyError(f"duplicate edge id {e.id}")
            seen_ids.add(e.id)
            if e.src not in node_set or e.dst not in node_set:
                raise TopologyError(f"edge {e.id} references undeclared node {e.src!r} or {e.dst!r}")

    @cached_property
    def edge_by_id(self) -> Mapping[int, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def out_edges(self) -> Mapping[str, tuple]:
        adj: dict = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.src].append(e)
        return {n: tuple(sorted(es, key=lambda e: e.id)) for n, es in adj.items()}

    @cached_property
    def in_edges(self) -> Mapping[str, tuple]:
        adj: dict = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.dst].append(e)
        return {n: tuple(sorted(es, key=lambda e: e.id)) for n, es in adj.items()}


def parse_topology(doc: Mapping) -> Topology:
    """Build a normalized Topology from a parsed JSON document.

    Undirected entries expand into one edge per direction. Capacities are scaled
    so the fastest directed edge is exactly 1.0.
    """
    try:
        nodes = tuple(doc["nodes"])
        entries = list(doc["edges"])
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"document must carry 'nodes' and 'edges': {exc}") from exc
    if not nodes:
        raise TopologyError("empty node list")
    for n in nodes:
        if not isinstance(n, str) or not n:
            raise TopologyError(f"node identifiers must be non-empty strings, got {n!r}")

    raw: list = []  # (src, dst, gbps)
    for k, entry in enumerate(entries):
        try:
            src, dst, gbps = entry["src"], entry["dst"], float(entry["gbps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"edge entry {k} malformed: {exc}") from exc
        if gbps <= 0:
            raise TopologyError(f"edge entry {k} ({src}->{dst}): gbps must be > 0")
        raw.append((src, dst, gbps))
        if not entry.get("directed", False):
            raw.append((dst, src, gbps))

    if not raw:
        raise TopologyError("no edges")
    fastest = max(g for _, _, g in raw)
    edges = tuple(
        Edge(
            id=i,
            src=src,
            dst=dst,
            capacity=gbps / fastest,
            profile=UserTrafficProfile(
                period=10, phase=0,
                peak_fraction=DEFAULT_FLOOR_FRACTION,
                floor_fraction=DEFAULT_FLOOR_FRACTION,
            ),
        )
        for i, (src, dst, gbps) in enumerate(raw)
    )
    return Topology(nodes=nodes, edges=edges)


def load_topology(path: Union[str, Path]) -> Topology:
    """Read a topology JSON file and return the normalized Topology."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path}: invalid JSON: {exc}") from exc
    return parse_topology(doc)


def bundled_topology_path(name: str = "geant34") -> Path:
    """Filesystem path of a topology document shipped with the package."""
    return Path(str(resources.files("bulkcast").joinpath("data", f"{name}.json")))


def load_bundled_topology(name: str = "geant34") -> Topology:
    return load_topology(bundled_topology_path(name))


def with_user_traffic(topology: Topology, seed: int) -> Topology:
    """Assign each edge a seeded background-traffic wave.

    Periods are uniform over [10, 100] timeslots, phases uniform over
    [0, period), drawn per edge in edge-id order.
    """
    rng = np.random.default_rng([seed, PROFILE_STREAM])
    edges = []
    for e in sorted(topology.edges, key=lambda e: e.id):
        period = int(rng.integers(10, 101))
        phase = int(rng.integers(0, period))
        profile = UserTrafficProfile(period=period, phase=phase)
        edges.append(Edge(e.id, e.src, e.dst, e.capacity, profile))
    return Topology(nodes=topology.nodes, edges=tuple(edges))


HUB = "__hub__"


def aggregate_topology(topology: Topology, hub: str = HUB) -> Topology:
    """Collapse the network into a star through a virtual hub.

    Each node keeps one uplink carrying the sum of its outgoing capacities and
    one downlink carrying the sum of its incoming capacities; profiles blend
    capacity-weighted, so available bandwidth sums exactly per timeslot.
    """
    if hub in topology.nodes:
        raise TopologyError(f"hub name {hub!r} collides with an existing node")
    edges = []
    next_id = 0
    for node in topology.nodes:
        outs = topology.out_edges[node]
        if outs:
            cap = sum(e.capacity for e in outs)
            profile = BlendedTrafficProfile(tuple((e.capacity, e.profile) for e in outs))
            edges.append(Edge(next_id, node, hub, cap, profile))
            next_id += 1
        ins = topology.in_edges[node]
        if ins:
            cap = sum(e.capacity for e in ins)
            profile = BlendedTrafficProfile(tuple((e.capacity, e.profile) for e in ins))
            edges.append(Edge(next_id, hub, node, cap, profile))
            next_id += 1
    return Topology(nodes=tuple(topology.nodes) + (hub,), edges=tuple(edges))


@dataclass(frozen=True)
class ObjectiveVector:
    """Bit per receiver rank: 1 isolates that rank, runs of 0 group ranks."""

    bits: tuple

    def __post_init__(self) -> None:
        if not self.bits:
            raise ValueError("objective vector must not be empty")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"objective vector bits must be 0/1, got {self.bits}")

    @classmethod
    def from_string(cls, s: str) -> "ObjectiveVector":
        return cls(tuple(int(c) for c in s))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class TransferRequest:
    """Bulk multicast transfer: one source, a set of receivers, one volume."""

    id: str
    source: str
    receivers: tuple
    volume: float
    arrival: int
    objective: ObjectiveVector

    def __post_init__(self) -> None:
        if not self.receivers:
            raise ValueError(f"transfer {self.id}: needs at least one receiver")
        if len(set(self.receivers)) != len(self.receivers):
            raise ValueError(f"transfer {self.id}: duplicate receivers")
        if self.source in self.receivers:
            raise ValueError(f"transfer {self.id}: source {self.source} cannot receive")
        if self.volume <= 0:
            raise ValueError(f"transfer {self.id}: volume must be > 0")
        if self.arrival < 0:
            raise ValueError(f"transfer {self.id}: arrival must be >= 0")
        if len(self.objective) != len(self.receivers):
            raise ValueError(
                f"transfer {self.id}: objective vector length {len(self.objective)} "
                f"!= receiver count {len(self.receivers)}"
            )
