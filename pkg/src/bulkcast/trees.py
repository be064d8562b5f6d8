"""Forwarding-tree selection: load-aware edge weights and Steiner-tree growth.

An edge's scheduling weight combines the backlog already routed across it with
the marginal load the candidate transfer would add:

    W_e = L_e + V / B_e

where L_e is the sum over assigned trees of residual volume divided by the
edge's mean available bandwidth, and B_e is that same mean bandwidth.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import Edge, Topology, mean_available_bandwidth


class UnreachableTerminalError(ValueError):
    """A terminal cannot be reached from the tree under construction."""

    def __init__(self, root: str, nodes: Sequence[str]):
        self.nodes = tuple(nodes)
        super().__init__(f"unreachable from {root}: {', '.join(self.nodes)}")


class EdgeLoadTable:
    """Mutable map edge-id -> L_e with the topology's mean bandwidths baked in."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self._mean_bw = {e.id: mean_available_bandwidth(e) for e in topology.edges}
        self._load = {e.id: 0.0 for e in topology.edges}

    def load(self, edge_id: int) -> float:
        return self._load[edge_id]

    def mean_bandwidth(self, edge_id: int) -> float:
        return self._mean_bw[edge_id]

    def weight(self, edge_id: int, volume: float) -> float:
        return self._load[edge_id] + volume / self._mean_bw[edge_id]

    def commit(self, edge_ids: Iterable[int], volume: float) -> None:
        """Account a newly assigned tree carrying ``volume`` over these edges."""
        for eid in edge_ids:
            self._load[eid] += volume / self._mean_bw[eid]

    def rebuild(self, claims: Iterable) -> None:
        """Recompute every L_e from (edge_ids, residual_volume) pairs.

        Rebuilding instead of decrementing keeps the load table exactly
        consistent with residual volumes, with no accumulation drift.
        """
        self._load = {eid: 0.0 for eid in self._load}
        for edge_ids, residual in claims:
            for eid in edge_ids:
                self._load[eid] += residual / self._mean_bw[eid]

    def snapshot(self) -> dict:
        return dict(self._load)


def edge_weight(table: EdgeLoadTable, edge: Edge, volume: float) -> float:
    """Scheduling weight of ``edge`` for a transfer of ``volume`` units."""
    return table.weight(edge.id, volume)


@dataclass(frozen=True)
class ForwardingTree:
    """Arborescence from ``root`` covering ``terminals``; edges stored by id."""

    root: str
    terminals: tuple
    edges: tuple

    def validate(self, topology: Topology) -> None:
        """Assert arborescence shape; raises ValueError when malformed."""
        by_id = topology.edge_by_id
        es = [by_id[eid] for eid in self.edges]
        indeg: dict = {}
        out: dict = {}
        for e in es:
            indeg[e.dst] = indeg.get(e.dst, 0) + 1
            out.setdefault(e.src, []).append(e.dst)
        if indeg.get(self.root, 0) != 0:
            raise ValueError("root has an incoming tree edge")
        for node, d in indeg.items():
            if d != 1:
                raise ValueError(f"node {node} has in-degree {d}")
        reached = {self.root}
        stack = [self.root]
        while stack:
            for nxt in out.get(stack.pop(), []):
                if nxt not in reached:
                    reached.add(nxt)
                    stack.append(nxt)
        tree_nodes = set(indeg) | {self.root}
        if reached != tree_nodes:
            raise ValueError("tree edges are not all reachable from the root")
        missing = set(self.terminals) - reached
        if missing:
            raise ValueError(f"terminals not covered: {sorted(missing)}")


def _grow_dijkstra(topology: Topology, weights: Mapping[int, float], sources: set):
    """Multi-source shortest paths; returns (dist, predecessor-edge) maps."""
    dist = {n: float("inf") for n in topology.nodes}
    pred: dict = {}
    heap = []
    for n in sorted(sources):
        dist[n] = 0.0
        heapq.heappush(heap, (0.0, n))
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for e in topology.out_edges[u]:
            w = weights[e.id]
            nd = d + w
            if nd < dist[e.dst]:
                dist[e.dst] = nd
                pred[e.dst] = e
                heapq.heappush(heap, (nd, e.dst))
            elif nd == dist[e.dst] and e.dst in pred and e.id < pred[e.dst].id:
                pred[e.dst] = e  # same length, keep the lowest-edge-id route
    return dist, pred


def min_weight_steiner(
    topology: Topology,
    weights: Mapping[int, float],
    root: str,
    terminals: Iterable[str],
) -> ForwardingTree:
    """Grow a low-weight arborescence from ``root`` covering ``terminals``.

    Heuristic: repeatedly attach the terminal that is cheapest to reach from
    the tree built so far via a weighted shortest path. Deterministic: ties
    break toward the lowest node identifier and lowest edge id.
    """
    targets = sorted(set(terminals) - {root})
    if not targets:
        raise ValueError("no terminals beyond the root")
    for eid, w in weights.items():
        if w < 0:
            raise ValueError(f"negative weight on edge {eid}")

    tree_nodes = {root}
    tree_edges: list = []
    uncovered = set(targets)
    while uncovered:
        dist, pred = _grow_dijkstra(topology, weights, tree_nodes)
        unreachable = sorted(n for n in uncovered if dist[n] == float("inf"))
        if unreachable:
            raise UnreachableTerminalError(root, unreachable)
        target = min(uncovered, key=lambda n: (dist[n], n))
        node = target
        path = []
        while node not in tree_nodes:
            e = pred[node]
            path.append(e)
            node = e.src
        for e in reversed(path):
            tree_edges.append(e.id)
            tree_nodes.add(e.dst)
        uncovered -= tree_nodes
    return ForwardingTree(root=root, terminals=tuple(targets), edges=tuple(sorted(tree_edges)))


def comp_forwarding_tree(
    table: EdgeLoadTable,
    source: str,
    terminals: Iterable[str],
    volume: float,
) -> ForwardingTree:
    """Select the forwarding tree for one partition of a transfer."""
    topo = table.topology
    weights = {e.id: table.weight(e.id, volume) for e in topo.edges}
    return min_weight_steiner(topo, weights, source, terminals)
