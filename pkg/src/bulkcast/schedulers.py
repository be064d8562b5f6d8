"""Receiver-partitioning schedulers behind one interface.

Every scheduler maps (request, state) to a PartitionPlan and commits the
chosen trees' volume claims to the state's edge-load table before returning.
The estimator simulates candidate trees alone on the time-varying available
bandwidth: ongoing transfers influence selection only through edge loads.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import chain
from typing import Mapping, Sequence

from .engine import PartitionPlan, PlanPartition, SimState
from .model import HUB, ObjectiveVector, TransferRequest, mean_available_bandwidth
from .star import StarInstance, optimal_partitioning
from .trees import ForwardingTree, comp_forwarding_tree, min_weight_steiner
from .waterfill import advance_active_trees

ESTIMATE_HORIZON = 10 ** 6


class HorizonExceededError(RuntimeError):
    """Completion-time estimate ran past the configured horizon."""


def _horizon(state: SimState, override) -> int:
    return state.estimate_horizon if override is None else int(override)


def weighted_vector(omega) -> tuple:
    """Replace the last zero of each maximal zero run with the run length."""
    bits = omega.bits if isinstance(omega, ObjectiveVector) else tuple(omega)
    out = list(bits)
    run = 0
    for i, b in enumerate(bits):
        if b == 0:
            run += 1
            if i + 1 == len(bits) or bits[i + 1] == 1:
                out[i] = run
                run = 0
    return tuple(out)


def _estimate_completions(topology, streams, t_now: int, delta: float, horizon: int) -> dict:
    """Finish slot per stream key, simulating the streams alone from t_now+1."""
    active = [(k, tuple(edges), float(vol)) for k, edges, vol in streams]
    limit = t_now + horizon
    done: dict = {}
    t = t_now
    hint = 0
    while active:
        result = advance_active_trees(
            topology.edge_by_id, active, t + 1, limit, delta, first_chunk=hint
        )
        hint = result.t_end - t
        t = result.t_end
        if not result.finished:
            raise HorizonExceededError(
                f"no completion within {horizon} slots after {t_now}"
            )
        for k in result.finished:
            done[k] = t
        gone = set(result.finished)
        active = [(k, e, result.residuals[k]) for k, e, _ in active if k not in gone]
    return done


def min_completion_times(
    partitions: Sequence,
    request: TransferRequest,
    state: SimState,
    horizon=None,
) -> list:
    """Earliest finish slot per receiver group, each served by its own tree.

    The groups' trees share the network with each other but with nothing else.
    """
    horizon = _horizon(state, horizon)
    flat = [r for p in partitions for r in p]
    if len(flat) != len(set(flat)):
        raise ValueError(f"partitions overlap: {partitions}")
    trees = [
        comp_forwarding_tree(state.load, request.source, tuple(p), request.volume)
        for p in partitions
    ]
    streams = [(i, t.edges, request.volume) for i, t in enumerate(trees)]
    done = _estimate_completions(state.topology, streams, state.t_now, state.delta, horizon)
    return [done[i] for i in range(len(partitions))]


def _tree_for(state: SimState, request: TransferRequest, receivers, cache: dict):
    key = frozenset(receivers)
    if key not in cache:
        cache[key] = comp_forwarding_tree(
            state.load, request.source, tuple(receivers), request.volume
        )
    return cache[key]


def _rank_receivers(request: TransferRequest, state: SimState, cache: dict, horizon: int):
    """Receivers ordered fastest-first by singleton completion estimates."""
    singles = sorted(request.receivers)
    trees = [_tree_for(state, request, (r,), cache) for r in singles]
    streams = [(r, t.edges, request.volume) for r, t in zip(singles, trees)]
    done = _estimate_completions(state.topology, streams, state.t_now, state.delta, horizon)
    ranked = sorted(singles, key=lambda r: (done[r], r))
    return ranked, done


def assign_receiver_ranks(
    request: TransferRequest, state: SimState, horizon=None
) -> dict:
    """Rank 1 = estimated-fastest receiver; ties break by identifier."""
    ranked, _ = _rank_receivers(request, state, {}, _horizon(state, horizon))
    return {r: i + 1 for i, r in enumerate(ranked)}


def base_partitions(ranked_receivers: Sequence, omega) -> list:
    """Initial groups: 1-bits isolate a rank, runs of 0-bits share a group."""
    bits = omega.bits if isinstance(omega, ObjectiveVector) else tuple(omega)
    if len(bits) != len(ranked_receivers):
        raise ValueError(
            f"objective vector length {len(bits)} != receiver count {len(ranked_receivers)}"
        )
    parts: list = []
    group: list = []
    for r, b in zip(ranked_receivers, bits):
        if b == 1:
            if group:
                parts.append(tuple(group))
                group = []
            parts.append((r,))
        else:
            group.append(r)
    if group:
        parts.append(tuple(group))
    return parts


@dataclass(frozen=True)
class HierarchyLayer:
    """One candidate partitioning: index equals its partition count."""

    index: int
    partitions: tuple
    kappas: tuple  # estimated finish slot per partition
    kappa: float  # receiver-weighted mean of kappas
    total_weight: float


def _evaluate_layer(
    request: TransferRequest,
    state: SimState,
    parts: Sequence,
    cache: dict,
    horizon: int,
    kappas=None,
) -> HierarchyLayer:
    trees = [_tree_for(state, request, p, cache) for p in parts]
    if kappas is None:
        streams = [(i, t.edges, request.volume) for i, t in enumerate(trees)]
        done = _estimate_completions(
            state.topology, streams, state.t_now, state.delta, horizon
        )
        kappas = tuple(done[i] for i in range(len(parts)))
    n = len(request.receivers)
    kappa = sum(len(p) * k for p, k in zip(parts, kappas)) / n
    weight = sum(
        state.load.weight(e, request.volume) for t in trees for e in t.edges
    )
    return HierarchyLayer(
        index=len(parts),
        partitions=tuple(tuple(p) for p in parts),
        kappas=tuple(kappas),
        kappa=float(kappa),
        total_weight=float(weight),
    )


def _commit_plan(state: SimState, partitions, trees, volume: float) -> PartitionPlan:
    for tree in trees:
        state.load.commit(tree.edges, volume)
    return tuple(
        PlanPartition(receivers=tuple(p), tree=t, volume=volume)
        for p, t in zip(partitions, trees)
    )


def iris_partition(
    request: TransferRequest, state: SimState, horizon=None
) -> PartitionPlan:
    """Full pipeline: rank receivers, build the merge hierarchy, pick a layer.

    Layers run from the objective-vector base partitioning down to a single
    all-receiver group, merging the two fastest adjacent partitions at each
    step. Selection minimizes estimated mean completion, then total tree
    weight, then partition count.
    """
    cache: dict = {}
    horizon = _horizon(state, horizon)
    ranked, single_done = _rank_receivers(request, state, cache, horizon)
    base = base_partitions(ranked, request.objective)
    layers = []
    parts = [tuple(p) for p in base]
    while True:
        if all(len(p) == 1 for p in parts):
            kappas = tuple(single_done[p[0]] for p in parts)
            layers.append(_evaluate_layer(request, state, parts, cache, horizon, kappas))
        else:
            layers.append(_evaluate_layer(request, state, parts, cache, horizon))
        if len(parts) == 1:
            break
        parts = [parts[0] + parts[1]] + parts[2:]
    best = min(layers, key=lambda L: (L.kappa, L.total_weight, L.index))
    trees = [cache[frozenset(p)] for p in best.partitions]
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, best.partitions, trees, request.volume),
        layer=best.index,
        layers=tuple(layers),
    )


def quickcast_like(
    request: TransferRequest, state: SimState, horizon=None
) -> PartitionPlan:
    """Fast/slow split: best single tree or one two-group cut of the ranking."""
    cache: dict = {}
    horizon = _horizon(state, horizon)
    ranked, _ = _rank_receivers(request, state, cache, horizon)
    base = base_partitions(ranked, request.objective)
    candidates = [(0, [tuple(chain.from_iterable(base))])]
    for j in range(1, len(base)):
        head = tuple(chain.from_iterable(base[:j]))
        tail = tuple(chain.from_iterable(base[j:]))
        candidates.append((j, [head, tail]))
    evaluated = [
        (cut, _evaluate_layer(request, state, parts, cache, horizon))
        for cut, parts in candidates
    ]
    cut, best = min(evaluated, key=lambda cl: (cl[1].kappa, cl[1].total_weight, cl[1].index, cl[0]))
    trees = [cache[frozenset(p)] for p in best.partitions]
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, best.partitions, trees, request.volume),
        layer=best.index,
        layers=tuple(layer for _, layer in evaluated),
    )


def _unit_weights(topology) -> dict:
    return {e.id: 1.0 for e in topology.edges}


def unicast_shortest(request: TransferRequest, state: SimState) -> PartitionPlan:
    """One fewest-hop path per receiver, oblivious to load."""
    unit = _unit_weights(state.topology)
    parts = [(r,) for r in sorted(request.receivers)]
    trees = [
        min_weight_steiner(state.topology, unit, request.source, p) for p in parts
    ]
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, parts, trees, request.volume),
        layer=len(parts),
    )


def single_tree_static(request: TransferRequest, state: SimState) -> PartitionPlan:
    """One tree over all receivers minimizing edge count."""
    tree = min_weight_steiner(
        state.topology, _unit_weights(state.topology), request.source, request.receivers
    )
    parts = [tuple(sorted(request.receivers))]
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, parts, [tree], request.volume),
        layer=1,
    )


def single_tree_load_aware(request: TransferRequest, state: SimState) -> PartitionPlan:
    """One tree over all receivers minimizing load-plus-volume weight."""
    tree = comp_forwarding_tree(
        state.load, request.source, request.receivers, request.volume
    )
    parts = [tuple(sorted(request.receivers))]
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, parts, [tree], request.volume),
        layer=1,
    )


def _star_edges(state: SimState, request: TransferRequest):
    """Uplink and per-receiver downlink edges of an aggregated-star state."""
    topo = state.topology
    up = [e for e in topo.out_edges.get(request.source, ()) if e.dst == HUB]
    if len(up) != 1:
        raise ValueError(f"{request.source} has no unique uplink to {HUB!r}")
    downs = {}
    for r in request.receivers:
        cand = [e for e in topo.in_edges.get(r, ()) if e.src == HUB]
        if len(cand) != 1:
            raise ValueError(f"{r} has no unique downlink from {HUB!r}")
        downs[r] = cand[0]
    return up[0], downs


def relaxed_optimal_scheduler(request: TransferRequest, state: SimState) -> PartitionPlan:
    """Optimal relaxed grouping on an aggregated star, for lower bounds."""
    up, downs = _star_edges(state, request)
    ordered = sorted(
        request.receivers, key=lambda r: (-mean_available_bandwidth(downs[r]), r)
    )
    instance = StarInstance(
        uplink_rate=mean_available_bandwidth(up),
        downlink_rates=tuple(mean_available_bandwidth(downs[r]) for r in ordered),
        volume=request.volume,
    )
    grouping = optimal_partitioning(instance)
    parts, trees = [], []
    for group in grouping.groups:
        receivers = tuple(ordered[i] for i in group)
        edges = (up.id,) + tuple(sorted(downs[r].id for r in receivers))
        parts.append(receivers)
        trees.append(ForwardingTree(root=request.source, terminals=receivers, edges=edges))
    return PartitionPlan(
        transfer_id=request.id,
        partitions=_commit_plan(state, parts, trees, request.volume),
        layer=len(parts),
    )


SCHEDULERS: Mapping = {
    "iris": iris_partition,
    "unicast-sp": unicast_shortest,
    "single-tree-static": single_tree_static,
    "single-tree-load-aware": single_tree_load_aware,
    "quickcast-like": quickcast_like,
}
