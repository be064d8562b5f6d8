"""Online discrete-timeslot simulation loop.

Arrivals invoke a scheduler that returns a partition plan; each partition's
tree then moves volume every timeslot at max-min fair rates against the
time-varying available bandwidth. `tick` is the literal one-slot reference
step; `run_trace` is the fast path that advances many slots at once between
observable events (arrivals, completions) with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .model import Topology, TransferRequest, available_bandwidth
from .rates import TreeDemand, maxmin_rates
from .trees import EdgeLoadTable, ForwardingTree
from .waterfill import advance_active_trees

RESIDUAL_EPS = 1e-9  # residual at or below this counts as drained


class NotDrainedError(RuntimeError):
    """Metrics requested while transfers are still active."""


@dataclass(frozen=True)
class PlanPartition:
    """One receiver group of a transfer, served by one fixed tree."""

    receivers: tuple
    tree: ForwardingTree
    volume: float


@dataclass(frozen=True)
class PartitionPlan:
    """Scheduler output: how one transfer's receivers are grouped and routed."""

    transfer_id: str
    partitions: tuple
    layer: int  # chosen hierarchy layer index; equals the partition count
    layers: tuple = ()  # per-layer diagnostics for schedulers that build one

    def validate(self, request: TransferRequest, topology: Topology) -> None:
        got = [r for part in self.partitions for r in part.receivers]
        if sorted(got) != sorted(request.receivers):
            raise ValueError(
                f"plan for {request.id} does not cover receivers exactly: {got}"
            )
        for part in self.partitions:
            if part.volume < 0 or part.volume > request.volume + 1e-12:
                raise ValueError(f"partition volume {part.volume} outside [0, V]")
            part.tree.validate(topology)
            missing = set(part.receivers) - (
                {part.tree.root} | {topology.edge_by_id[e].dst for e in part.tree.edges}
            )
            if missing:
                raise ValueError(f"tree misses receivers {sorted(missing)}")


@dataclass(frozen=True)
class CompletionRecord:
    transfer_id: str
    receiver: str
    arrival: int
    completion: int


@dataclass
class _Stream:
    key: tuple
    transfer_id: str
    receivers: tuple
    edges: tuple
    arrival: int
    residual: float


@dataclass
class SimState:
    """Mutable simulation instance: clock, load table, active streams, logs."""

    topology: Topology
    delta: float = 1.0
    t_now: int = 0
    load: EdgeLoadTable = None
    active: dict = field(default_factory=dict)
    completions: list = field(default_factory=list)
    bandwidth_units: float = 0.0
    plans: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    transfers: dict = field(default_factory=dict)
    estimate_horizon: int = 10 ** 6  # max slots a completion estimate may scan

    def __post_init__(self) -> None:
        if self.load is None:
            self.load = EdgeLoadTable(self.topology)


SchedulerFn = Callable[[TransferRequest, SimState], PartitionPlan]


def _resolve(scheduler: Union[str, SchedulerFn]) -> SchedulerFn:
    if callable(scheduler):
        return scheduler
    from .schedulers import SCHEDULERS  # deferred: schedulers imports this module

    try:
        return SCHEDULERS[scheduler]
    except KeyError:
        raise ValueError(
            f"unknown scheduler {scheduler!r}; expected one of {sorted(SCHEDULERS)}"
        ) from None


def submit(state: SimState, request: TransferRequest, scheduler) -> PartitionPlan:
    """Schedule an arriving transfer and activate its partition streams."""
    if request.arrival != state.t_now:
        raise ValueError(
            f"transfer {request.id} arrives at {request.arrival}, clock is {state.t_now}"
        )
    if request.id in state.transfers:
        raise ValueError(f"duplicate transfer id {request.id}")
    fn = _resolve(scheduler)
    try:
        plan = fn(request, state)
        plan.validate(request, state.topology)
    except Exception as err:
        state.rejected.append((request.id, repr(err)))
        raise
    state.transfers[request.id] = request
    state.plans.append(plan)
    for idx, part in enumerate(plan.partitions):
        key = (request.id, idx)
        state.active[key] = _Stream(
            key=key,
            transfer_id=request.id,
            receivers=tuple(part.receivers),
            edges=tuple(part.tree.edges),
            arrival=request.arrival,
            residual=float(part.volume),
        )
    return plan


def _finish_stream(state: SimState, key: tuple, when: int) -> list:
    stream = state.active.pop(key)
    records = [
        CompletionRecord(stream.transfer_id, r, stream.arrival, when)
        for r in sorted(stream.receivers)
    ]
    state.completions.extend(records)
    return records


def _rebuild_load(state: SimState) -> None:
    state.load.rebuild(
        (state.active[k].edges, state.active[k].residual) for k in sorted(state.active)
    )


def tick(state: SimState) -> list:
    """Advance exactly one timeslot; returns completions logged at the new slot."""
    state.t_now += 1
    if not state.active:
        return []
    t = state.t_now
    by_id = state.topology.edge_by_id
    keys = sorted(state.active)
    edge_ids = sorted({e for k in keys for e in state.active[k].edges})
    bandwidths = {eid: available_bandwidth(by_id[eid], t) for eid in edge_ids}
    demands = [
        TreeDemand(k, state.active[k].edges, cap=state.active[k].residual / state.delta)
        for k in keys
    ]
    snap = maxmin_rates(demands, bandwidths, timeslot=t)
    finished = []
    for k in keys:
        stream = state.active[k]
        moved = snap.rates[k] * state.delta
        stream.residual = max(0.0, stream.residual - moved)
        state.bandwidth_units += moved * len(stream.edges)
        if stream.residual <= RESIDUAL_EPS:
            finished.append(k)
    records = []
    for k in finished:
        records.extend(_finish_stream(state, k, t))
    _rebuild_load(state)
    return records


def run_trace(
    state: SimState,
    requests: Iterable[TransferRequest],
    scheduler,
    max_slots: int = 10_000_000,
) -> None:
    """Drive the simulation through a whole trace until it drains.

    Equivalent to submitting each request at its arrival slot and calling
    `tick` in a loop, but jumps over slots where nothing arrives or completes.
    Same-slot arrivals are submitted in trace order.
    """
    reqs = list(requests)
    for a, b in zip(reqs, reqs[1:]):
        if b.arrival < a.arrival:
            raise ValueError("trace must be sorted by arrival time")
    i = 0
    hint = 0
    while i < len(reqs) or state.active:
        while i < len(reqs) and reqs[i].arrival == state.t_now:
            submit(state, reqs[i], scheduler)
            i += 1
        if not state.active:
            if i == len(reqs):
                break
            state.t_now = reqs[i].arrival
            continue
        t_limit = reqs[i].arrival if i < len(reqs) else max_slots
        streams = [
            (k, state.active[k].edges, state.active[k].residual)
            for k in sorted(state.active)
        ]
        result = advance_active_trees(
            state.topology.edge_by_id, streams, state.t_now + 1, t_limit, state.delta,
            first_chunk=hint,
        )
        hint = result.t_end - state.t_now
        state.t_now = result.t_end
        for k, _, _ in streams:
            if k in result.residuals:
                state.active[k].residual = result.residuals[k]
        state.bandwidth_units += result.bandwidth_units
        for k in sorted(result.finished):
            _finish_stream(state, k, result.t_end)
        _rebuild_load(state)
        if state.t_now >= max_slots and state.active:
            raise RuntimeError(f"simulation exceeded {max_slots} slots without draining")


def completion_ranks(records: Sequence) -> dict:
    """Within-transfer rank per (transfer_id, receiver): 1 = first to finish.

    Ties inside a transfer break by receiver identifier.
    """
    by_transfer: dict = {}
    for rec in records:
        by_transfer.setdefault(rec.transfer_id, []).append(rec)
    ranks = {}
    for tid, recs in by_transfer.items():
        for rank, rec in enumerate(sorted(recs, key=lambda r: (r.completion, r.receiver)), 1):
            ranks[(tid, rec.receiver)] = rank
    return ranks


def metrics(state: SimState) -> dict:
    """Summary report over a drained simulation."""
    if state.active:
        raise NotDrainedError(f"{len(state.active)} streams still active")
    records = sorted(
        state.completions, key=lambda r: (r.arrival, r.transfer_id, r.completion, r.receiver)
    )
    ranks = completion_ranks(records)
    durations = np.array([r.completion - r.arrival for r in records], dtype=float)
    rank_sums: dict = {}
    rows = []
    for rec in records:
        rank = ranks[(rec.transfer_id, rec.receiver)]
        rank_sums.setdefault(rank, []).append(rec.completion - rec.arrival)
        rows.append((rec.transfer_id, rec.receiver, rank, rec.arrival, rec.completion))
    rank_means = {rank: float(np.mean(v)) for rank, v in sorted(rank_sums.items())}
    if len(durations):
        mean = float(durations.mean())
        tail = float(np.percentile(durations, 99.9))
    else:
        mean = float("nan")
        tail = float("nan")
    return {
        "receivers": len(records),
        "mean_completion": mean,
        "tail_completion": tail,
        "total_bandwidth": state.bandwidth_units,
        "rank_means": rank_means,
        "cdf": tuple(float(x) for x in np.sort(durations)),
        "records": tuple(rows),
    }
