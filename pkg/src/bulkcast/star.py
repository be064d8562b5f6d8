"""Receiver partitioning on a relaxed star topology, plus analytic oracles.

The relaxation replaces the network by one uplink at the source and one
downlink per receiver. A partitioning groups receivers; a group is served at
one rate, capped by its slowest member's downlink, with the uplink shared
max-min across groups. Consecutive groupings (contiguous runs of the
rate-sorted receivers) are Pareto-optimal, so sweeps and oracles enumerate in
that order; the all-set-partitions oracle exists to verify exactly that claim.

All evaluation arithmetic runs in exact Fractions so "same optimum value"
comparisons between enumeration modes are meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class InstanceTooLargeError(ValueError):
    """Enumeration requested beyond the guarded instance size."""


@dataclass(frozen=True)
class StarInstance:
    """Uplink rate, receiver downlink rates (stored fastest-first), volume."""

    uplink_rate: float
    downlink_rates: tuple
    volume: float

    def __post_init__(self) -> None:
        if self.uplink_rate <= 0:
            raise ValueError("uplink rate must be > 0")
        if not self.downlink_rates:
            raise ValueError("need at least one downlink")
        if any(r <= 0 for r in self.downlink_rates):
            raise ValueError("downlink rates must be > 0")
        if self.volume <= 0:
            raise ValueError("volume must be > 0")
        ordered = tuple(sorted(self.downlink_rates, reverse=True))
        object.__setattr__(self, "downlink_rates", ordered)

    @property
    def n(self) -> int:
        return len(self.downlink_rates)


@dataclass(frozen=True)
class StarPartitioning:
    """Groups of receiver indices with their allocated rates."""

    groups: tuple  # tuple of tuples of 0-based receiver indices
    rates: tuple
    mean_completion: float


def _check_groups(n: int, groups: Sequence) -> None:
    seen = [i for g in groups for i in g]
    if sorted(seen) != list(range(n)) or any(len(g) == 0 for g in groups):
        raise ValueError(f"groups must partition 0..{n - 1}: {groups}")


def star_maxmin_rates(instance: StarInstance, groups: Sequence) -> tuple:
    """Max-min rates per group: uplink water-filled, capped by slowest member.

    Works unchanged on float or Fraction instances (pure +-*/ arithmetic).
    """
    _check_groups(instance.n, groups)
    caps = [min(instance.downlink_rates[i] for i in g) for g in groups]
    order = sorted(range(len(groups)), key=lambda gi: (caps[gi], gi))
    remaining = instance.uplink_rate
    rates = [None] * len(groups)
    left = len(groups)
    for gi in order:
        share = remaining / left
        r = caps[gi] if caps[gi] <= share else share
        rates[gi] = r
        remaining = remaining - r
        left -= 1
    return tuple(rates)


def mean_completion_time(instance: StarInstance, groups: Sequence, rates=None):
    """Mean over receivers of volume / group rate."""
    if rates is None:
        rates = star_maxmin_rates(instance, groups)
    total = 0
    for g, r in zip(groups, rates):
        if r == 0:
            return math.inf
        total = total + len(g) * (instance.volume / r)
    return total / instance.n


def _exact(instance: StarInstance) -> StarInstance:
    return StarInstance(
        uplink_rate=Fraction(instance.uplink_rate),
        downlink_rates=tuple(Fraction(r) for r in instance.downlink_rates),
        volume=Fraction(instance.volume),
    )


def _as_partitioning(instance: StarInstance, groups) -> StarPartitioning:
    rates = star_maxmin_rates(instance, groups)
    value = mean_completion_time(instance, groups, rates)
    return StarPartitioning(
        groups=tuple(tuple(g) for g in groups),
        rates=tuple(float(r) for r in rates),
        mean_completion=float(value),
    )


def isolate_sweep(instance: StarInstance) -> StarPartitioning:
    """Sweep M = 1..n: one group of the n-M+1 fastest plus M-1 slow singletons.

    Minimizes mean completion time; ties go to fewer partitions (smaller M).
    """
    exact = _exact(instance)
    n = exact.n
    best = None
    for m in range(1, n + 1):
        groups = [tuple(range(n - m + 1))]
        groups += [(i,) for i in range(n - m + 1, n)]
        value = mean_completion_time(exact, groups)
        if best is None or value < best[0]:
            best = (value, groups)
    return _as_partitioning(exact, best[1])


def _compositions(n: int):
    """Consecutive groupings of 0..n-1, by boundary bitmask (deterministic)."""
    for mask in range(1 << (n - 1)):
        groups = []
        start = 0
        for b in range(n - 1):
            if mask & (1 << b):
                groups.append(tuple(range(start, b + 1)))
                start = b + 1
        groups.append(tuple(range(start, n)))
        yield groups


def _set_partitions(n: int):
    """All partitions of 0..n-1 in restricted-growth order."""

    def rec(i, blocks):
        if i == n:
            yield [tuple(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def brute_force_optimal(instance: StarInstance, mode: str = "consecutive") -> StarPartitioning:
    """Exhaustive minimum of mean completion time.

    mode "consecutive": 2^(n-1) compositions, guarded to n <= 12.
    mode "all-set-partitions": every partition (Bell(n)), guarded to n <= 8.
    Ties prefer fewer groups, then the enumeration-first candidate.
    """
    exact = _exact(instance)
    n = exact.n
    if mode == "consecutive":
        if n > 12:
            raise InstanceTooLargeError(f"consecutive enumeration limited to n<=12, got {n}")
        candidates = _compositions(n)
    elif mode == "all-set-partitions":
        if n > 8:
            raise InstanceTooLargeError(f"set-partition enumeration limited to n<=8, got {n}")
        candidates = _set_partitions(n)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    best = None
    for groups in candidates:
        value = mean_completion_time(exact, groups)
        key = (value, len(groups))
        if best is None or key < best[0]:
            best = (key, groups)
    return _as_partitioning(exact, best[1])


def optimal_partitioning(instance: StarInstance) -> StarPartitioning:
    """Best relaxed partitioning: exact for n <= 12, sweep beyond."""
    if instance.n <= 12:
        return brute_force_optimal(instance, "consecutive")
    return isolate_sweep(instance)


def lower_bound_completions(topology, requests: Iterable, delta: float = 1.0):
    """Per-receiver completion lower bounds via the aggregated star network.

    Each receiver is timeslotted alone against min(source aggregate uplink,
    receiver aggregate downlink) availability from its arrival. Physical
    capacities sum to the aggregate's, and grouping, tree sharing, and
    contention can only slow a receiver down, so no schedule beats these
    values per receiver. Returns (transfer_id, receiver, arrival, completion)
    tuples in trace order.
    """
    from .model import HUB, aggregate_topology
    from .waterfill import advance_active_trees

    agg = aggregate_topology(topology)
    uplinks = {e.src: e.id for e in agg.edges if e.dst == HUB}
    downlinks = {e.dst: e.id for e in agg.edges if e.src == HUB}
    out = []
    for req in requests:
        for receiver in sorted(req.receivers):
            stream = (
                (req.id, receiver),
                (uplinks[req.source], downlinks[receiver]),
                req.volume,
            )
            result = advance_active_trees(
                agg.edge_by_id, [stream], req.arrival + 1, None, delta
            )
            out.append((req.id, receiver, req.arrival, result.t_end))
    return out
