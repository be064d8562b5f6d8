"""Max-min fair rate allocation across forwarding trees (progressive filling).

Each tree claims one rate applied on every edge it crosses. Rates rise together;
a tree freezes when an edge it uses saturates or when it hits its demand cap
(residual volume per timeslot). Freed shares keep filling the rest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

EPS = 1e-9


@dataclass(frozen=True)
class TreeDemand:
    """One active tree: identity, edges crossed, per-timeslot demand cap."""

    tree_id: str
    edges: tuple
    cap: float = math.inf

    def __post_init__(self) -> None:
        if not self.edges:
            raise ValueError(f"tree {self.tree_id}: needs at least one edge")
        if self.cap < 0:
            raise ValueError(f"tree {self.tree_id}: negative demand cap")


@dataclass(frozen=True)
class RateSnapshot:
    """Per-tree rates for one timeslot."""

    timeslot: int
    rates: Mapping[str, float] = field(default_factory=dict)


def maxmin_rates(
    demands: Sequence[TreeDemand],
    bandwidths: Mapping[int, float],
    timeslot: int = 0,
) -> RateSnapshot:
    """Progressive-filling max-min rates for ``demands`` against ``bandwidths``.

    Deterministic for a fixed demand order. Raises KeyError when a tree crosses
    an edge missing from ``bandwidths``.
    """
    rates = {d.tree_id: 0.0 for d in demands}
    if len(rates) != len(demands):
        raise ValueError("duplicate tree ids in demands")
    if not demands:
        return RateSnapshot(timeslot=timeslot, rates=rates)

    remaining = {}
    count = {}
    for d in demands:
        for eid in d.edges:
            if eid not in remaining:
                remaining[eid] = float(bandwidths[eid])
                count[eid] = 0
            count[eid] += 1
    edge_order = sorted(remaining)

    active = list(demands)

    def freeze_pass() -> None:
        nonlocal active
        still = []
        for d in active:
            saturated = any(remaining[eid] <= EPS for eid in d.edges)
            capped = rates[d.tree_id] >= d.cap - EPS
            if saturated or capped:
                for eid in d.edges:
                    count[eid] -= 1
            else:
                still.append(d)
        active = still

    freeze_pass()  # zero-bandwidth edges and zero caps freeze immediately
    while active:
        lam = math.inf
        for eid in edge_order:
            if count[eid] > 0:
                share = remaining[eid] / count[eid]
                if share < lam:
                    lam = share
        for d in active:
            gap = d.cap - rates[d.tree_id]
            if gap < lam:
                lam = gap
        lam = max(lam, 0.0)
        for d in active:
            rates[d.tree_id] += lam
        for eid in edge_order:
            if count[eid] > 0:
                remaining[eid] -= lam * count[eid]
        before = len(active)
        freeze_pass()
        if len(active) == before:  # guard: lam always saturates an edge or a cap
            raise RuntimeError("progressive filling failed to converge")

    _assert_feasible(demands, bandwidths, rates)
    return RateSnapshot(timeslot=timeslot, rates=rates)


def _assert_feasible(demands, bandwidths, rates) -> None:
    used: dict = {}
    for d in demands:
        r = rates[d.tree_id]
        for eid in d.edges:
            used[eid] = used.get(eid, 0.0) + r
    for eid, u in used.items():
        if u > bandwidths[eid] + EPS:
            raise RuntimeError(
                f"capacity violated on edge {eid}: {u} > {bandwidths[eid]}"
            )
