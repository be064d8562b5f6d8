"""Chunked advance vs. per-slot reference: they must tell the same story."""
from __future__ import annotations

import numpy as np
import pytest

from bulkcast.model import Edge, Topology, UserTrafficProfile, available_bandwidth
from bulkcast.rates import EPS, TreeDemand, maxmin_rates
from bulkcast.waterfill import advance_active_trees
from helpers import constant_profile, make_topology


def run_advance_to_completion(edge_by_id, trees, t_start, delta=1.0, t_limit=None):
    """Drive advance_active_trees until every tree finishes."""
    active = {k: [edges, res] for k, edges, res in trees}
    done = {}
    delivered = {k: 0.0 for k in active}
    t = t_start
    while active:
        batch = [(k, v[0], v[1]) for k, v in sorted(active.items())]
        out = advance_active_trees(edge_by_id, batch, t, t_limit, delta=delta)
        for k, amount in out.delivered.items():
            delivered[k] += amount
        for k in out.finished:
            done[k] = out.t_end
            del active[k]
        for k in list(active):
            active[k][1] = out.residuals[k]
        if not out.finished:
            raise AssertionError("hit t_limit before completion")
        t = out.t_end + 1
    return done, delivered


def scalar_reference(edge_by_id, trees, t_start, delta=1.0, max_slots=1_000_000):
    """Slot-by-slot capped max-min simulation."""
    residual = {k: float(r) for k, _, r in trees}
    edges = {k: e for k, e, _ in trees}
    done = {}
    delivered = {k: 0.0 for k in residual}
    t = t_start
    while len(done) < len(residual):
        assert t < t_start + max_slots
        active = sorted(k for k in residual if k not in done)
        bw = {}
        for k in active:
            for eid in edges[k]:
                bw[eid] = available_bandwidth(edge_by_id[eid], t)
        demands = [TreeDemand(k, edges[k], cap=residual[k] / delta) for k in active]
        snap = maxmin_rates(demands, bw, timeslot=t)
        for k in active:
            got = snap.rates[k] * delta
            delivered[k] += got
            residual[k] -= got
            if residual[k] <= EPS:
                residual[k] = 0.0
                done[k] = t
        t += 1
    return done, delivered


class TestHandCases:
    def test_constant_bottleneck_completes_in_two_slots(self):
        topo = make_topology([("s", "t", 5.0)], frac=0.0)
        done, delivered = run_advance_to_completion(
            topo.edge_by_id, [("T", (0,), 10.0)], t_start=1
        )
        assert done == {"T": 2}
        assert delivered["T"] == pytest.approx(10.0, abs=1e-9)

    def test_finishing_tree_frees_share_same_slot(self):
        topo = make_topology([("s", "t", 4.0)], frac=0.0)
        trees = [("A", (0,), 1.0), ("B", (0,), 100.0)]
        out = advance_active_trees(topo.edge_by_id, trees, 1, None)
        assert out.finished == ("A",)
        assert out.t_end == 1
        assert out.delivered["A"] == pytest.approx(1.0, abs=1e-9)
        assert out.delivered["B"] == pytest.approx(3.0, abs=1e-9)  # A's leftover

    def test_t_limit_stops_without_completion(self):
        topo = make_topology([("s", "t", 2.0)], frac=0.0)
        out = advance_active_trees(topo.edge_by_id, [("T", (0,), 1000.0)], 1, 10)
        assert out.finished == ()
        assert out.t_end == 10
        assert out.delivered["T"] == pytest.approx(20.0, abs=1e-9)
        assert out.residuals["T"] == pytest.approx(980.0, abs=1e-9)

    def test_completion_at_chunk_boundary(self):
        topo = make_topology([("s", "t", 1.0)], frac=0.0)
        done, _ = run_advance_to_completion(topo.edge_by_id, [("T", (0,), 256.0)], 1)
        assert done == {"T": 256}
        done, _ = run_advance_to_completion(topo.edge_by_id, [("T", (0,), 256.5)], 1)
        assert done == {"T": 257}

    def test_bandwidth_units_track_tree_size(self):
        topo = make_topology([("s", "m", 3.0), ("m", "t", 3.0)], frac=0.0)
        out = advance_active_trees(topo.edge_by_id, [("T", (0, 1), 6.0)], 1, None)
        assert out.t_end == 2
        assert out.bandwidth_units == pytest.approx(12.0, abs=1e-9)


def random_wave_instance(rng, n_edges_hi=7, n_trees_hi=5):
    n_edges = int(rng.integers(2, n_edges_hi))
    edges = []
    for eid in range(n_edges):
        period = int(rng.integers(10, 101))
        profile = UserTrafficProfile(period=period, phase=int(rng.integers(0, period)))
        cap = float(np.round(rng.uniform(0.2, 3.0), 3))
        edges.append(Edge(eid, f"a{eid}", f"b{eid}", cap, profile))
    nodes = tuple({e.src for e in edges} | {e.dst for e in edges})
    topo = Topology(nodes=tuple(sorted(nodes)), edges=tuple(edges))
    n_trees = int(rng.integers(1, n_trees_hi))
    trees = []
    for k in range(n_trees):
        size = int(rng.integers(1, min(3, n_edges) + 1))
        eids = tuple(sorted(rng.choice(n_edges, size=size, replace=False).tolist()))
        res = float(np.round(rng.uniform(0.5, 120.0), 3))
        trees.append((f"T{k}", eids, res))
    return topo, trees


class TestEquivalenceWithPerSlotReference:
    def test_completion_slots_and_delivered_match(self):
        rng = np.random.default_rng(2024)
        for _ in range(40):
            topo, trees = random_wave_instance(rng)
            fast_done, fast_del = run_advance_to_completion(topo.edge_by_id, trees, 1)
            slow_done, slow_del = scalar_reference(topo.edge_by_id, trees, 1)
            assert fast_done == slow_done
            for k, _, res in trees:
                assert fast_del[k] == pytest.approx(res, abs=1e-6)
                assert slow_del[k] == pytest.approx(res, abs=1e-6)

    def test_deterministic_rerun(self):
        rng = np.random.default_rng(5)
        topo, trees = random_wave_instance(rng)
        a = run_advance_to_completion(topo.edge_by_id, trees, 1)
        b = run_advance_to_completion(topo.edge_by_id, trees, 1)
        assert a == b
