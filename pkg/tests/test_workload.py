"""Trace generation: arrival statistics, volume distributions, CSV round-trip."""
import numpy as np
import pytest

from bulkcast.model import ObjectiveVector, load_bundled_topology
from bulkcast.workload import (
    PARETO_CAP,
    PARETO_X_MIN,
    WorkloadSpec,
    gen_trace,
    read_trace,
    truncated_pareto_shape,
    write_trace,
)

from helpers import make_topology


def spec(**kw):
    base = dict(
        arrival_rate=1.0,
        count=200,
        volume_dist="heavy-tailed",
        receivers_per_transfer=4,
        objective_vector=ObjectiveVector.from_string("1111"),
        seed=7,
    )
    base.update(kw)
    return WorkloadSpec(**base)


@pytest.mark.parametrize(
    "kw",
    [
        dict(arrival_rate=0.0),
        dict(count=0),
        dict(volume_dist="uniform"),
        dict(receivers_per_transfer=0),
        dict(volume_dist="empirical"),  # missing file
        dict(objective_vector=ObjectiveVector.from_string("11")),  # wrong length
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        spec(**kw)


def test_truncated_pareto_mean_is_twenty():
    a = truncated_pareto_shape()
    rng = np.random.default_rng(1)
    draws = np.minimum(PARETO_X_MIN * (1.0 - rng.random(100_000)) ** (-1.0 / a), PARETO_CAP)
    assert draws.mean() == pytest.approx(20.0, rel=0.02)


def test_heavy_tailed_volumes_bounded_and_centered():
    topo = load_bundled_topology()
    reqs = gen_trace(spec(count=100_000, arrival_rate=5.0), topo)
    vols = np.array([r.volume for r in reqs])
    assert vols.min() >= PARETO_X_MIN
    assert vols.max() <= PARETO_CAP
    assert vols.mean() == pytest.approx(20.0, rel=0.10)


def test_light_tailed_volumes_centered():
    topo = load_bundled_topology()
    reqs = gen_trace(spec(count=100_000, arrival_rate=5.0, volume_dist="light-tailed"), topo)
    vols = np.array([r.volume for r in reqs])
    assert vols.mean() == pytest.approx(20.0, rel=0.05)


def test_poisson_interarrival_mean():
    topo = load_bundled_topology()
    reqs = gen_trace(spec(count=200, arrival_rate=1.0), topo)
    assert len(reqs) == 200
    arrivals = np.array([r.arrival for r in reqs])
    assert (np.diff(arrivals) >= 0).all()
    gaps_mean = arrivals[-1] / (len(arrivals) - 1)
    assert gaps_mean == pytest.approx(1.0, rel=0.15)


def test_sources_round_robin_and_receivers_clean():
    topo = load_bundled_topology()
    reqs = gen_trace(spec(count=68), topo)  # 2 * 34 nodes
    counts = {}
    for r in reqs:
        counts[r.source] = counts.get(r.source, 0) + 1
        assert r.source not in r.receivers
        assert len(set(r.receivers)) == len(r.receivers) == 4
    assert set(counts.values()) == {2}


def test_trace_is_deterministic_under_seed():
    topo = load_bundled_topology()
    a = gen_trace(spec(seed=42), topo)
    b = gen_trace(spec(seed=42), topo)
    c = gen_trace(spec(seed=43), topo)
    assert a == b
    assert a != c


def test_receiver_count_must_fit_topology():
    topo = make_topology([("s", "a", 1.0), ("a", "s", 1.0)], frac=0.0)
    with pytest.raises(ValueError, match="nodes"):
        gen_trace(spec(receivers_per_transfer=4), topo)


def test_empirical_volumes_sampled_from_file(tmp_path):
    f = tmp_path / "vols.txt"
    f.write_text("5.0\n7.5\n30.0\n")
    topo = load_bundled_topology()
    reqs = gen_trace(spec(volume_dist="empirical", volume_file=str(f), count=50), topo)
    assert {r.volume for r in reqs} <= {5.0, 7.5, 30.0}


def test_empirical_volume_file_must_be_positive(tmp_path):
    f = tmp_path / "vols.txt"
    f.write_text("5.0\n-1.0\n")
    topo = load_bundled_topology()
    with pytest.raises(ValueError, match="positive"):
        gen_trace(spec(volume_dist="empirical", volume_file=str(f), count=5), topo)


def test_trace_csv_round_trip(tmp_path):
    topo = load_bundled_topology()
    reqs = gen_trace(spec(count=40, objective_vector=ObjectiveVector.from_string("1010")), topo)
    path = tmp_path / "trace.csv"
    write_trace(reqs, str(path))
    back = read_trace(str(path))
    assert back == reqs
    # byte determinism of the emitted file
    path2 = tmp_path / "trace2.csv"
    write_trace(reqs, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_trace_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_trace(str(path))
