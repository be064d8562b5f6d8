"""Scenario orchestration: CSV contracts, determinism, bound reports."""
import csv
import json
from pathlib import Path

import pytest

from bulkcast.harness import (
    BASELINE,
    COMPLETIONS_HEADER,
    METRICS_HEADER,
    SUMMARY_HEADER,
    Scenario,
    compute_lower_bound,
    load_scenario,
    resolve_topology,
    run_scenario,
)
from bulkcast.model import bundled_topology_path

WORKLOAD = {
    "arrival_rate": 1.0,
    "count": 6,
    "volume_dist": "light-tailed",
    "receivers_per_transfer": 3,
    "objective_vector": "100",
}


def _scenario(output_dir, schedulers=(BASELINE, "unicast-sp"), seeds=(1, 2)):
    return Scenario(
        name="smoke",
        topology="geant34",
        workload=dict(WORKLOAD),
        schedulers=tuple(schedulers),
        seeds=tuple(seeds),
        output_dir=str(output_dir),
    )


def _read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture(scope="module")
def run_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    scenario = _scenario(out)
    return scenario, run_scenario(scenario, workers=1)


def test_scenario_validation():
    with pytest.raises(ValueError, match="at least one scheduler"):
        _scenario("x", schedulers=())
    with pytest.raises(ValueError, match="at least one seed"):
        _scenario("x", seeds=())
    with pytest.raises(ValueError, match="duplicate seeds"):
        _scenario("x", seeds=(3, 3))


def test_load_scenario_round_trip(tmp_path):
    path = tmp_path / "scenario.json"
    doc = {
        "name": "smoke",
        "topology": "geant34",
        "workload": WORKLOAD,
        "schedulers": [BASELINE],
        "seeds": [5],
        "output_dir": str(tmp_path / "out"),
    }
    path.write_text(json.dumps(doc))
    scenario = load_scenario(str(path))
    assert scenario.name == "smoke"
    assert scenario.schedulers == (BASELINE,)
    assert scenario.seeds == (5,)


def test_load_scenario_missing_field(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ValueError, match="missing field"):
        load_scenario(str(path))


def test_resolve_topology_bundled_and_path():
    by_name = resolve_topology("geant34")
    by_path = resolve_topology(str(bundled_topology_path("geant34")))
    assert by_name.nodes == by_path.nodes
    assert len(by_name.edges) == len(by_path.edges)


def test_run_scenario_emits_expected_files(run_result):
    scenario, result = run_result
    out = Path(scenario.output_dir)
    expected = {
        f"completions_{s}_{seed}.csv"
        for s in scenario.schedulers
        for seed in scenario.seeds
    } | {"metrics.csv", "summary.csv"}
    assert {Path(p).name for p in result["files"]} == expected
    for p in result["files"]:
        assert Path(p).exists()
    assert all(Path(p).parent == out for p in result["files"])


def test_completions_log_contract(run_result):
    scenario, _ = run_result
    path = Path(scenario.output_dir) / f"completions_{BASELINE}_1.csv"
    header, rows = _read(path)
    assert header == COMPLETIONS_HEADER
    # 6 transfers x 3 receivers, tagged with scheduler and seed.
    assert len(rows) == 18
    assert {r[5] for r in rows} == {BASELINE}
    assert {r[6] for r in rows} == {"1"}
    ranks = {r[2] for r in rows}
    assert ranks == {"1", "2", "3"}


def test_metrics_table_contract(run_result):
    scenario, result = run_result
    header, rows = _read(Path(scenario.output_dir) / "metrics.csv")
    assert header == METRICS_HEADER
    assert len(rows) == len(scenario.schedulers) * len(scenario.seeds)
    assert rows == [[str(c) for c in row] for row in result["metrics"]]
    for row in rows:
        assert row[0] == "smoke"
        assert int(row[3]) == 18
        assert float(row[4]) > 0


def test_summary_baseline_speedup_is_one(run_result):
    scenario, _ = run_result
    header, rows = _read(Path(scenario.output_dir) / "summary.csv")
    assert header == SUMMARY_HEADER
    by_sched = {}
    for row in rows:
        by_sched.setdefault(row[1], []).append(row)
    assert set(by_sched) == set(scenario.schedulers)
    for row in by_sched[BASELINE]:
        assert float(row[4]) == pytest.approx(1.0)
    # Rank column: pooled "all" row first, then per-rank rows.
    assert [r[2] for r in by_sched[BASELINE]] == ["all", "1", "2", "3"]
    for row in by_sched["unicast-sp"]:
        assert row[4] != ""  # baseline present, so every speedup is filled


def test_rerun_is_byte_identical(run_result, tmp_path):
    scenario, _ = run_result
    again = _scenario(tmp_path / "again")
    run_scenario(again, workers=1)
    for name in [p.name for p in Path(scenario.output_dir).iterdir()]:
        first = (Path(scenario.output_dir) / name).read_bytes()
        second = (Path(again.output_dir) / name).read_bytes()
        assert first == second, name


def test_worker_pool_matches_serial(run_result, tmp_path):
    _, serial = run_result
    pooled = run_scenario(_scenario(tmp_path / "pool"), workers=2)
    assert pooled["metrics"] == serial["metrics"]
    assert pooled["summary"] == serial["summary"]


def test_lower_bound_report(tmp_path):
    scenario = _scenario(tmp_path / "bounds", seeds=(1,))
    result = compute_lower_bound(scenario, workers=1)
    assert result["header"] == [
        "transfer_id",
        "receiver",
        "arrival",
        "bound",
        "realized_single_tree_load_aware",
        "realized_unicast_sp",
    ]
    path = Path(scenario.output_dir) / "bounds_1.csv"
    assert result["files"] == [str(path)]
    header, rows = _read(path)
    assert header == result["header"]
    assert len(rows) == 18
    for row in rows:
        bound = int(row[3])
        assert bound >= int(row[2]) + 1  # at least one slot after arrival
        assert bound <= int(row[4])
        assert bound <= int(row[5])
    assert result["bounds"][1] == [
        [r[0], r[1], int(r[2]), int(r[3]), int(r[4]), int(r[5])] for r in rows
    ]
