"""Scenario orchestration: batch runs, CSV emission, lower-bound reports.

A scenario JSON binds one topology, one workload spec, scheduler names, and
seeds. Each (scheduler, seed) pair simulates independently: the seed drives
both the user-traffic profiles and the trace, so schedulers face identical
conditions within a seed. Results merge in sorted (scheduler, seed) order
regardless of worker count.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .engine import SimState, metrics, run_trace
from .model import (
    ObjectiveVector,
    bundled_topology_path,
    load_topology,
    with_user_traffic,
)
from .star import lower_bound_completions
from .workload import WorkloadSpec, gen_trace

BASELINE = "single-tree-load-aware"

COMPLETIONS_HEADER = ["transfer_id", "receiver", "rank", "arrival", "completion", "scheduler", "seed"]
METRICS_HEADER = [
    "scenario", "scheduler", "seed", "receivers",
    "mean_completion", "tail_completion", "total_bandwidth",
]
SUMMARY_HEADER = ["scenario", "scheduler", "rank", "mean_completion", "speedup_vs_baseline"]


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: str
    workload: dict
    schedulers: tuple
    seeds: tuple
    output_dir: str
    estimate_horizon: int = 10 ** 6

    def __post_init__(self) -> None:
        if not self.schedulers:
            raise ValueError("scenario needs at least one scheduler")
        if not self.seeds:
            raise ValueError("scenario needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if self.estimate_horizon < 1:
            raise ValueError("estimate_horizon must be positive")


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return Scenario(
            name=str(doc["name"]),
            topology=str(doc["topology"]),
            workload=dict(doc["workload"]),
            schedulers=tuple(doc["schedulers"]),
            seeds=tuple(int(s) for s in doc["seeds"]),
            output_dir=str(doc["output_dir"]),
            estimate_horizon=int(doc.get("estimate_horizon", 10 ** 6)),
        )
    except KeyError as exc:
        raise ValueError(f"scenario file {path} missing field {exc}") from exc


def resolve_topology(ref: str):
    """A bundled name like 'geant34', or a path to a topology JSON file."""
    if os.sep not in ref and not ref.endswith(".json"):
        return load_topology(bundled_topology_path(ref))
    return load_topology(ref)


def workload_spec(scenario: Scenario, seed: int) -> WorkloadSpec:
    w = scenario.workload
    return WorkloadSpec(
        arrival_rate=float(w["arrival_rate"]),
        count=int(w["count"]),
        volume_dist=str(w["volume_dist"]),
        receivers_per_transfer=int(w["receivers_per_transfer"]),
        objective_vector=ObjectiveVector.from_string(str(w["objective_vector"])),
        seed=seed,
        volume_file=w.get("volume_file"),
    )


def simulate_run(scenario: Scenario, scheduler: str, seed: int) -> dict:
    """One drained simulation; returns the engine metrics report."""
    base = resolve_topology(scenario.topology)
    topo = with_user_traffic(base, seed)
    trace = gen_trace(workload_spec(scenario, seed), topo)
    state = SimState(topology=topo, estimate_horizon=scenario.estimate_horizon)
    run_trace(state, trace, scheduler)
    return metrics(state)


def _run_pair(args) -> tuple:
    scenario, scheduler, seed = args
    return scheduler, seed, simulate_run(scenario, scheduler, seed)


def _pool_size() -> int:
    env = os.environ.get("SIM_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _map_runs(scenario: Scenario, pairs, workers=None) -> list:
    jobs = [(scenario, sched, seed) for sched, seed in pairs]
    n = workers if workers is not None else _pool_size()
    if n <= 1 or len(jobs) <= 1:
        results = [_run_pair(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            results = list(pool.map(_run_pair, jobs))
    return sorted(results, key=lambda r: (r[0], r[1]))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def run_scenario(scenario: Scenario, workers=None) -> dict:
    """Simulate every (scheduler, seed) pair and emit the report CSVs.

    Returns {"metrics": rows, "summary": rows, "files": [paths]} for callers
    that want the numbers without re-reading the CSVs.
    """
    out = Path(scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _map_runs(scenario, [(s, seed) for s in scenario.schedulers for seed in scenario.seeds], workers)

    files = []
    metric_rows = []
    durations: dict = {}  # scheduler -> rank -> [durations]; rank 0 pools all
    for scheduler, seed, report in results:
        log = out / f"completions_{scheduler}_{seed}.csv"
        _write_csv(
            log,
            COMPLETIONS_HEADER,
            [list(row) + [scheduler, seed] for row in report["records"]],
        )
        files.append(str(log))
        metric_rows.append(
            [
                scenario.name, scheduler, seed, report["receivers"],
                _fmt(report["mean_completion"]), _fmt(report["tail_completion"]),
                _fmt(report["total_bandwidth"]),
            ]
        )
        per = durations.setdefault(scheduler, {})
        for _, _, rank, arrival, completion in report["records"]:
            per.setdefault(rank, []).append(completion - arrival)
            per.setdefault(0, []).append(completion - arrival)

    metrics_path = out / "metrics.csv"
    _write_csv(metrics_path, METRICS_HEADER, metric_rows)
    files.append(str(metrics_path))

    summary_rows = []
    base_means = {}
    if BASELINE in durations:
        base_means = {r: sum(v) / len(v) for r, v in durations[BASELINE].items()}
    for scheduler in scenario.schedulers:
        for rank in sorted(durations.get(scheduler, {})):
            vals = durations[scheduler][rank]
            mean = sum(vals) / len(vals)
            speedup = ""
            if rank in base_means and mean > 0:
                speedup = _fmt(base_means[rank] / mean)
            summary_rows.append(
                [scenario.name, scheduler, "all" if rank == 0 else rank, _fmt(mean), speedup]
            )
    summary_path = out / "summary.csv"
    _write_csv(summary_path, SUMMARY_HEADER, summary_rows)
    files.append(str(summary_path))
    return {"metrics": metric_rows, "summary": summary_rows, "files": files}


def _bound_pair(args) -> tuple:
    scenario, seed = args
    base = resolve_topology(scenario.topology)
    topo = with_user_traffic(base, seed)
    trace = gen_trace(workload_spec(scenario, seed), topo)
    return seed, lower_bound_completions(topo, trace)


def compute_lower_bound(scenario: Scenario, workers=None) -> dict:
    """Per-receiver completion bounds next to each scheduler's realized times."""
    out = Path(scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = _map_runs(scenario, [(s, seed) for s in scenario.schedulers for seed in scenario.seeds], workers)
    realized: dict = {}
    for scheduler, seed, report in runs:
        for tid, receiver, _, _, completion in report["records"]:
            realized[(seed, tid, receiver, scheduler)] = completion

    n = workers if workers is not None else _pool_size()
    jobs = [(scenario, seed) for seed in scenario.seeds]
    if n <= 1 or len(jobs) <= 1:
        bounds = [_bound_pair(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            bounds = list(pool.map(_bound_pair, jobs))

    sched_cols = [f"realized_{s.replace('-', '_')}" for s in scenario.schedulers]
    header = ["transfer_id", "receiver", "arrival", "bound"] + sched_cols
    files = []
    all_rows = {}
    for seed, rows in sorted(bounds):
        table = []
        for tid, receiver, arrival, completion in sorted(rows):
            rec = [tid, receiver, arrival, completion]
            rec += [realized[(seed, tid, receiver, s)] for s in scenario.schedulers]
            table.append(rec)
        path = out / f"bounds_{seed}.csv"
        _write_csv(path, header, table)
        files.append(str(path))
        all_rows[seed] = table
    return {"bounds": all_rows, "files": files, "header": header}
