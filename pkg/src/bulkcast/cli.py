"""Command-line entry points: sim, topo, trace."""
from __future__ import annotations

import argparse
import json
import sys

from .gml import convert_gml_file
from .harness import compute_lower_bound, load_scenario, resolve_topology, run_scenario
from .model import ObjectiveVector
from .workload import WorkloadSpec, gen_trace, write_trace


def _fail(exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return 1


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sim", description="Run transfer simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, blurb in (
        ("run", "simulate every (scheduler, seed) pair and emit CSV reports"),
        ("bound", "emit per-receiver completion lower bounds beside realized times"),
    ):
        p = sub.add_parser(cmd, help=blurb)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "run":
            result = run_scenario(scenario)
        else:
            result = compute_lower_bound(scenario)
    except Exception as exc:  # any module failure means a nonzero exit
        return _fail(exc)
    for path in result["files"]:
        print(path)
    return 0


def topo_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="topo", description="Topology utilities.")
    sub = parser.add_subparsers(dest="command", required=True)
    conv = sub.add_parser("convert", help="convert a GML graph to topology JSON")
    conv.add_argument("--gml", required=True, help="input GML file")
    conv.add_argument("--out", required=True, help="output JSON file")
    conv.add_argument(
        "--default-gbps",
        type=float,
        default=None,
        help="capacity for links without speed attributes",
    )
    args = parser.parse_args(argv)
    try:
        doc = convert_gml_file(args.gml, args.out, default_gbps=args.default_gbps)
    except Exception as exc:
        return _fail(exc)
    print(f"{args.out}: {len(doc['nodes'])} nodes, {len(doc['edges'])} links")
    return 0


def trace_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="trace", description="Workload generation.")
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("gen", help="generate a transfer trace CSV")
    gen.add_argument("--spec", required=True, help="workload spec JSON file")
    gen.add_argument("--out", required=True, help="output trace CSV")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as fh:
            doc = json.load(fh)
        topology = resolve_topology(str(doc.get("topology", "geant34")))
        spec = WorkloadSpec(
            arrival_rate=float(doc["arrival_rate"]),
            count=int(doc["count"]),
            volume_dist=str(doc["volume_dist"]),
            receivers_per_transfer=int(doc["receivers_per_transfer"]),
            objective_vector=ObjectiveVector.from_string(str(doc["objective_vector"])),
            seed=int(doc["seed"]),
            volume_file=doc.get("volume_file"),
        )
        trace = gen_trace(spec, topology)
        write_trace(trace, args.out)
    except Exception as exc:
        return _fail(exc)
    print(f"{args.out}: {len(trace)} transfers")
    return 0
