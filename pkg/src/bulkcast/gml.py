"""GML topology import: map network-zoo style graphs onto the JSON schema.

Link capacities come from, in order of preference: LinkSpeedRaw (bits/s),
LinkSpeed with LinkSpeedUnits (G/M/K), or a caller-supplied default. Parallel
links between the same node pair sum their capacities.
"""
from __future__ import annotations

import json

import networkx as nx

_UNIT_GBPS = {"G": 1.0, "M": 1e-3, "K": 1e-6}


class GmlError(ValueError):
    pass


def _edge_gbps(data: dict, default_gbps) -> float:
    raw = data.get("LinkSpeedRaw")
    if raw is not None:
        gbps = float(raw) / 1e9
        if gbps > 0:
            return gbps
    speed = data.get("LinkSpeed")
    if speed is not None:
        unit = str(data.get("LinkSpeedUnits", "G")).upper()[:1]
        if unit not in _UNIT_GBPS:
            raise GmlError(f"unknown LinkSpeedUnits {data.get('LinkSpeedUnits')!r}")
        gbps = float(speed) * _UNIT_GBPS[unit]
        if gbps > 0:
            return gbps
    if default_gbps is not None and default_gbps > 0:
        return float(default_gbps)
    raise GmlError(
        f"edge has no usable speed attributes {sorted(data)} and no default given"
    )


def convert_gml(gml_text: str, default_gbps=None, name: str = "converted") -> dict:
    """Topology JSON document for a GML graph."""
    try:
        graph = nx.parse_gml(gml_text, label="label")
    except Exception as exc:
        raise GmlError(f"GML parse failed: {exc}") from exc
    if graph.number_of_nodes() == 0:
        raise GmlError("GML graph has no nodes")
    nodes = sorted(str(n) for n in graph.nodes)
    if len(set(nodes)) != len(nodes):
        raise GmlError("node labels collide after string conversion")
    directed = graph.is_directed()
    merged: dict = {}
    for u, v, data in graph.edges(data=True):
        su, sv = str(u), str(v)
        if su == sv:
            continue  # self-loops carry no transfer traffic
        key = (su, sv) if directed else tuple(sorted((su, sv)))
        merged[key] = merged.get(key, 0.0) + _edge_gbps(data, default_gbps)
    if not merged:
        raise GmlError("GML graph has no usable links")
    edges = []
    for key in sorted(merged):
        entry = {"src": key[0], "dst": key[1], "gbps": round(merged[key], 9)}
        if directed:
            entry["directed"] = True
        edges.append(entry)
    return {"name": name, "nodes": nodes, "edges": edges}


def convert_gml_file(gml_path: str, out_path: str, default_gbps=None) -> dict:
    with open(gml_path) as fh:
        doc = convert_gml(fh.read(), default_gbps=default_gbps, name=gml_path)
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
