"""Numeric encoding and canonical serialization of PDGs.

The model consumes a one-hot feature matrix X (|V| rows, 18 columns) and
0/1 adjacency matrices oriented row=src, col=dst. Serialization is
canonical JSON: sorted keys, compact separators, nodes ascending by id,
edges sorted by (src, dst, kind, var).
"""

from __future__ import annotations

import json

import numpy as np

from .dataflow import Pdg, PdgNode
from .ir import NUM_KINDS, kind_from_name, kind_name, IrFormatError


class EmptyGraph(Exception):
    pass


class FormatError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _node_order(pdg: Pdg) -> list[PdgNode]:
    return sorted(pdg.nodes, key=lambda n: n.id)


def encode_node_features(pdg: Pdg) -> np.ndarray:
    """One-hot kind encoding, one row per node in ascending id order."""
    if not pdg.nodes:
        raise EmptyGraph("cannot encode a graph with no nodes")
    nodes = _node_order(pdg)
    x = np.zeros((len(nodes), NUM_KINDS), dtype=np.float64)
    for row, node in enumerate(nodes):
        x[row, int(node.kind)] = 1.0
    return x


def adjacency_matrix(pdg: Pdg, cls: str = "both",
                     self_loops: bool = False) -> np.ndarray:
    """0/1 adjacency for the selected edge class (control, data, both).

    A[i, j] = 1 iff the edge i -> j is present; if self_loops is set the
    diagonal is forced to 1.
    """
    if cls not in ("control", "data", "both"):
        raise ValueError(f"unknown edge class {cls!r}")
    nodes = _node_order(pdg)
    index = {node.id: row for row, node in enumerate(nodes)}
    a = np.zeros((len(nodes), len(nodes)), dtype=np.float64)
    if cls in ("control", "both"):
        for src, dst in pdg.control_edges:
            a[index[src], index[dst]] = 1.0
    if cls in ("data", "both"):
        for src, dst, _ in pdg.data_edges:
            a[index[src], index[dst]] = 1.0
    if self_loops:
        np.fill_diagonal(a, 1.0)
    return a


def serialize_pdg(pdg: Pdg) -> str:
    """Canonical JSON text; byte-stable for equal graphs."""
    nodes = [
        {"id": n.id, "kind": kind_name(n.kind), "line": n.line}
        for n in _node_order(pdg)
    ]
    edges = sorted(
        [
            {"src": s, "dst": d, "kind": "control"}
            for (s, d) in pdg.control_edges
        ]
        + [
            {"src": s, "dst": d, "kind": "data", "var": v}
            for (s, d, v) in pdg.data_edges
        ],
        key=lambda e: (e["src"], e["dst"], e["kind"], e.get("var", "")),
    )
    return json.dumps({"nodes": nodes, "edges": edges}, sort_keys=True,
                      separators=(",", ":"))


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise FormatError(path, f"missing key {key!r}")
    return obj[key]


def deserialize_pdg(text: str, name: str = "") -> Pdg:
    """Inverse of serialize_pdg; raises FormatError naming the JSON path
    of the first problem."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("$", "document must be an object")
    raw_nodes = _require(doc, "nodes", "$")
    raw_edges = _require(doc, "edges", "$")
    if not isinstance(raw_nodes, list):
        raise FormatError("$.nodes", "must be an array")
    if not isinstance(raw_edges, list):
        raise FormatError("$.edges", "must be an array")
    nodes: list[PdgNode] = []
    ids: set[int] = set()
    for i, raw in enumerate(raw_nodes):
        path = f"$.nodes[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(path, "must be an object")
        nid = _require(raw, "id", path)
        kind = _require(raw, "kind", path)
        line = _require(raw, "line", path)
        if not isinstance(nid, int) or isinstance(nid, bool):
            raise FormatError(f"{path}.id", "must be an integer")
        if nid in ids:
            raise FormatError(f"{path}.id", f"duplicate node id {nid}")
        if not isinstance(line, int) or isinstance(line, bool):
            raise FormatError(f"{path}.line", "must be an integer")
        try:
            kind_value = kind_from_name(kind)
        except IrFormatError:
            raise FormatError(f"{path}.kind", f"unknown kind {kind!r}") \
                from None
        ids.add(nid)
        nodes.append(PdgNode(nid, kind_value, line))
    control: set[tuple[int, int]] = set()
    data: set[tuple[int, int, str]] = set()
    for i, raw in enumerate(raw_edges):
        path = f"$.edges[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(path, "must be an object")
        src = _require(raw, "src", path)
        dst = _require(raw, "dst", path)
        kind = _require(raw, "kind", path)
        for label, value in (("src", src), ("dst", dst)):
            if not isinstance(value, int) or isinstance(value, bool):
                raise FormatError(f"{path}.{label}", "must be an integer")
            if value not in ids:
                raise FormatError(f"{path}.{label}",
                                  f"unknown node id {value}")
        if src == dst:
            raise FormatError(path, "self-edges are not allowed")
        if kind == "control":
            control.add((src, dst))
        elif kind == "data":
            var = _require(raw, "var", path)
            if not isinstance(var, str):
                raise FormatError(f"{path}.var", "must be a string")
            data.add((src, dst, var))
        else:
            raise FormatError(f"{path}.kind",
                              f"must be 'control' or 'data', got {kind!r}")
    return Pdg(tuple(sorted(nodes, key=lambda n: n.id)),
               frozenset(control), frozenset(data), name)


def to_dot(pdg: Pdg) -> str:
    """Graphviz export: control edges solid, data edges dashed."""
    lines = ["digraph pdg {"]
    for node in _node_order(pdg):
        lines.append(
            f'  n{node.id} [label="{node.id}: {kind_name(node.kind)}"];'
        )
    for src, dst in sorted(pdg.control_edges):
        lines.append(f"  n{src} -> n{dst} [style=solid];")
    for src, dst, var in sorted(pdg.data_edges):
        lines.append(f'  n{src} -> n{dst} [style=dashed, label="{var}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
