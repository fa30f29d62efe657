"""Strict parsing and canonical serialization of the network and config files.

Both formats are JSON. Unknown fields are rejected rather than ignored: a
typo in a config key should fail loudly, not silently change an experiment.
Serialization is canonical (fixed key order, nodes sorted by id, edges
sorted lexicographically), so equal documents produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .graph import NoirGraph, RoadAttributes, RoadClass, build_graph
from .harness import SimConfig


class FormatError(ValueError):
    """A document failed schema validation; ``path`` locates the violation."""

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


_NETWORK_KEYS = ("n_in", "n_boundary", "n_total", "nodes", "edges")
_NODE_KEYS = ("id", "class", "length_m", "lanes")
_CLASS_NAMES = {cls.value: cls for cls in RoadClass}


@dataclass(frozen=True)
class NodeRecord:
    id: int
    road_class: RoadClass
    length_m: float | None = None
    lanes: int | None = None


@dataclass(frozen=True)
class NetworkDocument:
    """Validated in-memory form of a network file, prior to graph construction."""

    n_in: int
    n_boundary: int
    n_total: int
    nodes: tuple[NodeRecord, ...]
    edges: tuple[tuple[int, int], ...]


def _require_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise FormatError(path, f"expected an integer, got {value!r}")
    return value


def _require_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(path, f"expected a number, got {value!r}")
    return float(value)


def _parse_node(item, path: str) -> NodeRecord:
    if not isinstance(item, dict):
        raise FormatError(path, "node must be an object")
    unknown = set(item) - set(_NODE_KEYS)
    if unknown:
        raise FormatError(path, f"unknown field {sorted(unknown)[0]!r}")
    if "id" not in item or "class" not in item:
        raise FormatError(path, "node requires 'id' and 'class'")
    node_id = _require_int(item["id"], f"{path}.id")
    cls_name = item["class"]
    if cls_name not in _CLASS_NAMES:
        raise FormatError(f"{path}.class", f"unknown class {cls_name!r}")
    cls = _CLASS_NAMES[cls_name]

    length = item.get("length_m")
    if length is not None:
        length = _require_number(length, f"{path}.length_m")
        if not length > 0:
            raise FormatError(f"{path}.length_m", f"must be positive, got {length}")
    lanes = item.get("lanes")
    if lanes is not None:
        lanes = _require_int(lanes, f"{path}.lanes")
        if lanes < 1:
            raise FormatError(f"{path}.lanes", f"must be at least 1, got {lanes}")
    if cls is RoadClass.INTERIOR and (length is None or lanes is None):
        raise FormatError(path, f"interior node {node_id} requires length_m and lanes")
    return NodeRecord(id=node_id, road_class=cls, length_m=length, lanes=lanes)


def validate_document(doc: NetworkDocument) -> None:
    """Check id coverage, class counts, and edge sanity of a document."""
    if doc.n_total < 1:
        raise FormatError("$.n_total", "must be at least 1")
    if not 0 <= doc.n_in <= doc.n_boundary <= doc.n_total:
        raise FormatError("$", "need 0 <= n_in <= n_boundary <= n_total")
    if len(doc.nodes) != doc.n_total:
        raise FormatError("$.nodes", f"{len(doc.nodes)} nodes listed, n_total is {doc.n_total}")

    seen_ids: set[int] = set()
    for pos, node in enumerate(doc.nodes):
        path = f"$.nodes[{pos}]"
        if node.id in seen_ids:
            raise FormatError(path, f"duplicate id {node.id}")
        seen_ids.add(node.id)
    for missing in range(1, doc.n_total + 1):
        if missing not in seen_ids:
            raise FormatError("$.nodes", f"id gap: id {missing} is missing")

    counts = {cls: 0 for cls in RoadClass}
    for node in doc.nodes:
        counts[node.road_class] += 1
    if counts[RoadClass.INLET] != doc.n_in:
        raise FormatError("$", f"{counts[RoadClass.INLET]} inlet nodes but n_in is {doc.n_in}")
    if counts[RoadClass.INLET] + counts[RoadClass.OUTLET] != doc.n_boundary:
        raise FormatError(
            "$",
            f"{counts[RoadClass.INLET] + counts[RoadClass.OUTLET]} boundary nodes "
            f"but n_boundary is {doc.n_boundary}",
        )

    seen_edges: set[tuple[int, int]] = set()
    for pos, (u, v) in enumerate(doc.edges):
        path = f"$.edges[{pos}]"
        if not (1 <= u <= doc.n_total and 1 <= v <= doc.n_total):
            raise FormatError(path, f"edge ({u}, {v}) references a missing node")
        if (u, v) in seen_edges:
            raise FormatError(path, f"duplicate edge ({u}, {v})")
        seen_edges.add((u, v))


def parse_network(data: bytes | str) -> NetworkDocument:
    """Parse and validate a network file; every violation names its location."""
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise FormatError("$", "top level must be an object")
    unknown = set(raw) - set(_NETWORK_KEYS)
    if unknown:
        raise FormatError("$", f"unknown field {sorted(unknown)[0]!r}")
    missing = set(_NETWORK_KEYS) - set(raw)
    if missing:
        raise FormatError("$", f"missing field {sorted(missing)[0]!r}")

    n_in = _require_int(raw["n_in"], "$.n_in")
    n_boundary = _require_int(raw["n_boundary"], "$.n_boundary")
    n_total = _require_int(raw["n_total"], "$.n_total")
    if not isinstance(raw["nodes"], list):
        raise FormatError("$.nodes", "must be an array")
    if not isinstance(raw["edges"], list):
        raise FormatError("$.edges", "must be an array")

    nodes = [
        _parse_node(item, f"$.nodes[{pos}]") for pos, item in enumerate(raw["nodes"])
    ]
    edges = []
    for pos, item in enumerate(raw["edges"]):
        path = f"$.edges[{pos}]"
        if (
            not isinstance(item, list)
            or len(item) != 2
            or any(isinstance(x, bool) or not isinstance(x, int) for x in item)
        ):
            raise FormatError(path, f"edge must be a pair of integer ids, got {item!r}")
        edges.append((item[0], item[1]))

    doc = NetworkDocument(
        n_in=n_in,
        n_boundary=n_boundary,
        n_total=n_total,
        nodes=tuple(sorted(nodes, key=lambda n: n.id)),
        edges=tuple(sorted(edges)),
    )
    validate_document(doc)
    return doc


def serialize_network(doc: NetworkDocument) -> bytes:
    """Canonical byte serialization; parse(serialize(doc)) == doc."""
    canonical = replace(
        doc,
        nodes=tuple(sorted(doc.nodes, key=lambda n: n.id)),
        edges=tuple(sorted(doc.edges)),
    )
    validate_document(canonical)
    nodes_json = []
    for node in canonical.nodes:
        entry: dict = {"id": node.id, "class": node.road_class.value}
        if node.length_m is not None:
            entry["length_m"] = node.length_m
        if node.lanes is not None:
            entry["lanes"] = node.lanes
        nodes_json.append(entry)
    payload = {
        "n_in": canonical.n_in,
        "n_boundary": canonical.n_boundary,
        "n_total": canonical.n_total,
        "nodes": nodes_json,
        "edges": [list(edge) for edge in canonical.edges],
    }
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


def graph_from_document(doc: NetworkDocument) -> NoirGraph:
    """Build the road network from a validated document.

    Raises GraphBuildError when the document's classes violate the canonical
    id ordering (inlets, then outlets, then interiors).
    """
    validate_document(doc)
    nodes: list[tuple[RoadClass, RoadAttributes | None]] = []
    for node in sorted(doc.nodes, key=lambda n: n.id):
        attr = None
        if node.length_m is not None and node.lanes is not None:
            attr = RoadAttributes(length_m=node.length_m, lane_count=node.lanes)
        nodes.append((node.road_class, attr))
    return build_graph(nodes, doc.edges)


def document_from_graph(graph: NoirGraph) -> NetworkDocument:
    nodes = []
    for i in range(1, graph.n_total + 1):
        attr = graph.attributes_of(i)
        nodes.append(
            NodeRecord(
                id=i,
                road_class=graph.road_class(i),
                length_m=None if attr is None else attr.length_m,
                lanes=None if attr is None else attr.lane_count,
            )
        )
    return NetworkDocument(
        n_in=graph.n_inlets,
        n_boundary=graph.n_boundary,
        n_total=graph.n_total,
        nodes=tuple(nodes),
        edges=tuple(sorted(graph.edges)),
    )


_CONFIG_KEYS = (
    "steps",
    "dt_seconds",
    "seed",
    "d0",
    "n_tau",
    "p_max",
    "l_veh_m",
    "enforce_density_lower_bound",
    "initial_density",
)


def parse_sim_config(data: bytes | str) -> SimConfig:
    """Parse a simulation config file; omitted keys take their defaults."""
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise FormatError("$", "top level must be an object")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise FormatError("$", f"unknown field {sorted(unknown)[0]!r}")

    kwargs = {}
    for key in ("steps", "seed", "n_tau"):
        if key in raw:
            kwargs[key] = _require_int(raw[key], f"$.{key}")
    for key in ("dt_seconds", "d0", "p_max", "l_veh_m"):
        if key in raw:
            kwargs[key] = _require_number(raw[key], f"$.{key}")
    if "enforce_density_lower_bound" in raw:
        value = raw["enforce_density_lower_bound"]
        if not isinstance(value, bool):
            raise FormatError("$.enforce_density_lower_bound", f"expected a boolean, got {value!r}")
        kwargs["enforce_density_lower_bound"] = value
    if "initial_density" in raw:
        value = raw["initial_density"]
        if not isinstance(value, str):
            raise FormatError("$.initial_density", f"expected a string, got {value!r}")
        kwargs["initial_density"] = value

    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise FormatError("$", str(exc)) from None
