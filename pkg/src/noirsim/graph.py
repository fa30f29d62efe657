"""Directed road-network model with inlet, outlet, and interior road elements.

Every node of the network is a unidirectional road element; a two-way street
is represented by two parallel elements with opposite directions. Node ids
are 1-based and follow a canonical ordering: inlets first, then outlets,
then interior elements.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_VEHICLE_LENGTH_M = 4.5


class RoadClass(Enum):
    """Role of a road element within the network."""

    INLET = "inlet"
    OUTLET = "outlet"
    INTERIOR = "interior"


class GraphBuildError(ValueError):
    """Node or edge data cannot form a valid road network."""


@dataclass(frozen=True)
class RoadAttributes:
    """Physical properties of a road element."""

    length_m: float
    lane_count: int

    def __post_init__(self) -> None:
        if not self.length_m > 0:
            raise ValueError(f"road length must be positive, got {self.length_m}")
        if not isinstance(self.lane_count, int) or isinstance(self.lane_count, bool):
            raise ValueError(f"lane count must be an integer, got {self.lane_count!r}")
        if self.lane_count < 1:
            raise ValueError(f"lane count must be at least 1, got {self.lane_count}")


def compute_capacity(
    attributes: RoadAttributes,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> float:
    """Vehicle capacity of a road element: lanes * length / vehicle length.

    The result is kept as a real number because densities evolve as
    real-valued expectations, not integer vehicle counts.
    """
    if not vehicle_length_m > 0:
        raise ValueError(f"vehicle length must be positive, got {vehicle_length_m}")
    return attributes.lane_count * attributes.length_m / vehicle_length_m


@dataclass(frozen=True)
class NoirGraph:
    """Immutable directed graph of road elements.

    Ids ``1..n_inlets`` are inlets, the next ``n_outlets`` ids are outlets,
    and ids ``n_boundary+1..n_total`` are interior elements. The graph is
    safe to share across threads once built.
    """

    n_total: int
    n_inlets: int
    n_outlets: int
    edges: tuple[tuple[int, int], ...]
    attributes: tuple[RoadAttributes | None, ...]
    _in: tuple[frozenset[int], ...]
    _out: tuple[frozenset[int], ...]

    @property
    def n_boundary(self) -> int:
        return self.n_inlets + self.n_outlets

    @property
    def n_interior(self) -> int:
        return self.n_total - self.n_boundary

    @property
    def inlet_ids(self) -> range:
        return range(1, self.n_inlets + 1)

    @property
    def outlet_ids(self) -> range:
        return range(self.n_inlets + 1, self.n_boundary + 1)

    @property
    def interior_ids(self) -> range:
        return range(self.n_boundary + 1, self.n_total + 1)

    def _check_id(self, i: int) -> None:
        if not 1 <= i <= self.n_total:
            raise ValueError(f"node id {i} out of range 1..{self.n_total}")

    def road_class(self, i: int) -> RoadClass:
        self._check_id(i)
        if i <= self.n_inlets:
            return RoadClass.INLET
        if i <= self.n_boundary:
            return RoadClass.OUTLET
        return RoadClass.INTERIOR

    def in_neighbors(self, i: int) -> set[int]:
        """Nodes j with an edge (j, i)."""
        self._check_id(i)
        return set(self._in[i - 1])

    def out_neighbors(self, i: int) -> set[int]:
        """Nodes j with an edge (i, j)."""
        self._check_id(i)
        return set(self._out[i - 1])

    def attributes_of(self, i: int) -> RoadAttributes | None:
        self._check_id(i)
        return self.attributes[i - 1]

    def state_index(self, i: int) -> int:
        """0-based position of interior node ``i`` in the density state vector."""
        if self.road_class(i) is not RoadClass.INTERIOR:
            raise ValueError(f"node {i} is not interior")
        return i - self.n_boundary - 1

    def interior_id(self, index: int) -> int:
        if not 0 <= index < self.n_interior:
            raise ValueError(f"state index {index} out of range")
        return self.n_boundary + 1 + index

    def capacity_vector(self, vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M) -> np.ndarray:
        """Per-interior-road capacities in state order."""
        caps = np.empty(self.n_interior)
        for i in self.interior_ids:
            attr = self.attributes[i - 1]
            if attr is None:
                raise ValueError(f"interior node {i} has no attributes")
            caps[self.state_index(i)] = compute_capacity(attr, vehicle_length_m)
        return caps


def build_graph(
    nodes: Sequence[tuple[RoadClass, RoadAttributes | None]],
    edges: Iterable[tuple[int, int]],
) -> NoirGraph:
    """Construct an immutable road network from a node list and edge list.

    Node ids are the 1-based positions in ``nodes``, which must follow the
    canonical ordering (all inlets, then all outlets, then all interiors).
    Interior nodes must carry attributes; boundary nodes may omit them.
    """
    n = len(nodes)
    if n == 0:
        raise GraphBuildError("network must contain at least one node")

    classes = [c for c, _ in nodes]
    n_in = sum(1 for c in classes if c is RoadClass.INLET)
    n_out = sum(1 for c in classes if c is RoadClass.OUTLET)
    expected = (
        [RoadClass.INLET] * n_in
        + [RoadClass.OUTLET] * n_out
        + [RoadClass.INTERIOR] * (n - n_in - n_out)
    )
    for idx, (got, want) in enumerate(zip(classes, expected), start=1):
        if got is not want:
            raise GraphBuildError(
                f"node {idx} is {got.value} but canonical ordering requires {want.value}"
                " (inlets, then outlets, then interiors)"
            )

    attrs: list[RoadAttributes | None] = []
    for idx, (cls, attr) in enumerate(nodes, start=1):
        if cls is RoadClass.INTERIOR and attr is None:
            raise GraphBuildError(f"interior node {idx} requires attributes")
        attrs.append(attr)

    in_sets: list[set[int]] = [set() for _ in range(n)]
    out_sets: list[set[int]] = [set() for _ in range(n)]
    seen: set[tuple[int, int]] = set()
    for u, v in edges:
        if not (1 <= u <= n and 1 <= v <= n):
            raise GraphBuildError(f"edge ({u}, {v}) references a node outside 1..{n}")
        if u == v:
            raise GraphBuildError(f"self-loop on node {u}")
        if (u, v) in seen:
            raise GraphBuildError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        out_sets[u - 1].add(v)
        in_sets[v - 1].add(u)

    return NoirGraph(
        n_total=n,
        n_inlets=n_in,
        n_outlets=n_out,
        edges=tuple(sorted(seen)),
        attributes=tuple(attrs),
        _in=tuple(frozenset(s) for s in in_sets),
        _out=tuple(frozenset(s) for s in out_sets),
    )


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    offenders: tuple[int, ...] = ()


@dataclass(frozen=True)
class StructureReport:
    """Outcome of the structural conditions for stable, controllable flow.

    The first four checks are the core requirements; the last two encode the
    modeling convention that flow enters the network only through inlets and
    leaves only through outlets (outlets have no out-edges, inlets no
    in-edges), which the column-sum properties of the state matrix rely on.
    """

    inlets_feed_interior: CheckResult
    interior_reaches_outlet: CheckResult
    no_isolated_nodes: CheckResult
    no_inlet_to_outlet: CheckResult
    outlets_absorbing: CheckResult
    inlets_source_only: CheckResult

    def items(self) -> Iterator[tuple[str, CheckResult]]:
        yield "inlets_feed_interior", self.inlets_feed_interior
        yield "interior_reaches_outlet", self.interior_reaches_outlet
        yield "no_isolated_nodes", self.no_isolated_nodes
        yield "no_inlet_to_outlet", self.no_inlet_to_outlet
        yield "outlets_absorbing", self.outlets_absorbing
        yield "inlets_source_only", self.inlets_source_only

    @property
    def all_passed(self) -> bool:
        return all(result.passed for _, result in self.items())


def validate_structure(g: NoirGraph) -> StructureReport:
    """Check the structural assumptions behind boundary controllability.

    Checks, in order: every inlet feeds at least one interior node and
    nothing else; every interior node has a directed path to some outlet
    (reverse breadth-first search from the outlet set); no node is isolated;
    no inlet connects directly to an outlet; outlets have no out-edges;
    inlets have no in-edges. Failures are reported per check with the
    offending node ids; nothing is raised.
    """
    bad_inlet_feed = []
    for i in g.inlet_ids:
        outs = g.out_neighbors(i)
        if not outs or any(g.road_class(j) is not RoadClass.INTERIOR for j in outs):
            bad_inlet_feed.append(i)

    # reverse reachability from the outlet set
    reached: set[int] = set(g.outlet_ids)
    frontier = deque(reached)
    while frontier:
        node = frontier.popleft()
        for j in g._in[node - 1]:
            if j not in reached:
                reached.add(j)
                frontier.append(j)
    unreachable = [i for i in g.interior_ids if i not in reached]

    isolated = [
        i for i in range(1, g.n_total + 1) if not g._in[i - 1] and not g._out[i - 1]
    ]

    inlet_to_outlet = [
        i
        for i in g.inlet_ids
        if any(g.road_class(j) is RoadClass.OUTLET for j in g.out_neighbors(i))
    ]

    outlet_out_edges = [i for i in g.outlet_ids if g._out[i - 1]]
    inlet_in_edges = [i for i in g.inlet_ids if g._in[i - 1]]

    return StructureReport(
        inlets_feed_interior=CheckResult(not bad_inlet_feed, tuple(bad_inlet_feed)),
        interior_reaches_outlet=CheckResult(not unreachable, tuple(unreachable)),
        no_isolated_nodes=CheckResult(not isolated, tuple(isolated)),
        no_inlet_to_outlet=CheckResult(not inlet_to_outlet, tuple(inlet_to_outlet)),
        outlets_absorbing=CheckResult(not outlet_out_edges, tuple(outlet_out_edges)),
        inlets_source_only=CheckResult(not inlet_in_edges, tuple(inlet_in_edges)),
    )
