"""Directed road networks and the reversed line-graph transform used by the GNN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable

__all__ = [
    "Road",
    "RoadNetwork",
    "DualGraph",
    "validate",
    "successors",
    "build_dual_graph",
]


@dataclass(frozen=True)
class Road:
    """One directed road segment between two intersections."""

    road_id: int
    from_node: Hashable
    to_node: Hashable
    length: float  # meters, > 0


@dataclass(frozen=True)
class RoadNetwork:
    """A directed graph whose nodes are intersections and whose edges are roads.

    Road ids are dense indices 0..n_roads-1 matching their position in `roads`.
    Instances are immutable and safe to share between concurrent simulations.
    """

    intersections: tuple
    roads: tuple[Road, ...]

    @staticmethod
    def from_edges(
        nodes: Iterable[Hashable],
        edges: Iterable[tuple[Hashable, Hashable, float]],
    ) -> "RoadNetwork":
        """Build a network from (from_node, to_node, length) triples, ids by position."""
        roads = tuple(
            Road(i, u, v, float(length)) for i, (u, v, length) in enumerate(edges)
        )
        return RoadNetwork(tuple(nodes), roads)

    @property
    def n_roads(self) -> int:
        return len(self.roads)


@dataclass(frozen=True)
class DualGraph:
    """Road-adjacency graph the GNN computes on: one node per road.

    For every consecutive pair of roads a -> b in the original network the dual
    holds the reversed edge b -> a, plus one self-loop per road, so information
    flows from a road's successors (and itself) into that road.
    `successor_index[j]` lists road j's successors in the ORIGINAL orientation,
    ascending by road id.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]  # (src, dst) pairs, message src -> dst
    successor_index: tuple[tuple[int, ...], ...]


def validate(network: RoadNetwork) -> list[str]:
    """Check network invariants; return one message per violation (empty == valid)."""
    violations: list[str] = []
    if network.n_roads == 0:
        violations.append("network has no roads")
    nodes = set(network.intersections)
    for i, road in enumerate(network.roads):
        if road.road_id != i:
            violations.append(
                f"road at position {i} has id {road.road_id}; ids must be dense 0..n-1"
            )
        if road.from_node not in nodes:
            violations.append(f"road {road.road_id}: dangling node {road.from_node!r}")
        if road.to_node not in nodes:
            violations.append(f"road {road.road_id}: dangling node {road.to_node!r}")
        if not road.length > 0:
            violations.append(f"road {road.road_id}: non-positive length {road.length}")
    return violations


def successors(network: RoadNetwork, road: int) -> list[int]:
    """Roads leaving the intersection this road ends at, ascending by road id."""
    if not 0 <= road < network.n_roads:
        raise IndexError(f"road index {road} out of range 0..{network.n_roads - 1}")
    end = network.roads[road].to_node
    return [r.road_id for r in network.roads if r.from_node == end]


def build_dual_graph(network: RoadNetwork) -> DualGraph:
    """Construct the reversed line graph with per-road self-loops.

    A road that loops back onto its own start node is its own successor; the
    resulting dual edge coincides with the self-loop and is kept only once.
    """
    problems = validate(network)
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))

    outgoing: dict[Hashable, list[int]] = {}
    for road in network.roads:
        outgoing.setdefault(road.from_node, []).append(road.road_id)

    succ = tuple(
        tuple(sorted(outgoing.get(road.to_node, ()))) for road in network.roads
    )

    edges = {(j, j) for j in range(network.n_roads)}
    for a in range(network.n_roads):
        for b in succ[a]:
            edges.add((b, a))  # reversed relative to the consecutive-road pair a -> b

    return DualGraph(
        node_count=network.n_roads,
        edges=tuple(sorted(edges)),
        successor_index=succ,
    )
