"""Hop-count routing: shortest paths, route extrapolation, disjoint alternatives.

All links have unit weight, so shortest-path search is breadth-first; ties
resolve to the lexicographically smallest node sequence so every function
here is deterministic for a fixed topology and seed.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass

from .topology import Topology

logger = logging.getLogger(__name__)


class UnreachableError(Exception):
    """No path exists between the requested endpoints."""


@dataclass(frozen=True)
class Route:
    """A simple path, stored as the node sequence."""

    nodes: tuple[int, ...]

    def __post_init__(self):
        if len(self.nodes) < 1:
            raise ValueError("a route needs at least one node")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("route revisits a node")

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def dest(self) -> int:
        return self.nodes[-1]

    def links(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))


@dataclass(frozen=True)
class ExtendedRoute:
    """A source-destination path embedded in a longer anchor-to-anchor path.

    route.nodes[source_index] is the real source, route.nodes[dest_index] the
    real destination; everything before/after is extrapolated cover.
    """

    route: Route
    source_index: int
    dest_index: int

    def __post_init__(self):
        if not 0 <= self.source_index <= self.dest_index <= self.route.hops:
            raise ValueError(
                f"indices ({self.source_index}, {self.dest_index}) outside a "
                f"{self.route.hops}-hop route")

    @property
    def source(self) -> int:
        return self.route.nodes[self.source_index]

    @property
    def dest(self) -> int:
        return self.route.nodes[self.dest_index]

    @property
    def anchor_source(self) -> int:
        return self.route.nodes[0]

    @property
    def anchor_dest(self) -> int:
        return self.route.nodes[-1]

    @property
    def source_extension(self) -> int:
        """Achieved hops prepended on the source side."""
        return self.source_index

    @property
    def dest_extension(self) -> int:
        """Achieved hops appended on the destination side."""
        return self.route.hops - self.dest_index

    @property
    def core_hops(self) -> int:
        return self.dest_index - self.source_index

    def core(self) -> Route:
        return Route(self.route.nodes[self.source_index:self.dest_index + 1])


def hop_distances(topo: Topology, src: int) -> dict[int, int]:
    """BFS hop counts from src to every reachable node."""
    if src not in topo.positions:
        raise ValueError(f"node {src} not in topology")
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in topo.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def hop_distance(topo: Topology, u: int, v: int) -> int:
    d = hop_distances(topo, u).get(v)
    if d is None:
        raise UnreachableError(f"no path from {u} to {v}")
    return d


def shortest_path(topo: Topology, source: int, dest: int) -> Route:
    """Minimum-hop path from source to dest.

    Among equal-length paths the lexicographically smallest node sequence
    wins: walk from the source, always taking the smallest neighbor that
    still lies on some shortest path.
    """
    if source not in topo.positions or dest not in topo.positions:
        raise ValueError(f"endpoints ({source}, {dest}) not in topology")
    dist = hop_distances(topo, dest)
    if source not in dist:
        raise UnreachableError(f"no path from {source} to {dest}")
    nodes = [source]
    current = source
    while current != dest:
        step = dist[current] - 1
        current = min(m for m in topo.neighbors(current) if dist.get(m, -1) == step)
        nodes.append(current)
    return Route(tuple(nodes))


def route_is_valid(topo: Topology, route: Route) -> bool:
    """True when every consecutive pair of the route is a topology link."""
    return all(topo.is_linked(u, v) for u, v in route.links())


def extrapolate(topo: Topology, route: Route, source_ext: int, dest_ext: int,
                rng: random.Random, strict: bool = True, avoid=()) -> ExtendedRoute:
    """Extend a shortest path beyond both endpoints, one hop at a time.

    Strict mode admits a step-k candidate only if its hop distance to the
    far real endpoint is exactly route.hops + k, so the whole extended path
    stays a shortest path between its anchors. Lenient mode admits any
    neighbor that keeps the path simple. Ties break uniformly via rng.
    Extension truncates (never fails) when a step has no candidate; nodes in
    `avoid` are never used.
    """
    if source_ext < 0 or dest_ext < 0:
        raise ValueError("extension hop counts must be non-negative")
    hops = route.hops
    src, dst = route.source, route.dest
    dist_to_dst = hop_distances(topo, dst)
    if dist_to_dst.get(src) != hops:
        raise ValueError("route is not a shortest path between its endpoints")
    dist_to_src = hop_distances(topo, src)
    used = set(route.nodes) | set(avoid)

    def grow(tail: int, dist_map: dict[int, int], want: int) -> list[int]:
        chain: list[int] = []
        for k in range(1, want + 1):
            cands = [m for m in topo.neighbors(tail)
                     if m not in used and (not strict or dist_map.get(m) == hops + k)]
            if not cands:
                break
            tail = rng.choice(cands)
            chain.append(tail)
            used.add(tail)
        return chain

    prefix = grow(src, dist_to_dst, source_ext)
    suffix = grow(dst, dist_to_src, dest_ext)
    if source_ext > 0 and not prefix:
        logger.info("no source-side extension possible from node %d", src)
    if dest_ext > 0 and not suffix:
        logger.info("no destination-side extension possible from node %d", dst)
    full = Route(tuple(reversed(prefix)) + route.nodes + tuple(suffix))
    return ExtendedRoute(route=full, source_index=len(prefix),
                         dest_index=len(prefix) + hops)


def disjoint_paths(topo: Topology, anchor_source: int, anchor_dest: int,
                   count: int, excluded: Route) -> list[Route]:
    """Up to `count` anchor-to-anchor paths, pairwise internally
    vertex-disjoint and avoiding the interior of `excluded`.

    Runs successive shortest-path augmentation on a node-split unit-capacity
    flow network, so the returned set has maximum cardinality (up to count)
    and, for that cardinality, minimum total hop count. Returns fewer than
    `count` paths when the topology cannot supply them.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if anchor_source == anchor_dest:
        raise ValueError("anchors must differ")
    banned = set(excluded.nodes[1:-1]) - {anchor_source, anchor_dest}
    allowed = [n for n in topo.nodes if n not in banned]
    if anchor_source not in topo.positions or anchor_dest not in topo.positions:
        raise ValueError("anchors must be topology nodes")

    # Node-split flow network: v_in = 2k, v_out = 2k + 1. Interior nodes get
    # unit capacity across the split arc; anchors carry flow only out of the
    # source's out-node and into the dest's in-node.
    index = {n: 2 * k for k, n in enumerate(allowed)}
    graph: list[list[list[int]]] = [[] for _ in range(2 * len(allowed))]

    def add_arc(u: int, v: int, cap: int, cost: int) -> None:
        graph[u].append([v, cap, cost, len(graph[v])])
        graph[v].append([u, 0, -cost, len(graph[u]) - 1])

    for n in allowed:
        if n not in (anchor_source, anchor_dest):
            add_arc(index[n], index[n] + 1, 1, 0)
    for i, j in sorted(topo.links):
        if i in banned or j in banned:
            continue
        add_arc(index[i] + 1, index[j], 1, 1)
        add_arc(index[j] + 1, index[i], 1, 1)

    start = index[anchor_source] + 1
    goal = index[anchor_dest]
    found = 0
    for _ in range(count):
        if not _augment_cheapest(graph, start, goal):
            break
        found += 1
    if found < count:
        logger.warning("only %d of %d requested disjoint paths exist", found, count)

    # Decompose the integral flow into node sequences.
    out_of = {n: index[n] + 1 for n in allowed}
    node_of_in = {index[n]: n for n in allowed}
    paths = []
    for _ in range(found):
        nodes = [anchor_source]
        at = start
        while at != goal:
            for arc in graph[at]:
                to, cap, cost, _rev = arc
                if cost == 1 and cap == 0:
                    arc[1] = 1  # consume this flow unit
                    rev = graph[to][arc[3]]
                    rev[1] = 0
                    break
            else:
                raise RuntimeError("flow decomposition lost a path")
            nodes.append(node_of_in[to])
            at = goal if to == goal else out_of[node_of_in[to]]
        paths.append(Route(tuple(nodes)))
    return paths


def _augment_cheapest(graph, start: int, goal: int) -> bool:
    """Push one unit of flow along a cheapest residual path (SPFA, since
    residual arcs of used edges carry negative cost)."""
    n = len(graph)
    inf = float("inf")
    dist = [inf] * n
    in_queue = [False] * n
    prev: list[tuple[int, int] | None] = [None] * n
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        for k, (to, cap, cost, _rev) in enumerate(graph[u]):
            if cap > 0 and dist[u] + cost < dist[to]:
                dist[to] = dist[u] + cost
                prev[to] = (u, k)
                if not in_queue[to]:
                    in_queue[to] = True
                    queue.append(to)
    if dist[goal] == inf:
        return False
    at = goal
    while at != start:
        u, k = prev[at]
        graph[u][k][1] -= 1
        rev = graph[u][k][3]
        graph[at][rev][1] += 1
        at = u
    return True
