"""Shortest paths, extrapolation, and disjoint path extraction."""

from __future__ import annotations

import logging
import random

import pytest

from extrout.routing import (
    ExtendedRoute,
    Route,
    UnreachableError,
    disjoint_paths,
    extrapolate,
    hop_distance,
    hop_distances,
    route_is_valid,
    shortest_path,
)
from extrout.topology import Position, Topology, TopologyParams

from ladders import line_topology, parallel_paths, random_topology
from oracles import bfs_levels, max_node_disjoint_paths


def _adjacency(topo: Topology) -> dict[int, tuple[int, ...]]:
    return {n: topo.neighbors(n) for n in topo.nodes}


# ------------------------------------------------------------------- routes

def test_route_basics_and_validation():
    r = Route((4, 9, 2))
    assert r.hops == 2 and r.source == 4 and r.dest == 2
    assert r.links() == ((4, 9), (9, 2))
    assert Route((7,)).hops == 0
    with pytest.raises(ValueError):
        Route(())
    with pytest.raises(ValueError):
        Route((1, 2, 1))


def test_extended_route_accessors():
    full = Route(tuple(range(2, 18)))  # nodes 2..17, 15 hops
    ext = ExtendedRoute(route=full, source_index=3, dest_index=11)
    assert ext.source == 5 and ext.dest == 13
    assert ext.anchor_source == 2 and ext.anchor_dest == 17
    assert ext.source_extension == 3 and ext.dest_extension == 4
    assert ext.core_hops == 8
    assert ext.core() == Route(tuple(range(5, 14)))
    with pytest.raises(ValueError):
        ExtendedRoute(route=full, source_index=5, dest_index=3)
    with pytest.raises(ValueError):
        ExtendedRoute(route=full, source_index=0, dest_index=16)


# ------------------------------------------------------------ hop distances

def test_hop_distances_match_independent_bfs():
    for seed in range(100):
        topo = random_topology(24, 0.12, seed)
        adjacency = _adjacency(topo)
        for start in (1, 12, 24):
            assert hop_distances(topo, start) == bfs_levels(adjacency, start)


def test_hop_distance_values_and_errors():
    topo = line_topology(6)
    assert hop_distance(topo, 1, 6) == 5
    assert hop_distance(topo, 3, 3) == 0
    with pytest.raises(ValueError):
        hop_distances(topo, 99)
    split = Topology(topo.params, topo.positions, ((1, 2), (3, 4), (4, 5), (5, 6)))
    with pytest.raises(UnreachableError):
        hop_distance(split, 1, 6)


# ------------------------------------------------------------ shortest path

def test_shortest_path_length_matches_bfs():
    rng = random.Random(7)
    for seed in range(60):
        topo = random_topology(24, 0.15, seed)
        levels = bfs_levels(_adjacency(topo), 1)
        reachable = [n for n in levels if n != 1]
        if not reachable:
            continue
        for _ in range(5):
            target = rng.choice(reachable)
            route = shortest_path(topo, 1, target)
            assert route.hops == levels[target]
            assert route.source == 1 and route.dest == target
            assert route_is_valid(topo, route)


def _all_shortest_paths(topo: Topology, source: int, dest: int) -> list[tuple]:
    dist = bfs_levels(_adjacency(topo), dest)
    paths = []

    def walk(prefix: list[int]) -> None:
        tail = prefix[-1]
        if tail == dest:
            paths.append(tuple(prefix))
            return
        for m in topo.neighbors(tail):
            if dist.get(m) == dist[tail] - 1:
                walk(prefix + [m])

    walk([source])
    return paths


def test_shortest_path_is_lexicographically_smallest():
    rng = random.Random(31)
    for seed in range(40):
        topo = random_topology(10, 0.3, seed)
        levels = bfs_levels(_adjacency(topo), 1)
        reachable = [n for n in levels if n != 1]
        if not reachable:
            continue
        target = rng.choice(reachable)
        route = shortest_path(topo, 1, target)
        assert route.nodes == min(_all_shortest_paths(topo, 1, target))


def test_shortest_path_trivial_and_errors():
    topo = line_topology(5)
    assert shortest_path(topo, 3, 3) == Route((3,))
    with pytest.raises(ValueError):
        shortest_path(topo, 1, 9)
    split = Topology(topo.params, topo.positions, ((1, 2), (4, 5)))
    with pytest.raises(UnreachableError):
        shortest_path(split, 1, 5)


# ------------------------------------------------------------- extrapolate

def test_extrapolate_exact_shape_on_a_line():
    # on a chain every strict extension step has exactly one candidate
    topo = line_topology(20)
    route = shortest_path(topo, 5, 13)
    ext = extrapolate(topo, route, 3, 4, random.Random(0))
    assert ext.route.nodes == tuple(range(2, 18))
    assert ext.source_index == 3 and ext.dest_index == 11
    assert ext.source == 5 and ext.dest == 13
    assert ext.source_extension == 3 and ext.dest_extension == 4
    assert ext.core() == route
    assert route_is_valid(topo, ext.route)


def test_extrapolate_truncates_at_topology_edge(caplog):
    topo = line_topology(10)
    route = shortest_path(topo, 2, 8)
    with caplog.at_level(logging.INFO, logger="extrout.routing"):
        ext = extrapolate(topo, route, 3, 3, random.Random(0))
    assert ext.source_extension == 1  # only node 1 exists to the left
    assert ext.dest_extension == 2  # only 9, 10 to the right
    assert ext.route.nodes == tuple(range(1, 11))


def test_extrapolate_strict_requires_distance_growth():
    # triangle: the only neighbor of the source does not move away from
    # the destination, so strict mode stops while lenient mode takes it
    params = TopologyParams(grid_rows=1, grid_cols=3, perturbation=0.0, seed=0)
    positions = {i: Position(i * 10.0, 0.0) for i in (1, 2, 3)}
    topo = Topology(params, positions, ((1, 2), (1, 3), (2, 3)))
    route = shortest_path(topo, 1, 2)
    strict = extrapolate(topo, route, 1, 0, random.Random(0))
    assert strict.source_extension == 0
    lenient = extrapolate(topo, route, 1, 0, random.Random(0), strict=False)
    assert lenient.source_extension == 1
    assert lenient.anchor_source == 3


def test_extrapolate_respects_avoid_set():
    topo = line_topology(20)
    route = shortest_path(topo, 5, 13)
    ext = extrapolate(topo, route, 3, 4, random.Random(0), avoid=(4,))
    assert ext.source_extension == 0
    assert ext.dest_extension == 4


def test_extrapolate_tie_break_is_seed_deterministic():
    topo, hub_a, hub_b, rows = parallel_paths([4, 4, 4])
    route = Route((hub_a,) + tuple(rows[0]) + (hub_b,))
    # lenient mode: hub_b has one unused neighbor per remaining row and the
    # uniform tie-break should reach both of them across seeds
    picks = {extrapolate(topo, route, 0, 1, random.Random(s),
                         strict=False).anchor_dest for s in range(40)}
    assert picks == {rows[1][-1], rows[2][-1]}
    first = extrapolate(topo, route, 0, 1, random.Random(3), strict=False)
    again = extrapolate(topo, route, 0, 1, random.Random(3), strict=False)
    assert first == again


def test_extrapolate_validation():
    topo = line_topology(8)
    route = shortest_path(topo, 2, 6)
    with pytest.raises(ValueError):
        extrapolate(topo, route, -1, 0, random.Random(0))
    with pytest.raises(ValueError):
        extrapolate(topo, Route((2, 4)), 1, 1, random.Random(0))


# ----------------------------------------------------------- disjoint paths

def test_disjoint_paths_picks_cheapest_rows():
    topo, hub_a, hub_b, rows = parallel_paths([3, 4, 5])
    paths = disjoint_paths(topo, hub_a, hub_b, 2, Route((hub_a, hub_b)))
    assert sorted(p.hops for p in paths) == [4, 5]
    for p in paths:
        assert p.source == hub_a and p.dest == hub_b
        assert route_is_valid(topo, p)
    interiors = [set(p.nodes[1:-1]) for p in paths]
    assert interiors[0].isdisjoint(interiors[1])


def test_disjoint_paths_avoids_excluded_interior():
    topo, hub_a, hub_b, rows = parallel_paths([3, 4, 5])
    real = Route((hub_a,) + tuple(rows[0]) + (hub_b,))
    paths = disjoint_paths(topo, hub_a, hub_b, 2, real)
    used = set().union(*(p.nodes[1:-1] for p in paths))
    assert used.isdisjoint(rows[0])
    assert sorted(p.hops for p in paths) == [5, 6]


def test_disjoint_paths_shortfall_returns_fewer(caplog):
    topo, hub_a, hub_b, _ = parallel_paths([2, 3])
    with caplog.at_level(logging.WARNING, logger="extrout.routing"):
        paths = disjoint_paths(topo, hub_a, hub_b, 4, Route((hub_a, hub_b)))
    assert len(paths) == 2
    assert "only 2 of 4" in caplog.text


def test_disjoint_paths_count_matches_flow_oracle():
    rng = random.Random(99)
    checked = 0
    for seed in range(80):
        topo = random_topology(20, 0.2, seed)
        a, b = rng.sample(topo.nodes, 2)
        expected = max_node_disjoint_paths(_adjacency(topo), a, b)
        paths = disjoint_paths(topo, a, b, 20, Route((a, b)))
        assert len(paths) == expected
        for p in paths:
            assert route_is_valid(topo, p)
            assert p.source == a and p.dest == b
        interiors = [set(p.nodes[1:-1]) for p in paths]
        for i, left in enumerate(interiors):
            for right in interiors[i + 1:]:
                assert left.isdisjoint(right)
        checked += 1 if expected else 0
    assert checked >= 40  # the sweep actually exercised positive cases


def test_disjoint_paths_flow_oracle_with_banned_interior():
    rng = random.Random(5)
    exercised = 0
    for seed in range(60):
        topo = random_topology(18, 0.25, seed)
        a, b = rng.sample(topo.nodes, 2)
        try:
            real = shortest_path(topo, a, b)
        except UnreachableError:
            continue
        banned = set(real.nodes[1:-1])
        expected = max_node_disjoint_paths(_adjacency(topo), a, b, banned)
        paths = disjoint_paths(topo, a, b, 18, real)
        assert len(paths) == expected
        for p in paths:
            assert banned.isdisjoint(p.nodes[1:-1])
        exercised += 1 if banned else 0
    assert exercised >= 20


def test_disjoint_paths_validation():
    topo = line_topology(4)
    with pytest.raises(ValueError):
        disjoint_paths(topo, 1, 1, 2, Route((1, 4)))
    with pytest.raises(ValueError):
        disjoint_paths(topo, 1, 4, 0, Route((1, 4)))
