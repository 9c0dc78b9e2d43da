"""Perturbed-grid node placement with quasi-unit-disk (Q-UDG) links.

Nodes sit on a rows x cols grid, jittered uniformly per axis. Two nodes at
distance d share a link with certainty below a*R, never at or beyond R, and
with probability (R - d) / (R - a*R) in between.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

from .rng import substream


class Position(NamedTuple):
    """(x, y) point in metres."""

    x: float
    y: float


@dataclass(frozen=True)
class TopologyParams:
    """Deployment and link-model parameters.

    qudg_factor is the certainty fraction a: links are certain below
    a * tx_range. perturbation is the jitter amplitude as a fraction of
    spacing, per axis.
    """

    grid_rows: int
    grid_cols: int
    spacing: float = 100.0
    perturbation: float = 0.25
    tx_range: float = 145.0
    qudg_factor: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not 0.0 <= self.perturbation <= 1.0:
            raise ValueError(f"perturbation must be in [0, 1], got {self.perturbation}")
        if self.tx_range <= 0:
            raise ValueError(f"tx_range must be positive, got {self.tx_range}")
        if not 0.0 <= self.qudg_factor <= 1.0:
            raise ValueError(f"qudg_factor must be in [0, 1], got {self.qudg_factor}")

    @property
    def node_count(self) -> int:
        return self.grid_rows * self.grid_cols

    def grid_cell(self, node: int) -> tuple[int, int]:
        """(row, col) of a node id; ids are 1-based and assigned row-major."""
        if not 1 <= node <= self.node_count:
            raise ValueError(f"node {node} outside grid of {self.node_count}")
        return (node - 1) // self.grid_cols, (node - 1) % self.grid_cols

    def node_at(self, row: int, col: int) -> int:
        return row * self.grid_cols + col + 1


@dataclass
class Topology:
    """A placed node set plus its sampled link set; immutable after build."""

    params: TopologyParams
    positions: dict[int, Position]
    links: frozenset[tuple[int, int]]
    adjacency: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = set()
        for i, j in self.links:
            if i == j:
                raise ValueError(f"self-link on node {i}")
            if i not in self.positions or j not in self.positions:
                raise ValueError(f"link ({i}, {j}) references an unplaced node")
            pairs.add((min(i, j), max(i, j)))
        self.links = frozenset(pairs)
        nbrs: dict[int, list[int]] = {n: [] for n in self.positions}
        for i, j in self.links:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.adjacency = {n: tuple(sorted(v)) for n, v in nbrs.items()}

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.positions))

    @property
    def node_count(self) -> int:
        return len(self.positions)

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def is_linked(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.links

    def distance(self, i: int, j: int) -> float:
        return math.dist(self.positions[i], self.positions[j])


def link_probability(d: float, tx_range: float, qudg_factor: float) -> float:
    """Probability that two nodes at distance d share a link.

    1 below the certainty radius qudg_factor * tx_range, 0 at or beyond
    tx_range, linear in between. qudg_factor = 1 degenerates to a pure
    unit-disk model (the probabilistic band is empty).
    """
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if tx_range <= 0:
        raise ValueError(f"tx_range must be positive, got {tx_range}")
    if not 0.0 <= qudg_factor <= 1.0:
        raise ValueError(f"qudg_factor must be in [0, 1], got {qudg_factor}")
    certain = qudg_factor * tx_range
    if d < certain:
        return 1.0
    if d >= tx_range:
        return 0.0
    return (tx_range - d) / (tx_range - certain)


def place_nodes(params: TopologyParams, rng: random.Random) -> dict[int, Position]:
    """Jittered grid placement, row-major ids starting at 1.

    Node (r, c) lands uniformly in [c*s - p*s, c*s + p*s] x [r*s - p*s, r*s + p*s].
    The x offset is drawn before the y offset for each node in id order.
    """
    jitter = params.perturbation * params.spacing
    positions: dict[int, Position] = {}
    for row in range(params.grid_rows):
        for col in range(params.grid_cols):
            x = col * params.spacing + rng.uniform(-jitter, jitter)
            y = row * params.spacing + rng.uniform(-jitter, jitter)
            positions[params.node_at(row, col)] = Position(x, y)
    return positions


def build_qudg(positions: dict[int, Position], params: TopologyParams,
               rng: random.Random) -> Topology:
    """Sample the Q-UDG link set over the given positions.

    Pairs are visited in ascending (i, j) order and a variate is drawn only
    for pairs inside the probabilistic band, so a fixed seed reproduces the
    identical link set.
    """
    certain = params.qudg_factor * params.tx_range
    ids = sorted(positions)
    links = set()
    for a, i in enumerate(ids):
        pi = positions[i]
        for j in ids[a + 1:]:
            d = math.dist(pi, positions[j])
            if d < certain:
                links.add((i, j))
            elif d < params.tx_range:
                if rng.random() < link_probability(d, params.tx_range, params.qudg_factor):
                    links.add((i, j))
    return Topology(params=params, positions=dict(positions), links=frozenset(links))


def generate(params: TopologyParams) -> Topology:
    """Place and link a topology from its own seed (placement and link
    randomness run on separate named streams)."""
    positions = place_nodes(params, substream(params.seed, "placement"))
    return build_qudg(positions, params, substream(params.seed, "links"))


def average_degree(topo: Topology) -> float:
    """Mean link count over interior grid nodes.

    Boundary rows/columns are excluded to avoid edge effects; when the grid
    has no interior (fewer than 3 rows or columns) all nodes count.
    """
    p = topo.params
    interior = [
        n for n in topo.nodes
        if 0 < p.grid_cell(n)[0] < p.grid_rows - 1
        and 0 < p.grid_cell(n)[1] < p.grid_cols - 1
    ]
    pool = interior or list(topo.nodes)
    return sum(topo.degree(n) for n in pool) / len(pool)


def topology_to_text(topo: Topology) -> str:
    """Serialize to the plain text exchange format.

    Header `N R a p spacing seed`, then one `id x y` line per node, then one
    `i j` line per link. Floats use repr so the round-trip is lossless.
    """
    p = topo.params
    lines = [f"{topo.node_count} {p.tx_range!r} {p.qudg_factor!r} "
             f"{p.perturbation!r} {p.spacing!r} {p.seed}"]
    for n in topo.nodes:
        pos = topo.positions[n]
        lines.append(f"{n} {pos.x!r} {pos.y!r}")
    for i, j in sorted(topo.links):
        lines.append(f"{i} {j}")
    return "\n".join(lines) + "\n"


def save_topology(topo: Topology, path) -> None:
    with open(path, "w") as fh:
        fh.write(topology_to_text(topo))


def topology_from_text(text: str) -> Topology:
    """Parse the text exchange format; leading `#` comment lines are skipped.

    The header carries no grid shape, so rows/cols are inferred: sqrt(N) for
    square N, else a single row (matrix views then report unavailable).
    """
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty topology file")
    head = rows[0].split()
    if len(head) != 6:
        raise ValueError(f"malformed header: {rows[0]!r}")
    n = int(head[0])
    tx_range, qudg_factor, perturbation, spacing = map(float, head[1:5])
    seed = int(head[5])
    side = math.isqrt(n)
    grid_rows, grid_cols = (side, side) if side * side == n else (1, n)
    params = TopologyParams(grid_rows=grid_rows, grid_cols=grid_cols, spacing=spacing,
                            perturbation=perturbation, tx_range=tx_range,
                            qudg_factor=qudg_factor, seed=seed)
    positions: dict[int, Position] = {}
    links = set()
    for ln in rows[1:]:
        parts = ln.split()
        if len(parts) == 3:
            positions[int(parts[0])] = Position(float(parts[1]), float(parts[2]))
        elif len(parts) == 2:
            i, j = int(parts[0]), int(parts[1])
            links.add((min(i, j), max(i, j)))
        else:
            raise ValueError(f"malformed line: {ln!r}")
    if len(positions) != n:
        raise ValueError(f"header says {n} nodes, file has {len(positions)}")
    return Topology(params=params, positions=positions, links=frozenset(links))


def load_topology(path) -> Topology:
    with open(path) as fh:
        return topology_from_text(fh.read())
