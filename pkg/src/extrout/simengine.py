"""Deterministic interval-stepped execution of a scenario plan.

Traffic is synchronous and lossless: each interval replays the steady-state
schedule once, so per-node totals are the per-interval counts scaled by the
interval count (order within an interval never affects totals).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .protocols import ScenarioPlan, dummy_schedule
from .rng import substream
from .topology import TopologyParams

HEAT_GLYPHS = " .:-=+*#%@"  # 10 intensity levels for the ASCII matrix view


@dataclass
class TrafficTrace:
    """What the network did: transmit counts per node and per link."""

    node_tx: dict[int, int]
    link_tx: dict[tuple[int, int], int]
    intervals: int
    delivered_real: int

    @property
    def total_transmissions(self) -> int:
        return sum(self.node_tx.values())


def run(plan: ScenarioPlan, packet_budget: int | None = None, seed: int = 0) -> TrafficTrace:
    """Execute the plan for packet_budget intervals (default: the plan's own).

    Lossless and deterministic: every interval emits the same schedule, the
    real packet is delivered each interval, and counts are exact multiples
    of the per-interval schedule.
    """
    budget = plan.packet_budget if packet_budget is None else packet_budget
    if budget < 1:
        raise ValueError(f"packet_budget must be at least 1, got {budget}")
    schedule = dummy_schedule(plan)
    node_tx = {n: 0 for n in sorted(plan.topology.positions)}
    per_node = Counter(ev.sender for ev in schedule.events)
    for n, c in per_node.items():
        node_tx[n] = c * budget
    per_link = Counter((min(ev.sender, ev.next_hop), max(ev.sender, ev.next_hop))
                       for ev in schedule.events if ev.next_hop is not None)
    link_tx = {lk: c * budget for lk, c in sorted(per_link.items())}
    carries_real = any(ev.kind == "real" for ev in schedule.events)
    delivered = budget * plan.source_rate if carries_real else 0
    return TrafficTrace(node_tx=node_tx, link_tx=link_tx, intervals=budget,
                        delivered_real=delivered)


def iter_intervals(plan: ScenarioPlan, packet_budget: int | None = None,
                   seed: int = 0, jitter: bool = False):
    """Stream the per-interval event lists the closed-form run() aggregates.

    With jitter on, each interval's emission order is shuffled (seeded);
    totals are unaffected, which is why run() may aggregate closed-form.
    """
    budget = plan.packet_budget if packet_budget is None else packet_budget
    schedule = dummy_schedule(plan)
    rng = substream(seed, "jitter")
    for _ in range(budget):
        events = list(schedule.events)
        if jitter:
            rng.shuffle(events)
        yield events


def transmission_matrix(trace: TrafficTrace, params: TopologyParams) -> list[list[int]]:
    """Per-grid-cell transmit counts, row-major, for grid-placed topologies."""
    ids = set(trace.node_tx)
    if ids != set(range(1, params.node_count + 1)):
        raise ValueError("matrix view unavailable: trace does not cover the full grid")
    return [[trace.node_tx[params.node_at(r, c)] for c in range(params.grid_cols)]
            for r in range(params.grid_rows)]


def mean_matrix(matrices: list[list[list[int]]]) -> list[list[float]]:
    """Cell-wise mean over equally shaped matrices."""
    if not matrices:
        raise ValueError("no matrices to average")
    rows, cols = len(matrices[0]), len(matrices[0][0])
    return [[sum(m[r][c] for m in matrices) / len(matrices) for c in range(cols)]
            for r in range(rows)]


def trace_to_csv(trace: TrafficTrace) -> str:
    """`node_id,tx_count` rows with the interval count in a comment header."""
    lines = [f"# intervals={trace.intervals}", "node_id,tx_count"]
    for n in sorted(trace.node_tx):
        lines.append(f"{n},{trace.node_tx[n]}")
    return "\n".join(lines) + "\n"


def matrix_to_csv(matrix) -> str:
    return "\n".join(",".join(repr(cell) if isinstance(cell, float) else str(cell)
                              for cell in row)
                     for row in matrix) + "\n"


def matrix_from_csv(text: str) -> list[list[float]]:
    rows = []
    for ln in text.splitlines():
        if not ln.strip() or ln.lstrip().startswith("#"):
            continue
        rows.append([float(cell) for cell in ln.split(",")])
    return rows


def ascii_heatmap(matrix) -> str:
    """Counts bucketed into 10 glyph levels, one grid row per line."""
    peak = max((cell for row in matrix for cell in row), default=0)
    out = []
    for row in matrix:
        if peak <= 0:
            out.append(HEAT_GLYPHS[0] * len(row))
        else:
            out.append("".join(HEAT_GLYPHS[round(9 * cell / peak)] for cell in row))
    return "\n".join(out) + "\n"
