"""Global passive adversary: rate-monitoring inference over observable traffic.

The attacker sees every transmission count in the network plus the public
topology, never packet contents, kinds or route metadata. Link counts stand
for relayed-flow evidence (a designated next hop); undirected residual
broadcasts raise node counts only.

Scheme knowledge is public: the attacker knows whether the deployed variant
runs synchronized cover traffic. Without cover, forwarding is a causal relay
wave and time correlation pins each chain's head and tail; with cover, every
chain node transmits every interval, timing is uninformative, and any
transmitting node of a uniform-rate chain is a source candidate (that is
exactly what route extrapolation forces).
"""

from __future__ import annotations

import math
import random
import statistics
from collections import defaultdict
from dataclasses import dataclass

from .rng import substream
from .simengine import TrafficTrace, run
from .topology import Position, Topology


@dataclass(frozen=True)
class AttackerObservation:
    """Everything the eavesdropper gets to work with. Built by observe(),
    which strips kinds, routes and endpoint identities."""

    node_tx: dict[int, int]
    link_tx: dict[tuple[int, int], int]
    positions: dict[int, Position]
    links: frozenset[tuple[int, int]]


def observe(trace: TrafficTrace, topo: Topology) -> AttackerObservation:
    """Project a trace onto the attacker-visible surface."""
    return AttackerObservation(node_tx=dict(trace.node_tx),
                               link_tx=dict(trace.link_tx),
                               positions=dict(topo.positions),
                               links=topo.links)


def _effective_threshold(obs: AttackerObservation, threshold: float | None) -> float:
    if threshold is None:
        # Chain evidence lives in the link counts and residual dummies
        # never form links, so any repeated transmission is signal.
        return 1.0
    if threshold < 1:
        raise ValueError(f"threshold must be at least 1, got {threshold}")
    return float(threshold)


def active_subgraph(obs: AttackerObservation, threshold: float | None = None
                    ) -> tuple[frozenset[int], frozenset[tuple[int, int]]]:
    """Nodes and links carrying sustained traffic.

    A node is active when it transmits at or above the threshold (default:
    any transmission at all) or terminates an active link, so silent
    terminal sinks are included through their inbound traffic.
    """
    thr = _effective_threshold(obs, threshold)
    links = frozenset(lk for lk, c in obs.link_tx.items() if c >= thr)
    nodes = {n for n, c in obs.node_tx.items() if c >= thr}
    for i, j in links:
        nodes.add(i)
        nodes.add(j)
    return frozenset(nodes), links


@dataclass(frozen=True)
class Branch:
    """A maximal chain of the active subgraph, oriented head -> tail by
    transmit counts (the silent end is the sink side)."""

    nodes: tuple[int, ...]
    uniform: bool

    @property
    def head(self) -> int:
        return self.nodes[0]

    @property
    def tail(self) -> int:
        return self.nodes[-1]

    @property
    def transmitters(self) -> tuple[int, ...]:
        return self.nodes[:-1]

    @property
    def receivers(self) -> tuple[int, ...]:
        return self.nodes[1:]


def traffic_branches(obs: AttackerObservation, threshold: float | None = None
                     ) -> tuple[Branch, ...]:
    """Decompose the active subgraph into maximal simple chains.

    Chains are cut at structural junctions (active-degree != 2) and at
    rate-anomalous nodes whose count matches neither active neighbor: two
    parallel paths sharing their end nodes form a degree-2 cycle, but the
    shared ends still stand out by transmitting double rate (or nothing).
    """
    nodes, links = active_subgraph(obs, threshold)
    adj: dict[int, list[int]] = defaultdict(list)
    for i, j in sorted(links):
        adj[i].append(j)
        adj[j].append(i)

    def is_stop(n: int) -> bool:
        if len(adj[n]) != 2:
            return True
        own = obs.node_tx.get(n, 0)
        return all(obs.node_tx.get(m, 0) != own for m in adj[n])

    stops = {n for n in nodes if is_stop(n)}
    if not stops and links:
        stops = {min(adj)}  # uniform cycle: cut it somewhere deterministic
    seen: set[tuple[int, int]] = set()
    branches = []
    for start in sorted(stops):
        for nxt in sorted(adj[start]):
            if (start, nxt) in seen:
                continue
            chain = [start]
            prev, cur = start, nxt
            seen.add((prev, cur))
            seen.add((cur, prev))
            while cur not in stops and cur != start:
                chain.append(cur)
                prev, cur = cur, next(m for m in adj[cur] if m != prev)
                seen.add((prev, cur))
                seen.add((cur, prev))
            chain.append(cur)
            branches.append(_orient(chain, obs))
    return tuple(branches)


def _orient(chain: list[int], obs: AttackerObservation) -> Branch:
    head_tx = obs.node_tx.get(chain[0], 0)
    tail_tx = obs.node_tx.get(chain[-1], 0)
    if head_tx < tail_tx:
        chain = chain[::-1]
    rates = {obs.link_tx.get((min(u, v), max(u, v)), 0)
             for u, v in zip(chain, chain[1:])}
    return Branch(nodes=tuple(chain), uniform=len(rates) == 1)


def endpoint_candidates(obs: AttackerObservation, cover_traffic: bool = True,
                        threshold: float | None = None
                        ) -> tuple[frozenset[int], frozenset[int]]:
    """Candidate source and destination sets under rate monitoring.

    With cover traffic every transmitting node of each chain could be the
    source and every receiving node the destination; without it, time
    correlation exposes the chain heads and tails themselves.
    """
    sources: set[int] = set()
    dests: set[int] = set()
    for b in traffic_branches(obs, threshold):
        if cover_traffic:
            sources.update(b.transmitters)
            dests.update(b.receivers)
        else:
            sources.add(b.head)
            dests.add(b.tail)
    return frozenset(sources), frozenset(dests)


def guess_endpoints(obs: AttackerObservation, rng: random.Random,
                    cover_traffic: bool = True, threshold: float | None = None
                    ) -> tuple[int, int, Branch, int, int]:
    """One attack: pick a chain uniformly, then endpoints within it.

    Returns (source_guess, dest_guess, picked_branch, |Gs|, |Gd|). The
    source-guess law is uniform over the picked chain's candidates, which
    realizes the guess-one-of-N arithmetic the candidate sets announce.
    """
    branches = traffic_branches(obs, threshold)
    if not branches:
        raise ValueError("no active traffic to attack")
    gs, gd = endpoint_candidates(obs, cover_traffic, threshold)
    pick = branches[rng.randrange(len(branches))]
    if cover_traffic:
        src_pool, dst_pool = pick.transmitters, pick.receivers
    else:
        src_pool, dst_pool = (pick.head,), (pick.tail,)
    source = src_pool[rng.randrange(len(src_pool))]
    dest = dst_pool[rng.randrange(len(dst_pool))]
    return source, dest, pick, len(gs), len(gd)


@dataclass(frozen=True)
class AttackVerdict:
    source_guess: int
    dest_guess: int
    source_candidates: int
    dest_candidates: int
    correct_source: bool
    correct_dest: bool
    on_real_path: bool  # the picked chain holds the real route


@dataclass(frozen=True)
class AttackSummary:
    """Monte Carlo attack outcome with Wilson 95% intervals."""

    trials: int
    source_rate: float
    dest_rate: float
    pair_rate: float  # both endpoints correct in the same trial
    source_ci: tuple[float, float]
    dest_ci: tuple[float, float]
    pair_ci: tuple[float, float]
    verdicts: tuple[AttackVerdict, ...]

    @property
    def empirical_anonymity(self) -> float:
        """1 - source success rate, the measured counterpart of the
        analytical single-candidate anonymity."""
        return 1.0 - self.source_rate

    def empirical_anonymity_ci(self) -> tuple[float, float]:
        lo, hi = self.source_ci
        return 1.0 - hi, 1.0 - lo


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


def attack_trials(plan_factory, trials: int, seed: int = 0,
                  cover_traffic: bool | None = None,
                  packet_budget: int | None = None,
                  threshold: float | None = None) -> AttackSummary:
    """Run (scenario, attack) pairs with fresh per-trial randomness.

    plan_factory(rng) supplies the scenario for each trial; guesses come
    from the observation only, and are scored here against the plan's
    ground truth. cover_traffic defaults to whatever the variant implies.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    verdicts = []
    s_hits = d_hits = p_hits = 0
    for t in range(trials):
        plan = plan_factory(substream(seed, f"scenario-{t}"))
        cover = plan.variant.uses_cover if cover_traffic is None else cover_traffic
        trace = run(plan, packet_budget)
        obs = observe(trace, plan.topology)
        src, dst, branch, gs, gd = guess_endpoints(
            obs, substream(seed, f"attack-{t}"), cover, threshold)
        v = AttackVerdict(source_guess=src, dest_guess=dst,
                          source_candidates=gs, dest_candidates=gd,
                          correct_source=src == plan.source,
                          correct_dest=dst == plan.dest,
                          on_real_path=plan.source in branch.nodes)
        verdicts.append(v)
        s_hits += v.correct_source
        d_hits += v.correct_dest
        p_hits += v.correct_source and v.correct_dest
    return AttackSummary(trials=trials,
                         source_rate=s_hits / trials,
                         dest_rate=d_hits / trials,
                         pair_rate=p_hits / trials,
                         source_ci=wilson_interval(s_hits, trials),
                         dest_ci=wilson_interval(d_hits, trials),
                         pair_ci=wilson_interval(p_hits, trials),
                         verdicts=tuple(verdicts))


def unlinkability_score(obs: AttackerObservation, threshold: float | None = None) -> float:
    """1 minus the coefficient of variation of transmit counts over actively
    transmitting nodes, clamped to [0, 1].

    1.0 means perfectly rate-uniform cover (nothing for a rate monitor to
    latch onto); 0.0 means the count structure fully exposes the flow.
    Silent sinks never transmit, so they sit outside the population.
    """
    thr = _effective_threshold(obs, threshold)
    nodes, _links = active_subgraph(obs, threshold)
    counts = [obs.node_tx[n] for n in sorted(nodes) if obs.node_tx.get(n, 0) >= thr]
    if not counts:
        raise ValueError("no active transmitters to score")
    mean = statistics.fmean(counts)
    cv = statistics.pstdev(counts) / mean
    return 1.0 - min(1.0, cv)


def verdicts_to_csv(summary: AttackSummary) -> str:
    lines = ["trial,source_guess,dest_guess,correct_source,correct_dest"]
    for t, v in enumerate(summary.verdicts):
        lines.append(f"{t},{v.source_guess},{v.dest_guess},"
                     f"{int(v.correct_source)},{int(v.correct_dest)}")
    return "\n".join(lines) + "\n"
