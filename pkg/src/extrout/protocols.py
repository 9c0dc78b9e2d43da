"""Scenario assembly for each privacy technique.

A scenario plan fixes the real pair, the extended/duplicate/fake paths and
the traffic parameters; the dummy schedule derived from it is the steady
state one interval of synchronized cover traffic.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .routing import ExtendedRoute, Route, extrapolate, hop_distances, shortest_path
from .topology import Topology

logger = logging.getLogger(__name__)

VARIANT_KINDS = ("no_privacy", "extrout_baseline", "extrout_duplicates",
                 "extrout_fake", "nfake_pairs")
_PARAMETERISED = ("extrout_duplicates", "extrout_fake", "nfake_pairs")


class PlacementError(Exception):
    """No admissible fake source-destination pair exists."""


@dataclass(frozen=True)
class ProtocolVariant:
    """Which privacy technique runs, with its path count where applicable.

    residual_cover_rate adds that many dummy transmissions per interval at
    every node of the network, on top of the per-path cover streams.
    """

    kind: str
    count: int = 0
    residual_cover_rate: int = 0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if self.kind in _PARAMETERISED and self.count < 1:
            raise ValueError(f"{self.kind} needs count >= 1, got {self.count}")
        if self.kind not in _PARAMETERISED and self.count != 0:
            raise ValueError(f"{self.kind} takes no count")
        if self.residual_cover_rate < 0 or self.residual_cover_rate != int(self.residual_cover_rate):
            raise ValueError("residual_cover_rate must be a non-negative integer")

    @classmethod
    def no_privacy(cls, residual_cover_rate: int = 0):
        return cls("no_privacy", residual_cover_rate=residual_cover_rate)

    @classmethod
    def extrout(cls, residual_cover_rate: int = 0):
        return cls("extrout_baseline", residual_cover_rate=residual_cover_rate)

    @classmethod
    def duplicates(cls, n: int, residual_cover_rate: int = 0):
        return cls("extrout_duplicates", count=n, residual_cover_rate=residual_cover_rate)

    @classmethod
    def fake(cls, n: int, residual_cover_rate: int = 0):
        return cls("extrout_fake", count=n, residual_cover_rate=residual_cover_rate)

    @classmethod
    def nfake(cls, n: int, residual_cover_rate: int = 0):
        return cls("nfake_pairs", count=n, residual_cover_rate=residual_cover_rate)

    @property
    def uses_cover(self) -> bool:
        """Extended variants run synchronized cover on their chains."""
        return self.kind.startswith("extrout")


@dataclass(frozen=True)
class ScenarioSettings:
    """Knobs shared by every variant; extension lengths default to a uniform
    draw from [ext_low, ext_high] unless pinned explicitly."""

    source_ext: int | None = None
    dest_ext: int | None = None
    ext_low: int = 2
    ext_high: int = 5
    strict: bool = True
    source_rate: int = 1
    packet_budget: int = 7000

    def __post_init__(self):
        if not 0 <= self.ext_low <= self.ext_high:
            raise ValueError(f"bad extension interval [{self.ext_low}, {self.ext_high}]")
        for v in (self.source_ext, self.dest_ext):
            if v is not None and v < 0:
                raise ValueError("pinned extensions must be non-negative")
        if self.source_rate < 1:
            raise ValueError("source_rate must be at least 1")
        if self.packet_budget < 1:
            raise ValueError("packet_budget must be at least 1")


FakePath = Union[ExtendedRoute, Route]


@dataclass
class ScenarioPlan:
    """Everything the simulator needs for one scenario instance."""

    topology: Topology
    source: int
    dest: int
    variant: ProtocolVariant
    real_route: Route
    main: ExtendedRoute | None = None
    duplicates: tuple[Route, ...] = ()
    fake_paths: tuple[FakePath, ...] = ()
    requested_source_ext: int = 0
    requested_dest_ext: int = 0
    duplicate_shortfall: int = 0
    source_rate: int = 1
    packet_budget: int = 7000

    def carrier(self) -> Route:
        """The chain that carries the real packet."""
        return self.main.route if self.main is not None else self.real_route

    def cover_chains(self) -> tuple[Route, ...]:
        """Chains that carry dummies only."""
        fakes = tuple(f.route if isinstance(f, ExtendedRoute) else f
                      for f in self.fake_paths)
        return self.duplicates + fakes

    def all_chains(self) -> tuple[Route, ...]:
        return (self.carrier(),) + self.cover_chains()


class TxEvent(NamedTuple):
    sender: int
    next_hop: int | None
    kind: str  # "real" | "dummy" | "residual"


@dataclass(frozen=True)
class TransmissionSchedule:
    """One steady-state interval of transmissions; the simulator repeats it."""

    events: tuple[TxEvent, ...]

    @property
    def per_interval(self) -> int:
        return len(self.events)

    def senders(self) -> tuple[int, ...]:
        return tuple(sorted({ev.sender for ev in self.events}))


def build_scenario(topo: Topology, source: int, dest: int,
                   variant: ProtocolVariant,
                   settings: ScenarioSettings | None = None,
                   rng: random.Random | None = None) -> ScenarioPlan:
    """Assemble a scenario plan for the given variant.

    Extension lengths, extension tie-breaks and fake placements draw from
    rng; a fixed seed reproduces the identical plan.
    """
    settings = settings or ScenarioSettings()
    rng = rng or random.Random(0)
    real = shortest_path(topo, source, dest)
    plan = ScenarioPlan(topology=topo, source=source, dest=dest, variant=variant,
                        real_route=real, source_rate=settings.source_rate,
                        packet_budget=settings.packet_budget)

    if variant.kind == "no_privacy":
        return plan

    if variant.kind == "nfake_pairs":
        plan.fake_paths = _fake_plain_routes(topo, source, dest, variant.count,
                                             real, rng)
        return plan

    # extrout family: extrapolate the real route first
    src_ext = settings.source_ext if settings.source_ext is not None \
        else rng.randint(settings.ext_low, settings.ext_high)
    dst_ext = settings.dest_ext if settings.dest_ext is not None \
        else rng.randint(settings.ext_low, settings.ext_high)
    plan.requested_source_ext = src_ext
    plan.requested_dest_ext = dst_ext
    plan.main = extrapolate(topo, real, src_ext, dst_ext, rng, strict=settings.strict)

    if variant.kind == "extrout_duplicates":
        from .routing import disjoint_paths
        dups = disjoint_paths(topo, plan.main.anchor_source, plan.main.anchor_dest,
                              variant.count, excluded=plan.main.route)
        plan.duplicates = tuple(dups)
        plan.duplicate_shortfall = variant.count - len(dups)
    elif variant.kind == "extrout_fake":
        plan.fake_paths = _fake_extended_routes(topo, source, dest, variant.count,
                                                plan.main, settings, rng)
    return plan


def _fake_plain_routes(topo, source, dest, n, real, rng):
    """n fake shortest paths for the N-fake-pairs technique."""
    taken: set[int] = set()
    hop_cache: dict[int, dict[int, int]] = {}
    routes = []
    for _ in range(n):
        fs, fd = place_fake_pair(topo, source, dest, rng, avoid=taken,
                                 hop_cache=hop_cache)
        fake = shortest_path(topo, fs, fd)
        routes.append(fake)
        taken.update(fake.nodes)
    return tuple(routes)


def _fake_extended_routes(topo, source, dest, n, main, settings, rng):
    """n fake extended paths; their extrapolation never touches the real
    route or an earlier fake."""
    taken: set[int] = set()
    hop_cache: dict[int, dict[int, int]] = {}
    fakes = []
    for _ in range(n):
        fs, fd = place_fake_pair(topo, source, dest, rng, avoid=taken,
                                 hop_cache=hop_cache)
        fake = shortest_path(topo, fs, fd)
        f_src = settings.source_ext if settings.source_ext is not None \
            else rng.randint(settings.ext_low, settings.ext_high)
        f_dst = settings.dest_ext if settings.dest_ext is not None \
            else rng.randint(settings.ext_low, settings.ext_high)
        ext = extrapolate(topo, fake, f_src, f_dst, rng, strict=settings.strict,
                          avoid=set(main.route.nodes) | taken)
        fakes.append(ext)
        taken.update(ext.route.nodes)
    return tuple(fakes)


def place_fake_pair(topo: Topology, source: int, dest: int, rng: random.Random,
                    avoid=(), hop_cache: dict | None = None) -> tuple[int, int]:
    """Pick a decoy pair whose hop separation is within 1 of the real pair's.

    Among admissible pairs the one whose segment midpoint lies farthest from
    the real route wins (ties break via rng); the fake shortest path must
    share no node with the real route or with `avoid`. The separation slack
    relaxes to 2 if nothing qualifies at 1, then placement fails.
    """
    real = shortest_path(topo, source, dest)
    want = real.hops
    forbidden = set(real.nodes) | set(avoid)
    real_pts = [topo.positions[n] for n in real.nodes]
    cache = hop_cache if hop_cache is not None else {}

    def dists(u):
        if u not in cache:
            cache[u] = hop_distances(topo, u)
        return cache[u]

    for slack in (1, 2):
        scored = []
        for u in topo.nodes:
            if u in forbidden:
                continue
            du = dists(u)
            ux, uy = topo.positions[u]
            for v in topo.nodes:
                if v <= u or v in forbidden:
                    continue
                d = du.get(v)
                if d is None or abs(d - want) > slack:
                    continue
                vx, vy = topo.positions[v]
                mid = ((ux + vx) / 2, (uy + vy) / 2)
                gap = min(math.dist(mid, p) for p in real_pts)
                scored.append((-gap, u, v))
        scored.sort()
        i = 0
        while i < len(scored):
            # one score tier at a time, shuffled so ties break randomly
            j = i
            while j < len(scored) and scored[j][0] == scored[i][0]:
                j += 1
            tier = scored[i:j]
            rng.shuffle(tier)
            for _gap, u, v in tier:
                fake = shortest_path(topo, u, v)
                if not (set(fake.nodes) & forbidden):
                    return u, v
            i = j
    raise PlacementError(
        f"no fake pair within 2 hops of separation {want} avoids the real route")


def dummy_schedule(plan: ScenarioPlan) -> TransmissionSchedule:
    """One steady-state interval: every non-terminal node of every active
    chain forwards once per source packet; terminal sinks only receive.

    The real packet rides the source-to-dest segment of the carrier chain,
    everything else is dummy traffic. Counts never depend on the kind tags.
    """
    events: list[TxEvent] = []
    carrier = plan.carrier()
    lo, hi = (plan.main.source_index, plan.main.dest_index) if plan.main is not None \
        else (0, carrier.hops)
    for idx, (u, v) in enumerate(carrier.links()):
        events.append(TxEvent(u, v, "real" if lo <= idx < hi else "dummy"))
    for chain in plan.cover_chains():
        for u, v in chain.links():
            events.append(TxEvent(u, v, "dummy"))
    events *= plan.source_rate
    for node in sorted(plan.topology.positions):
        for _ in range(plan.variant.residual_cover_rate):
            events.append(TxEvent(node, None, "residual"))
    return TransmissionSchedule(tuple(events))


def pad_link(rate_high: float, rate_low: float) -> float:
    """Dummy rate to inject on the lower-rate branch at a merge node so both
    inbound flows present the same observable rate.

    With branch rates A1 >= A2 meeting at one relay, the relay forwards
    A1 + A2 while the A2 branch pads itself by A2. Single-flow scenarios
    never call this.
    """
    if rate_low < 0 or rate_high < rate_low:
        raise ValueError(f"need rate_high >= rate_low >= 0, got ({rate_high}, {rate_low})")
    return rate_low
