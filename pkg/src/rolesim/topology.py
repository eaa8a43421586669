"""Hierarchical device/edge/cloud network substrate.

Nodes carry compute, memory, energy and concurrency capabilities; directed
links carry bandwidth, latency and reliability. Routes are static
minimum-latency shortest paths computed once at build time, with ties broken
by the lexicographically smallest node-id sequence.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import (
    DisconnectedTopology,
    DuplicateLink,
    InvalidSpec,
    NonPositiveBandwidth,
    NoRoute,
    TierMemoryInversion,
    UnknownNodeReference,
)


class Tier(IntEnum):
    DEVICE = 0
    EDGE = 1
    CLOUD = 2


_TIER_NAMES = {"device": Tier.DEVICE, "edge": Tier.EDGE, "cloud": Tier.CLOUD}

UNBOUNDED = math.inf


def parse_tier(value) -> Tier:
    if isinstance(value, Tier):
        return value
    if isinstance(value, int) and value in (0, 1, 2):
        return Tier(value)
    name = str(value).strip().lower()
    if name in _TIER_NAMES:
        return _TIER_NAMES[name]
    raise InvalidSpec(f"unknown tier {value!r} (expected device/edge/cloud)")


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    tier: Tier
    compute_rate: float            # work-units per second
    memory_capacity: float         # MB
    energy_budget: float = UNBOUNDED   # joules; inf = unbounded
    energy_per_work_unit: float = 0.0  # joules per work-unit
    concurrency_slots: int = 1

    def __post_init__(self):
        if self.compute_rate <= 0:
            raise InvalidSpec(f"node {self.node_id}: compute_rate must be > 0")
        if self.memory_capacity < 0:
            raise InvalidSpec(f"node {self.node_id}: memory_capacity must be >= 0")
        if self.energy_budget < 0:
            raise InvalidSpec(f"node {self.node_id}: energy_budget must be >= 0")
        if self.energy_per_work_unit < 0:
            raise InvalidSpec(f"node {self.node_id}: energy_per_work_unit must be >= 0")
        if self.concurrency_slots < 1:
            raise InvalidSpec(f"node {self.node_id}: concurrency_slots must be >= 1")


@dataclass(frozen=True)
class LinkSpec:
    src: str
    dst: str
    bandwidth: float    # MB/s
    latency: float      # ms
    reliability: float  # per-transfer success probability

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise NonPositiveBandwidth(f"link {self.src}->{self.dst}: bandwidth must be > 0")
        if self.latency < 0:
            raise InvalidSpec(f"link {self.src}->{self.dst}: latency must be >= 0")
        if not (0 < self.reliability <= 1):
            raise InvalidSpec(f"link {self.src}->{self.dst}: reliability must be in (0, 1]")


class Topology:
    """Immutable after build; safe to share read-only across parallel runs."""

    def __init__(self, nodes: dict[str, NodeSpec], links: dict[tuple[str, str], LinkSpec],
                 route_table: dict[tuple[str, str], tuple[LinkSpec, ...]]):
        self.nodes = nodes
        self.links = links
        self.route_table = route_table
        # Per-route affine transfer-cost coefficients: ms = size * unit + base.
        self._unit_cost = {}
        self._base_cost = {}
        self._reliability = {}
        for pair, path in route_table.items():
            self._unit_cost[pair] = sum(1000.0 / l.bandwidth for l in path)
            self._base_cost[pair] = sum(l.latency for l in path)
            prod = 1.0
            for l in path:
                prod *= l.reliability
            self._reliability[pair] = prod

    @property
    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def route(self, src: str, dst: str) -> tuple[LinkSpec, ...]:
        if src not in self.nodes or dst not in self.nodes:
            raise UnknownNodeReference(f"unknown node in route query: {src!r} -> {dst!r}")
        if src == dst:
            return ()
        try:
            return self.route_table[(src, dst)]
        except KeyError:
            raise NoRoute(f"no route from {src} to {dst}") from None

    def route_reliability(self, src: str, dst: str) -> float:
        if src == dst:
            return 1.0
        self.route(src, dst)
        return self._reliability[(src, dst)]

    def digest(self) -> str:
        """Stable hash of the substrate, used as the policy-cache signature part."""
        h = hashlib.sha256()
        for nid in self.node_ids:
            n = self.nodes[nid]
            h.update(
                f"N|{n.node_id}|{int(n.tier)}|{n.compute_rate!r}|{n.memory_capacity!r}"
                f"|{n.energy_budget!r}|{n.energy_per_work_unit!r}|{n.concurrency_slots}\n".encode()
            )
        for key in sorted(self.links):
            l = self.links[key]
            h.update(f"L|{l.src}|{l.dst}|{l.bandwidth!r}|{l.latency!r}|{l.reliability!r}\n".encode())
        return h.hexdigest()


def _shortest_routes(nodes: dict[str, NodeSpec], links: dict[tuple[str, str], LinkSpec]):
    """Min-latency Dijkstra from every source; ties by smallest node-id sequence."""
    adjacency: dict[str, list[LinkSpec]] = {nid: [] for nid in nodes}
    for link in links.values():
        adjacency[link.src].append(link)
    for out in adjacency.values():
        out.sort(key=lambda l: l.dst)

    table: dict[tuple[str, str], tuple[LinkSpec, ...]] = {}
    for src in sorted(nodes):
        best: dict[str, tuple[float, tuple[str, ...]]] = {}
        heap = [(0.0, (src,), ())]
        while heap:
            dist, path, link_path = heapq.heappop(heap)
            node = path[-1]
            if node in best:
                continue
            best[node] = (dist, path)
            if node != src:
                table[(src, node)] = link_path
            for link in adjacency[node]:
                if link.dst not in best:
                    heapq.heappush(
                        heap, (dist + link.latency, path + (link.dst,), link_path + (link,))
                    )
    return table


def build_topology(config: dict) -> Topology:
    """Validate a `topology` config section and compute the route table."""
    node_items = config.get("nodes") or []
    if not node_items:
        raise InvalidSpec("topology must declare at least one node")
    nodes: dict[str, NodeSpec] = {}
    for item in node_items:
        budget = item.get("energy_budget", "unbounded")
        if isinstance(budget, str):
            if budget.lower() != "unbounded":
                raise InvalidSpec(f"bad energy_budget {budget!r}")
            budget = UNBOUNDED
        spec = NodeSpec(
            node_id=str(item["node_id"]),
            tier=parse_tier(item["tier"]),
            compute_rate=float(item["compute_rate"]),
            memory_capacity=float(item["memory_capacity"]),
            energy_budget=float(budget),
            energy_per_work_unit=float(item.get("energy_per_work_unit", 0.0)),
            concurrency_slots=int(item.get("concurrency_slots", 1)),
        )
        if spec.node_id in nodes:
            raise InvalidSpec(f"duplicate node_id {spec.node_id!r}")
        nodes[spec.node_id] = spec

    links: dict[tuple[str, str], LinkSpec] = {}
    for item in config.get("links") or []:
        link = LinkSpec(
            src=str(item["from"]),
            dst=str(item["to"]),
            bandwidth=float(item["bandwidth"]),
            latency=float(item["latency"]),
            reliability=float(item.get("reliability", 1.0)),
        )
        for endpoint in (link.src, link.dst):
            if endpoint not in nodes:
                raise UnknownNodeReference(f"link references unknown node {endpoint!r}")
        if link.src == link.dst:
            raise InvalidSpec(f"self-link on {link.src!r}")
        if (link.src, link.dst) in links:
            raise DuplicateLink(f"duplicate link {link.src}->{link.dst}")
        links[(link.src, link.dst)] = link

    # Tier memory ordering: every cloud >= every edge >= every device.
    by_tier = {tier: [n for n in nodes.values() if n.tier == tier] for tier in Tier}
    for upper, lower in ((Tier.CLOUD, Tier.EDGE), (Tier.EDGE, Tier.DEVICE)):
        if by_tier[upper] and by_tier[lower]:
            weakest = min(by_tier[upper], key=lambda n: n.memory_capacity)
            strongest = max(by_tier[lower], key=lambda n: n.memory_capacity)
            if weakest.memory_capacity < strongest.memory_capacity:
                raise TierMemoryInversion(
                    f"{upper.name.lower()} node {weakest.node_id!r} has less memory "
                    f"({weakest.memory_capacity} MB) than {lower.name.lower()} node "
                    f"{strongest.node_id!r} ({strongest.memory_capacity} MB)"
                )

    table = _shortest_routes(nodes, links)
    for src in nodes:
        for dst in nodes:
            if src != dst and (src, dst) not in table:
                raise DisconnectedTopology(f"no route from {src!r} to {dst!r}")
    return Topology(nodes, links, table)


def transfer_time(topo: Topology, src: str, dst: str, size_mb: float) -> float:
    """Milliseconds to move `size_mb` along the routed path; 0 when colocated."""
    if size_mb < 0:
        raise InvalidSpec("transfer size must be >= 0")
    if src == dst:
        if src not in topo.nodes:
            raise UnknownNodeReference(f"unknown node {src!r}")
        return 0.0
    topo.route(src, dst)
    pair = (src, dst)
    return size_mb * topo._unit_cost[pair] + topo._base_cost[pair]


def sample_transfer_success(topo: Topology, src: str, dst: str,
                            rng: np.random.Generator) -> bool:
    """One Bernoulli draw against the product of link reliabilities on the path."""
    if src == dst:
        if src not in topo.nodes:
            raise UnknownNodeReference(f"unknown node {src!r}")
        return True
    prob = topo.route_reliability(src, dst)
    return float(rng.random()) < prob
