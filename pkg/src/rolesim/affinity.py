"""Affinity scoring and every scheduling policy.

Planning is pure: policies consume an immutable snapshot of engine state
(StateView) and return a Placement. The engine serializes all policy
invocations inside one run, so no locking is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import MissingStaticMap, NoFeasibleNode, UnknownRole
from .topology import NodeSpec, Topology, transfer_time
from .workload import RoleSpec, Subtask, TaskDag, classify_difficulty, topological_order

EPSILON_MS = 1.0

DYNAROLE_HEFT = "DynaRoleHeft"
CLASSIC_HEFT = "ClassicHeft"
STATIC_ROLE = "StaticRole"
ROUND_ROBIN = "RoundRobin"
SINGLE_AGENT_SERIAL = "SingleAgentSerial"
SINGLE_AGENT_PARALLEL = "SingleAgentParallel"

POLICY_KINDS = (
    DYNAROLE_HEFT,
    CLASSIC_HEFT,
    STATIC_ROLE,
    ROUND_ROBIN,
    SINGLE_AGENT_SERIAL,
    SINGLE_AGENT_PARALLEL,
)


@dataclass(frozen=True)
class AffinityWeights:
    alpha: float = 1.0   # compute-time weight
    beta: float = 1.0    # communication-time weight
    gamma: float = 1.0   # queue-wait weight
    overload_util_threshold: float = 0.8
    latency_spike_factor: float = 3.0
    ewma_factor: float = 0.2
    reassess_period_ms: float = 200.0
    hysteresis: float = 1.25

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("affinity weights must be >= 0")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("alpha + beta + gamma must be > 0")
        if not (0 < self.overload_util_threshold <= 1):
            raise ValueError("overload_util_threshold must be in (0, 1]")
        if self.latency_spike_factor <= 1:
            raise ValueError("latency_spike_factor must be > 1")
        if not (0 < self.ewma_factor < 1):
            raise ValueError("ewma_factor must be in (0, 1)")


@dataclass
class NodeView:
    """Read-only slice of one node's live state, as the planner sees it."""
    spec: NodeSpec
    energy_remaining: float
    loaded_roles: dict[str, int]          # role -> load-complete time (us)
    expected_wait_us: int                 # wait a newcomer would see now
    ewma_utilization: float = 0.0
    bookings: list[list[tuple[int, int]]] | None = None  # per-slot planned intervals
    queue_waits: list[tuple[int, int]] = field(default_factory=list)
    # queue_waits: (observed wait us, expected wait us at assignment) per queued subtask


@dataclass
class StateView:
    now_us: int
    nodes: dict[str, NodeView]

    def load_band(self) -> str:
        if not self.nodes:
            return "idle"
        mean = sum(v.ewma_utilization for v in self.nodes.values()) / len(self.nodes)
        if mean < 1 / 3:
            return "idle"
        if mean < 2 / 3:
            return "moderate"
        return "high"


@dataclass
class Placement:
    assignments: dict[str, str]
    role_loads: list[tuple[str, str, int]]      # (node, role, load-start us)
    decision_time_us: int
    cache_hit: bool = False
    substituted: frozenset[str] = frozenset()   # subtasks executing on a substituted role
    planned: dict[str, tuple[str, int, int]] = field(default_factory=dict)
    priorities: dict[str, int] | None = None    # explicit queue priorities (oracle replay)
    serialize: bool = False                     # run everything one-at-a-time (ReAct-like)
    pinned_node: str | None = None

    def canonical(self) -> str:
        parts = [f"a:{sid}={self.assignments[sid]}" for sid in sorted(self.assignments)]
        parts += [f"l:{n}:{r}@{t}" for n, r, t in sorted(self.role_loads)]
        parts += [f"s:{sid}" for sid in sorted(self.substituted)]
        parts.append(f"hit:{int(self.cache_hit)}")
        return "|".join(parts)


@dataclass
class CacheTemplate:
    role_seq: tuple[str, ...]   # roles in rank order
    nodes: tuple[str, ...]      # chosen node per rank position


class PolicyCache:
    """Precomputed placement lookup keyed by (topology digest, load band, difficulty)."""

    def __init__(self):
        self.entries: dict[tuple[str, str, str], CacheTemplate] = {}
        self.hits = 0
        self.misses = 0

    def lookup(self, signature):
        return self.entries.get(signature)

    def insert(self, signature, template: CacheTemplate):
        self.entries.setdefault(signature, template)


def estimated_compute_time(s: Subtask, n: NodeSpec, roles: dict[str, RoleSpec],
                           energy_remaining: float | None = None) -> float | None:
    """Execution ms on node `n`, or None when the node is infeasible."""
    if s.role not in roles:
        raise UnknownRole(f"subtask {s.subtask_id} references unknown role {s.role!r}")
    role = roles[s.role]
    if role.model_memory > n.memory_capacity:
        return None
    budget = n.energy_budget if energy_remaining is None else energy_remaining
    if required_energy(s, role, n) > budget:
        return None
    return s.compute_demand * role.compute_multiplier / n.compute_rate * 1000.0


def required_energy(s: Subtask, role: RoleSpec, n: NodeSpec) -> float:
    return s.compute_demand * role.compute_multiplier * n.energy_per_work_unit


def comm_time_ms(topo: Topology, dst: str, s: Subtask, pred_nodes: dict[str, float],
                 source_node: str) -> float:
    """Sum of transfer times the engine would charge to bring context to `dst`.

    pred_nodes maps predecessor location -> output size; zero-size payloads and
    colocated sources move nothing.
    """
    total = 0.0
    if s.base_context_size > 0 and source_node != dst:
        total += transfer_time(topo, source_node, dst, s.base_context_size)
    for src, size in pred_nodes.items():
        if size > 0 and src != dst:
            total += transfer_time(topo, src, dst, size)
    return total


def role_load_ms(view: NodeView, role: RoleSpec, now_us: int) -> float:
    done_at = view.loaded_roles.get(role.role_id)
    if done_at is None:
        return role.load_time
    if done_at <= now_us:
        return 0.0
    return (done_at - now_us) / 1000.0


def affinity_score(s: Subtask, node_id: str, state: StateView, topo: Topology,
                   roles: dict[str, RoleSpec], weights: AffinityWeights, *,
                   pred_transfers: dict[str, float], source_node: str) -> float:
    """Suitability of (subtask, node): reciprocal weighted latency, 0 if infeasible.

    pred_transfers maps each predecessor's node to the payload size it would ship.
    """
    view = state.nodes[node_id]
    t_comp = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
    if t_comp is None:
        return 0.0
    t_comm = comm_time_ms(topo, node_id, s, pred_transfers, source_node)
    t_queue = view.expected_wait_us / 1000.0
    t_load = role_load_ms(view, roles[s.role], state.now_us)
    denom = (weights.alpha * t_comp + weights.beta * t_comm
             + weights.gamma * t_queue + t_load + EPSILON_MS)
    return 1.0 / denom


def feasible_nodes(s: Subtask, topo: Topology, roles: dict[str, RoleSpec],
                   state: StateView | None = None) -> list[str]:
    out = []
    for nid in topo.node_ids:
        spec = topo.nodes[nid]
        energy = state.nodes[nid].energy_remaining if state is not None else None
        if estimated_compute_time(s, spec, roles, energy) is not None:
            out.append(nid)
    return out


def upward_rank(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec]) -> dict[str, float]:
    """Classical upward rank over mean compute and mean pairwise transfer costs."""
    feas = {s.subtask_id: feasible_nodes(s, topo, roles) for s in dag.subtasks}
    mean_comp = {}
    for s in dag.subtasks:
        nodes = feas[s.subtask_id]
        if not nodes:
            raise NoFeasibleNode(f"subtask {s.subtask_id} infeasible on every node")
        mean_comp[s.subtask_id] = sum(
            estimated_compute_time(s, topo.nodes[n], roles) for n in nodes
        ) / len(nodes)

    def mean_comm(producer: Subtask, consumer_id: str) -> float:
        pairs = [
            (a, b)
            for a in feas[producer.subtask_id]
            for b in feas[consumer_id]
            if a != b
        ]
        if not pairs:
            return 0.0
        return sum(transfer_time(topo, a, b, producer.output_size) for a, b in pairs) / len(pairs)

    rank: dict[str, float] = {}
    for sid in reversed(topological_order(dag)):
        s = dag.subtask(sid)
        succ_cost = 0.0
        for c in dag.successors(sid):
            succ_cost = max(succ_cost, mean_comm(s, c) + rank[c])
        rank[sid] = mean_comp[sid] + succ_cost
    return rank


def rank_order(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec]) -> list[str]:
    ranks = upward_rank(dag, topo, roles)
    return sorted(ranks, key=lambda sid: (-ranks[sid], sid))


def _insertion_slot(bookings: list[list[tuple[int, int]]], ready_us: int,
                    dur_us: int) -> tuple[int, int]:
    """Earliest (start, slot index) fitting `dur_us` at or after `ready_us`."""
    best_start, best_slot = None, None
    for idx, intervals in enumerate(bookings):
        start = ready_us
        chosen = None
        for b_start, b_end in intervals:
            if start + dur_us <= b_start:
                chosen = start
                break
            start = max(start, b_end)
        if chosen is None:
            chosen = start
        if best_start is None or chosen < best_start:
            best_start, best_slot = chosen, idx
    return best_start, best_slot


def _transfer_durations(topo: Topology, dst: str, s: Subtask,
                        pred_transfers: dict[str, float], source_node: str) -> list[float]:
    durs = []
    if s.base_context_size > 0 and source_node != dst:
        durs.append(transfer_time(topo, source_node, dst, s.base_context_size))
    for src, size in pred_transfers.items():
        if size > 0 and src != dst:
            durs.append(transfer_time(topo, src, dst, size))
    return durs


def heft_schedule(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec],
                  state: StateView, *, tool_mean_ms: float,
                  source_node: str | None = None) -> Placement:
    """Traditional insertion-based EFT over the plan-time bookings ledger."""
    source = source_node or dag.source_node
    now = state.now_us
    local_bookings = {
        nid: [list(slot) for slot in (view.bookings or
                                      [[] for _ in range(view.spec.concurrency_slots)])]
        for nid, view in state.nodes.items()
    }
    assignments: dict[str, str] = {}
    planned: dict[str, tuple[str, int, int]] = {}
    finish_us: dict[str, int] = {}

    for sid in rank_order(dag, topo, roles):
        s = dag.subtask(sid)
        preds = dag.predecessors(sid)
        dispatch = max((finish_us[p] for p in preds), default=now)
        best = None
        for nid in topo.node_ids:
            view = state.nodes[nid]
            comp_ms = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
            if comp_ms is None:
                continue
            pred_transfers = {assignments[p]: dag.subtask(p).output_size for p in preds}
            xfer = _transfer_durations(topo, nid, s, pred_transfers, source)
            ready = dispatch + (max((_us(d) for d in xfer), default=0))
            dur = _us(comp_ms + s.tool_calls * tool_mean_ms)
            start, slot = _insertion_slot(local_bookings[nid], ready, dur)
            eft = start + dur
            if best is None or (eft, nid) < (best[0], best[1]):
                best = (eft, nid, start, slot, dur)
        if best is None:
            raise NoFeasibleNode(f"subtask {sid} infeasible on every node")
        eft, nid, start, slot, dur = best
        assignments[sid] = nid
        finish_us[sid] = eft
        planned[sid] = (nid, start, eft)
        intervals = local_bookings[nid][slot]
        intervals.append((start, eft))
        intervals.sort()

    return Placement(assignments=assignments, role_loads=[], decision_time_us=now,
                     planned=planned)


def _us(ms: float) -> int:
    return int(round(ms * 1000.0))


def dynarole_schedule(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec],
                      state: StateView, weights: AffinityWeights,
                      cache: PolicyCache | None, *, tool_mean_ms: float,
                      source_node: str | None = None) -> Placement:
    """Rank-ordered argmax-affinity assignment with policy-cache consultation."""
    source = source_node or dag.source_node
    now = state.now_us
    order = rank_order(dag, topo, roles)
    role_seq = tuple(dag.subtask(sid).role for sid in order)
    signature = None
    if cache is not None:
        signature = (topo.digest(), state.load_band(), classify_difficulty(dag))
        template = cache.lookup(signature)
        if template is not None and template.role_seq == role_seq:
            placement = _instantiate_template(dag, topo, roles, state, order, template, now)
            if placement is not None:
                cache.hits += 1
                return placement
        cache.misses += 1

    assignments: dict[str, str] = {}
    role_loads: list[tuple[str, str, int]] = []
    # Tentative view: queue growth and role loads from this very decision must
    # feed later subtasks' scores.
    extra_wait_us = {nid: 0 for nid in state.nodes}
    tentative_roles: dict[str, set[str]] = {nid: set() for nid in state.nodes}

    for sid in order:
        s = dag.subtask(sid)
        preds = dag.predecessors(sid)
        pred_transfers = {assignments[p]: dag.subtask(p).output_size for p in preds}
        best_nid, best_score = None, 0.0
        for nid in topo.node_ids:
            view = state.nodes[nid]
            base = affinity_score(s, nid, state, topo, roles, weights,
                                  pred_transfers=pred_transfers, source_node=source)
            if base <= 0.0:
                continue
            # Re-derive with tentative adjustments (cheap: adjust denominator).
            if extra_wait_us[nid] or s.role in tentative_roles[nid]:
                t_comp = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
                t_comm = comm_time_ms(topo, nid, s, pred_transfers, source)
                t_queue = (view.expected_wait_us + extra_wait_us[nid]) / 1000.0
                t_load = 0.0 if s.role in tentative_roles[nid] else \
                    role_load_ms(view, roles[s.role], now)
                base = 1.0 / (weights.alpha * t_comp + weights.beta * t_comm
                              + weights.gamma * t_queue + t_load + EPSILON_MS)
            if base > best_score:
                best_score, best_nid = base, nid
        if best_nid is None:
            raise NoFeasibleNode(f"subtask {sid} infeasible on every node")
        assignments[sid] = best_nid
        view = state.nodes[best_nid]
        comp_ms = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
        extra_wait_us[best_nid] += _us(comp_ms + s.tool_calls * tool_mean_ms) \
            // max(view.spec.concurrency_slots, 1)
        if s.role not in view.loaded_roles and s.role not in tentative_roles[best_nid]:
            role_loads.append((best_nid, s.role, now))
        tentative_roles[best_nid].add(s.role)

    placement = Placement(assignments=assignments, role_loads=sorted(role_loads),
                          decision_time_us=now)
    if cache is not None and signature is not None:
        cache.insert(signature, CacheTemplate(
            role_seq=role_seq,
            nodes=tuple(assignments[sid] for sid in order),
        ))
    return placement


def _instantiate_template(dag, topo, roles, state, order, template, now):
    assignments = {}
    role_loads = []
    loaded_marks: dict[str, set[str]] = {}
    for sid, nid in zip(order, template.nodes):
        if nid not in topo.nodes:
            return None
        s = dag.subtask(sid)
        view = state.nodes[nid]
        if estimated_compute_time(s, view.spec, roles, view.energy_remaining) is None:
            return None
        assignments[sid] = nid
        marks = loaded_marks.setdefault(nid, set())
        if s.role not in view.loaded_roles and s.role not in marks:
            role_loads.append((nid, s.role, now))
            marks.add(s.role)
    return Placement(assignments=assignments, role_loads=sorted(role_loads),
                     decision_time_us=now, cache_hit=True)


def detect_overload(view: NodeView, weights: AffinityWeights) -> str | None:
    """Overload cause, or None when the node is healthy."""
    if view.ewma_utilization > weights.overload_util_threshold:
        return "OverloadUtil"
    for observed_us, expected_us in view.queue_waits:
        if observed_us > weights.latency_spike_factor * max(expected_us, 1000):
            return "LatencySpike"
    return None


@dataclass(frozen=True)
class PendingSubtask:
    """A queued, unstarted subtask eligible for reassignment."""
    task_id: str
    subtask: Subtask
    current_node: str
    pred_transfers: dict[str, float]
    source_node: str


def reassign(pending: list[PendingSubtask], topo: Topology, roles: dict[str, RoleSpec],
             state: StateView, weights: AffinityWeights) -> dict[tuple[str, str], str]:
    """Moves for queued subtasks whose best alternative clears the hysteresis bar."""
    delta: dict[tuple[str, str], str] = {}
    extra_wait_us = {nid: 0 for nid in state.nodes}
    for item in sorted(pending, key=lambda p: (p.task_id, p.subtask.subtask_id)):
        s = item.subtask

        def score(nid: str) -> float:
            base = affinity_score(s, nid, state, topo, roles, weights,
                                  pred_transfers=item.pred_transfers,
                                  source_node=item.source_node)
            if base <= 0.0 or not extra_wait_us[nid]:
                return base
            view = state.nodes[nid]
            t_comp = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
            t_comm = comm_time_ms(topo, nid, s, item.pred_transfers, item.source_node)
            t_queue = (view.expected_wait_us + extra_wait_us[nid]) / 1000.0
            t_load = role_load_ms(view, roles[s.role], state.now_us)
            return 1.0 / (weights.alpha * t_comp + weights.beta * t_comm
                          + weights.gamma * t_queue + t_load + EPSILON_MS)

        current = score(item.current_node)
        best_nid, best_score = None, 0.0
        for nid in topo.node_ids:
            if nid == item.current_node:
                continue
            v = score(nid)
            if v > best_score:
                best_score, best_nid = v, nid
        if best_nid is not None and best_score > weights.hysteresis * current:
            delta[(item.task_id, s.subtask_id)] = best_nid
            view = state.nodes[best_nid]
            comp_ms = estimated_compute_time(s, view.spec, roles, view.energy_remaining)
            extra_wait_us[best_nid] += _us(comp_ms) // max(view.spec.concurrency_slots, 1)
    return delta


def baseline_schedule(kind: str, dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec],
                      state: StateView, *, static_map: dict[str, str] | None = None,
                      single_node: str | None = None,
                      tool_mean_ms: float = 0.0,
                      source_node: str | None = None) -> Placement:
    now = state.now_us
    order = topological_order(dag)

    if kind == STATIC_ROLE:
        if static_map is None:
            raise MissingStaticMap("StaticRole needs a role->node map")
        assignments = {}
        substituted = set()
        for sid in order:
            s = dag.subtask(sid)
            if s.role not in static_map:
                raise MissingStaticMap(f"static map missing role {s.role!r}")
            nid = static_map[s.role]
            if nid not in topo.nodes:
                raise MissingStaticMap(f"static map role {s.role!r} -> unknown node {nid!r}")
            view = state.nodes[nid]
            if estimated_compute_time(s, view.spec, roles, view.energy_remaining) is None:
                fallback = feasible_nodes(s, topo, roles, state)
                if not fallback:
                    raise NoFeasibleNode(f"subtask {sid} infeasible on every node")
                nid = fallback[0]
                substituted.add(sid)  # fixed arrangements: the fallback runs a stand-in role
            assignments[sid] = nid
        return Placement(assignments=assignments, role_loads=[], decision_time_us=now,
                         substituted=frozenset(substituted))

    if kind == ROUND_ROBIN:
        assignments = {}
        node_ids = topo.node_ids
        cursor = 0
        for sid in order:
            s = dag.subtask(sid)
            chosen = None
            for probe in range(len(node_ids)):
                nid = node_ids[(cursor + probe) % len(node_ids)]
                view = state.nodes[nid]
                if estimated_compute_time(s, view.spec, roles, view.energy_remaining) is not None:
                    chosen = nid
                    cursor = (cursor + probe + 1) % len(node_ids)
                    break
            if chosen is None:
                raise NoFeasibleNode(f"subtask {sid} infeasible on every node")
            assignments[sid] = chosen
        return Placement(assignments=assignments, role_loads=[], decision_time_us=now)

    if kind in (SINGLE_AGENT_SERIAL, SINGLE_AGENT_PARALLEL):
        candidates = [single_node] if single_node else topo.node_ids
        chosen = None
        for nid in candidates:
            if nid not in topo.nodes:
                continue
            view = state.nodes[nid]
            if all(
                estimated_compute_time(dag.subtask(sid), view.spec, roles,
                                       view.energy_remaining) is not None
                for sid in order
            ):
                chosen = nid
                break
        if chosen is None:
            raise NoFeasibleNode("no single node can host every subtask")
        return Placement(
            assignments={sid: chosen for sid in order},
            role_loads=[], decision_time_us=now,
            serialize=(kind == SINGLE_AGENT_SERIAL),
            pinned_node=chosen,
        )

    raise ValueError(f"unknown baseline policy {kind!r}")
