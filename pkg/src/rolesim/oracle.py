"""Exhaustive brute-force scheduler for tiny instances.

Ground truth for the list-scheduling policies: enumerates every feasible
assignment map crossed with every topological order and simulates each with
the engine's own cost rules (tool phase at fixed mean latency, failures
disabled). Never used inside simulation runs.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels
from .affinity import Placement, estimated_compute_time
from .errors import InvalidSpec, LimitExceeded, NoFeasibleNode
from .topology import Topology, transfer_time
from .workload import RoleSpec, TaskDag, validate_dag


@dataclass(frozen=True)
class OracleLimit:
    max_subtasks: int = 6
    max_nodes: int = 3


def _us(ms: float) -> int:
    return int(round(ms * 1000.0))


def all_topological_orders(n_sub: int, in_edges: list[list[int]],
                           edge_src: list[int]) -> list[int]:
    """Flat lexicographic enumeration of every topological order (indices)."""
    preds_left = [len(in_edges[s]) for s in range(n_sub)]
    succ = [[] for _ in range(n_sub)]
    for s in range(n_sub):
        for e in in_edges[s]:
            succ[edge_src[e]].append(s)
    used = [False] * n_sub
    path: list[int] = []
    flat: list[int] = []

    def rec():
        if len(path) == n_sub:
            flat.extend(path)
            return
        for s in range(n_sub):
            if not used[s] and preds_left[s] == 0:
                used[s] = True
                path.append(s)
                for t in succ[s]:
                    preds_left[t] -= 1
                rec()
                for t in succ[s]:
                    preds_left[t] += 1
                path.pop()
                used[s] = False

    rec()
    return flat


def prepare_instance(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec], *,
                     tool_mean_ms: float, limit: OracleLimit = OracleLimit()):
    """Flatten one task into the kernel's integer-matrix form."""
    problems = validate_dag(dag)
    if problems:
        raise InvalidSpec(f"oracle input invalid: {problems}")
    sub_ids = sorted(s.subtask_id for s in dag.subtasks)
    node_ids = topo.node_ids
    n_sub, n_node = len(sub_ids), len(node_ids)
    if n_sub > limit.max_subtasks:
        raise LimitExceeded(f"{n_sub} subtasks exceeds oracle limit {limit.max_subtasks}")
    if n_node > limit.max_nodes:
        raise LimitExceeded(f"{n_node} nodes exceeds oracle limit {limit.max_nodes}")

    dur = []
    ctx = []
    for sid in sub_ids:
        s = dag.subtask(sid)
        feasible_any = False
        for nid in node_ids:
            comp = estimated_compute_time(s, topo.nodes[nid], roles)
            if comp is None:
                dur.append(-1)
            else:
                # round compute and per-call latency separately, as the engine does
                dur.append(_us(comp) + s.tool_calls * _us(tool_mean_ms))
                feasible_any = True
            if s.base_context_size > 0 and dag.source_node != nid:
                ctx.append(_us(transfer_time(topo, dag.source_node, nid,
                                             s.base_context_size)))
            else:
                ctx.append(0)
        if not feasible_any:
            raise NoFeasibleNode(f"subtask {sid} infeasible on every node")

    index = {sid: i for i, sid in enumerate(sub_ids)}
    edges = sorted(dag.edges)
    edge_src = [index[p] for p, _ in edges]
    edge_dst = [index[c] for _, c in edges]
    xfer = []
    for p, _c in edges:
        size = dag.subtask(p).output_size
        for a in node_ids:
            for b in node_ids:
                if size > 0 and a != b:
                    xfer.append(_us(transfer_time(topo, a, b, size)))
                else:
                    xfer.append(0)
    slots = [topo.nodes[nid].concurrency_slots for nid in node_ids]

    in_edges = [[] for _ in range(n_sub)]
    for e, dsti in enumerate(edge_dst):
        in_edges[dsti].append(e)
    orders = all_topological_orders(n_sub, in_edges, edge_src)
    return sub_ids, node_ids, dur, ctx, edge_src, edge_dst, xfer, slots, orders


def brute_force_makespan(dag: TaskDag, topo: Topology, roles: dict[str, RoleSpec], *,
                         tool_mean_ms: float, limit: OracleLimit = OracleLimit(),
                         backend=None):
    """(makespan_ms, witness assignment map, witness order).

    Deterministic: the witness is the first minimum in enumeration order
    (assignments outer, orders inner).
    """
    sub_ids, node_ids, dur, ctx, edge_src, edge_dst, xfer, slots, orders = \
        prepare_instance(dag, topo, roles, tool_mean_ms=tool_mean_ms, limit=limit)
    searcher = backend.search if backend is not None else _kernels.search
    best_us, assign, order_idx = searcher(
        len(sub_ids), len(node_ids), dur, ctx, edge_src, edge_dst, xfer, slots, orders)
    if best_us < 0:
        raise NoFeasibleNode("some subtask infeasible on every node")
    n_sub = len(sub_ids)
    witness_assign = {sub_ids[i]: node_ids[assign[i]] for i in range(n_sub)}
    witness_order = [sub_ids[orders[order_idx * n_sub + i]] for i in range(n_sub)]
    return best_us / 1000.0, witness_assign, witness_order


def witness_placement(witness_assign: dict[str, str], witness_order: list[str]) -> Placement:
    """Engine-replayable placement pinning both assignment and queue priority."""
    return Placement(
        assignments=dict(witness_assign),
        role_loads=[],
        decision_time_us=0,
        priorities={sid: i for i, sid in enumerate(witness_order)},
    )


def random_instance(seed: int, limit: OracleLimit = OracleLimit()):
    """Seeded in-limit (dag, topo, roles) triple for dominance testing.

    Every role fits every node so all six policies are applicable; role load
    times are zero and budgets unbounded to match the oracle's cost model.
    """
    from .rng import stream
    from .topology import build_topology
    from .workload import Subtask

    rng = stream(seed, "oracle:instance")
    n_node = int(rng.integers(2, limit.max_nodes + 1))
    names = [f"n{i}" for i in range(n_node)]
    nodes = [{
        "node_id": nid,
        "tier": "edge",
        "compute_rate": float(rng.uniform(2.0, 20.0)),
        "memory_capacity": 1000.0,
        "concurrency_slots": int(rng.integers(1, 3)),
    } for nid in names]
    links = []
    for a in names:
        for b in names:
            if a != b:
                links.append({"from": a, "to": b,
                              "bandwidth": float(rng.uniform(20.0, 200.0)),
                              "latency": float(rng.uniform(1.0, 20.0)),
                              "reliability": 1.0})
    topo = build_topology({"nodes": nodes, "links": links})

    roles = {
        "r0": RoleSpec("r0", 10.0, 1.0, 0.0),
        "r1": RoleSpec("r1", 10.0, float(rng.uniform(0.5, 2.0)), 0.0),
    }
    n_sub = int(rng.integers(3, limit.max_subtasks + 1))
    subtasks = []
    for i in range(n_sub):
        subtasks.append(Subtask(
            subtask_id=f"s{i}",
            role="r0" if rng.random() < 0.5 else "r1",
            compute_demand=float(rng.uniform(0.5, 8.0)),
            output_size=0.0 if rng.random() < 0.3 else float(rng.uniform(0.2, 4.0)),
            tool_calls=int(rng.integers(0, 4)),
            base_context_size=0.0 if rng.random() < 0.5 else float(rng.uniform(0.1, 2.0)),
        ))
    edges = set()
    for i in range(1, n_sub):
        edges.add((f"s{int(rng.integers(0, i))}", f"s{i}"))
        if rng.random() < 0.3 and i >= 2:
            edges.add((f"s{int(rng.integers(0, i - 1))}", f"s{i}"))
    dag = TaskDag(
        task_id=f"oracle{seed}",
        subtasks=tuple(subtasks),
        edges=tuple(sorted(edges)),
        arrival_time=0.0,
        deadline=10_000_000.0,
        source_node=names[int(rng.integers(0, n_node))],
    )
    return dag, topo, roles
