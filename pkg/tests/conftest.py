"""Shared builders for engine-level tests."""

import pytest

from rolesim.affinity import AffinityWeights
from rolesim.engine import PolicyConfig, SimParams, run_simulation
from rolesim.topology import build_topology
from rolesim.workload import RoleSpec, Subtask, TaskDag


def full_mesh(nodes, bandwidth=100.0, latency=5.0, reliability=1.0):
    links = []
    for a in nodes:
        for b in nodes:
            if a["node_id"] != b["node_id"]:
                links.append({"from": a["node_id"], "to": b["node_id"],
                              "bandwidth": bandwidth, "latency": latency,
                              "reliability": reliability})
    return build_topology({"nodes": nodes, "links": links})


def edge_node(nid, rate=10.0, mem=1000.0, slots=1, **kw):
    spec = {"node_id": nid, "tier": "edge", "compute_rate": rate,
            "memory_capacity": mem, "concurrency_slots": slots}
    spec.update(kw)
    return spec


def simple_roles(load_time=0.0, multiplier=1.0):
    return {
        "planner": RoleSpec("planner", 100.0, multiplier, load_time),
        "worker": RoleSpec("worker", 100.0, multiplier, load_time),
        "evaluator": RoleSpec("evaluator", 100.0, multiplier, load_time),
    }


def task(task_id, subtasks, edges, arrival=0.0, deadline=60000.0, source="n1"):
    return TaskDag(task_id=task_id, subtasks=tuple(subtasks), edges=tuple(edges),
                   arrival_time=arrival, deadline=deadline, source_node=source)


def sub(sid, demand=1.0, out=0.0, tools=0, role="planner", ctx=0.0):
    return Subtask(subtask_id=sid, role=role, compute_demand=demand, output_size=out,
                   tool_calls=tools, base_context_size=ctx)


def quiet_params(**kw):
    defaults = dict(seed=13, decision_cost_ms=(0.0, 0.0), tool_latency_ms=(200.0, 200.0),
                    p_tool=1.0, p_tool_mismatch=1.0)
    defaults.update(kw)
    return SimParams(**defaults)


def run(topo, roles, tasks, policy=None, params=None):
    return run_simulation(topo, roles, tasks,
                          policy or PolicyConfig(), params or quiet_params())


@pytest.fixture
def builders():
    return {
        "full_mesh": full_mesh, "edge_node": edge_node, "simple_roles": simple_roles,
        "task": task, "sub": sub, "quiet_params": quiet_params, "run": run,
        "PolicyConfig": PolicyConfig, "SimParams": SimParams,
        "AffinityWeights": AffinityWeights,
    }
