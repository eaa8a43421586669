import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rolesim.errors import CycleDetected, InvalidSpec
from rolesim.workload import (
    EASY,
    HARD,
    MEDIUM,
    DagShape,
    Subtask,
    TaskDag,
    WorkloadSpec,
    classify_difficulty,
    export_tasks,
    generate_workload,
    topological_order,
    validate_dag,
)


def sub(sid, tools=0, role="planner"):
    return Subtask(subtask_id=sid, role=role, compute_demand=1.0, output_size=0.5,
                   tool_calls=tools)


def dag_of(subtasks, edges, task_id="t0"):
    return TaskDag(task_id=task_id, subtasks=tuple(subtasks), edges=tuple(edges),
                   arrival_time=0.0, deadline=1000.0, source_node="dev0")


def test_difficulty_paper_buckets():
    assert classify_difficulty(dag_of([sub("a", 0)], [])) == EASY
    assert classify_difficulty(dag_of([sub("a", 6)], [])) == MEDIUM
    assert classify_difficulty(dag_of([sub("a", 3), sub("b", 4)], [])) == HARD


def test_difficulty_extension_beyond_nine():
    assert classify_difficulty(dag_of([sub("a", 12)], [])) == HARD


@given(st.integers(min_value=0, max_value=200))
def test_difficulty_partitions_every_total(total):
    d = classify_difficulty(dag_of([sub("a", total)], []))
    if total <= 3:
        assert d == EASY
    elif total <= 6:
        assert d == MEDIUM
    else:
        assert d == HARD


def test_validate_dag_clean_chain():
    assert validate_dag(dag_of([sub("a"), sub("b")], [("a", "b")])) == []


def test_validate_dag_self_edge_is_cycle():
    assert "CycleDetected" in validate_dag(dag_of([sub("a")], [("a", "a")]))


def test_validate_dag_unknown_endpoint():
    out = validate_dag(dag_of([sub("a")], [("a", "ghost")]))
    assert any(v.startswith("UnknownSubtask") for v in out)


def test_topological_order_chain():
    assert topological_order(dag_of([sub("a"), sub("b"), sub("c")],
                                    [("a", "b"), ("b", "c")])) == ["a", "b", "c"]


def test_topological_order_diamond_tie_break():
    d = dag_of([sub("a"), sub("b"), sub("c"), sub("d")],
               [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    assert topological_order(d) == ["a", "b", "c", "d"]


def test_topological_order_isolated_lexicographic():
    assert topological_order(dag_of([sub("z"), sub("a")], [])) == ["a", "z"]


def test_topological_order_cycle_raises():
    with pytest.raises(CycleDetected):
        topological_order(dag_of([sub("a"), sub("b")], [("a", "b"), ("b", "a")]))


def spec(count=1, mix=None, seed=7, **kw):
    return WorkloadSpec(
        count=count,
        seed=seed,
        arrival_rate=kw.pop("arrival_rate", 2.0),
        difficulty_mix=mix or {EASY: 1.0, MEDIUM: 0.0, HARD: 0.0},
        source_nodes=["dev0"],
        roles=["planner", "map", "video", "evaluator"],
        **kw,
    )


def test_generate_single_easy_task_in_bucket():
    tasks = generate_workload(spec())
    assert len(tasks) == 1
    assert 0 <= tasks[0].tool_total <= 3


def test_generate_deterministic_bytes():
    a = export_tasks(generate_workload(spec(count=20, mix={EASY: 0.3, MEDIUM: 0.4, HARD: 0.3})))
    b = export_tasks(generate_workload(spec(count=20, mix={EASY: 0.3, MEDIUM: 0.4, HARD: 0.3})))
    assert a == b


def test_generate_mix_counts_within_tolerance():
    mix = {EASY: 1 / 3, MEDIUM: 1 / 3, HARD: 1 / 3}
    tasks = generate_workload(spec(count=300, mix=mix, seed=42))
    counts = {EASY: 0, MEDIUM: 0, HARD: 0}
    for t in tasks:
        counts[classify_difficulty(t)] += 1
    for bucket in counts:
        assert abs(counts[bucket] - 100) <= 30, counts


def test_generated_arrivals_sorted_and_dags_valid():
    tasks = generate_workload(spec(count=50, mix={EASY: 0.2, MEDIUM: 0.4, HARD: 0.4}))
    arrivals = [t.arrival_time for t in tasks]
    assert arrivals == sorted(arrivals)
    for t in tasks:
        assert validate_dag(t) == []
        assert t.subtasks[0].role == "planner"
        assert t.subtasks[-1].role == "evaluator"


def test_generated_difficulty_matches_drawn_bucket():
    for seed in (1, 2, 3):
        tasks = generate_workload(spec(count=60, seed=seed,
                                       mix={EASY: 0.0, MEDIUM: 1.0, HARD: 0.0}))
        assert all(classify_difficulty(t) == MEDIUM for t in tasks)


@settings(max_examples=25, deadline=None)
@given(
    count=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=2**32),
    min_sub=st.integers(min_value=2, max_value=4),
    extra=st.integers(min_value=0, max_value=3),
    edge_prob=st.floats(min_value=0.0, max_value=1.0),
)
def test_generator_soundness_property(count, seed, min_sub, extra, edge_prob):
    shape = DagShape(min_subtasks=min_sub, max_subtasks=min_sub + extra,
                     edge_prob=edge_prob)
    tasks = generate_workload(spec(count=count, seed=seed, dag_shape=shape,
                                   mix={EASY: 0.5, MEDIUM: 0.3, HARD: 0.2}))
    assert len(tasks) == count
    for t in tasks:
        assert validate_dag(t) == []


def test_explicit_arrivals_and_template_mode():
    template = {
        "subtasks": [
            {"subtask_id": "s0", "role": "planner", "compute_demand": 2.0},
            {"subtask_id": "s1", "role": "evaluator", "compute_demand": 2.0},
        ],
        "edges": [["s0", "s1"]],
        "deadline_ms": 9000.0,
        "source_node": "dev0",
    }
    ws = WorkloadSpec(count=3, seed=0, arrival_times=[0.0, 0.0, 0.0], template=template)
    tasks = generate_workload(ws)
    assert [t.task_id for t in tasks] == ["t0000", "t0001", "t0002"]
    assert all(t.edges == (("s0", "s1"),) for t in tasks)


def test_tool_total_override_for_sweeps():
    tasks = generate_workload(spec(count=10, tool_total_override=8))
    assert all(t.tool_total == 8 for t in tasks)
    assert all(classify_difficulty(t) == HARD for t in tasks)


def test_bad_mix_rejected():
    with pytest.raises(InvalidSpec):
        generate_workload(spec(mix={EASY: 0.5, MEDIUM: 0.1, HARD: 0.1}))
