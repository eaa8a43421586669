"""Roles, subtasks, task DAGs, difficulty buckets and the seeded workload generator."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CycleDetected, InvalidSpec
from .rng import stream

EASY, MEDIUM, HARD = "Easy", "Medium", "Hard"
_BUCKET_RANGES = {EASY: (0, 3), MEDIUM: (4, 6), HARD: (7, 9)}


@dataclass(frozen=True)
class RoleSpec:
    role_id: str
    model_memory: float        # MB needed to host the role
    compute_multiplier: float  # scales subtask compute demand
    load_time: float           # ms to instantiate the role on a cold node

    def __post_init__(self):
        if self.model_memory < 0:
            raise InvalidSpec(f"role {self.role_id}: model_memory must be >= 0")
        if self.compute_multiplier < 0:
            raise InvalidSpec(f"role {self.role_id}: compute_multiplier must be >= 0")
        if self.load_time < 0:
            raise InvalidSpec(f"role {self.role_id}: load_time must be >= 0")


@dataclass(frozen=True)
class Subtask:
    subtask_id: str
    role: str
    compute_demand: float      # work-units
    output_size: float         # MB shipped to each consumer
    tool_calls: int = 0
    base_context_size: float = 0.0  # MB synchronized from the task source

    def __post_init__(self):
        if min(self.compute_demand, self.output_size, self.base_context_size) < 0:
            raise InvalidSpec(f"subtask {self.subtask_id}: numeric fields must be >= 0")
        if self.tool_calls < 0:
            raise InvalidSpec(f"subtask {self.subtask_id}: tool_calls must be >= 0")


@dataclass(frozen=True)
class TaskDag:
    task_id: str
    subtasks: tuple[Subtask, ...]
    edges: tuple[tuple[str, str], ...]
    arrival_time: float  # ms
    deadline: float      # ms after arrival
    source_node: str

    def __post_init__(self):
        if self.deadline <= 0:
            raise InvalidSpec(f"task {self.task_id}: deadline must be > 0")
        object.__setattr__(self, "_by_id", {s.subtask_id: s for s in self.subtasks})
        preds: dict[str, list[str]] = {s.subtask_id: [] for s in self.subtasks}
        succs: dict[str, list[str]] = {s.subtask_id: [] for s in self.subtasks}
        for p, c in self.edges:
            if c in preds:
                preds[c].append(p)
            if p in succs:
                succs[p].append(c)
        object.__setattr__(self, "_preds", {k: sorted(v) for k, v in preds.items()})
        object.__setattr__(self, "_succs", {k: sorted(v) for k, v in succs.items()})

    def subtask(self, subtask_id: str) -> Subtask:
        return self._by_id[subtask_id]

    def predecessors(self, subtask_id: str) -> list[str]:
        return self._preds[subtask_id]

    def successors(self, subtask_id: str) -> list[str]:
        return self._succs[subtask_id]

    @property
    def tool_total(self) -> int:
        return sum(s.tool_calls for s in self.subtasks)


def classify_difficulty(dag: TaskDag) -> str:
    """Bucket by total tool calls: 0-3 easy, 4-6 medium, 7+ hard."""
    total = dag.tool_total
    if total <= 3:
        return EASY
    if total <= 6:
        return MEDIUM
    return HARD


def validate_dag(dag: TaskDag) -> list[str]:
    """All structural violations as data; empty list means valid."""
    violations: list[str] = []
    ids = [s.subtask_id for s in dag.subtasks]
    seen = set()
    for sid in ids:
        if sid in seen:
            violations.append(f"DuplicateSubtask:{sid}")
        seen.add(sid)
    for producer, consumer in dag.edges:
        for endpoint in (producer, consumer):
            if endpoint not in seen:
                violations.append(f"UnknownSubtask:{endpoint}")
    for s in dag.subtasks:
        if s.compute_demand < 0 or s.output_size < 0 or s.base_context_size < 0 or s.tool_calls < 0:
            violations.append(f"NegativeField:{s.subtask_id}")
    if dag.deadline <= 0:
        violations.append("NonPositiveDeadline")
    if not _is_acyclic(seen, dag.edges):
        violations.append("CycleDetected")
    return violations


def _is_acyclic(ids, edges) -> bool:
    indegree = {sid: 0 for sid in ids}
    out = {sid: [] for sid in ids}
    for p, c in edges:
        if p in indegree and c in indegree:
            indegree[c] += 1
            out[p].append(c)
    ready = [sid for sid, d in sorted(indegree.items()) if d == 0]
    done = 0
    while ready:
        sid = ready.pop()
        done += 1
        for succ in out[sid]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                ready.append(succ)
    return done == len(indegree)


def topological_order(dag: TaskDag) -> list[str]:
    """Kahn's algorithm; among ready subtasks the lowest subtask_id goes first."""
    import heapq

    indegree = {s.subtask_id: 0 for s in dag.subtasks}
    out = {s.subtask_id: [] for s in dag.subtasks}
    for p, c in dag.edges:
        indegree[c] += 1
        out[p].append(c)
    heap = [sid for sid, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        sid = heapq.heappop(heap)
        order.append(sid)
        for succ in sorted(out[sid]):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(heap, succ)
    if len(order) != len(indegree):
        raise CycleDetected(f"task {dag.task_id} has a cycle")
    return order


@dataclass
class DagShape:
    """Knobs for the layered random DAG generator."""
    min_subtasks: int = 4
    max_subtasks: int = 6
    edge_prob: float = 0.35
    min_layers: int = 2
    max_layers: int = 4
    compute_demand: tuple[float, float] = (1.0, 4.0)
    output_size: tuple[float, float] = (0.5, 2.0)
    base_context_size: tuple[float, float] = (0.1, 0.5)


@dataclass
class WorkloadSpec:
    count: int
    seed: int
    arrival_rate: float | None = None          # tasks per second (Poisson)
    arrival_times: list[float] | None = None   # explicit ms timestamps
    dag_shape: DagShape = field(default_factory=DagShape)
    difficulty_mix: dict[str, float] = field(
        default_factory=lambda: {EASY: 1 / 3, MEDIUM: 1 / 3, HARD: 1 / 3}
    )
    deadline_base_ms: float = 5000.0
    deadline_per_tool_ms: float = 500.0
    deadline_per_subtask_ms: float = 0.0
    source_nodes: list[str] = field(default_factory=lambda: ["dev0"])
    roles: list[str] = field(default_factory=lambda: ["planner", "evaluator"])
    tool_total_override: int | None = None     # sweep axis: force every task's total
    template: dict | None = None               # fixed-DAG mode; stamped `count` times

    def validate(self):
        if self.count < 1:
            raise InvalidSpec("workload count must be >= 1")
        if self.arrival_rate is None and self.arrival_times is None:
            raise InvalidSpec("workload needs arrival_rate or arrival_times")
        if self.arrival_rate is not None and self.arrival_rate <= 0:
            raise InvalidSpec("arrival_rate must be > 0")
        if self.arrival_times is not None and len(self.arrival_times) < self.count:
            raise InvalidSpec("arrival_times shorter than count")
        if self.template is None:
            total = sum(self.difficulty_mix.get(b, 0.0) for b in (EASY, MEDIUM, HARD))
            if abs(total - 1.0) > 1e-9:
                raise InvalidSpec(f"difficulty_mix must sum to 1, got {total}")
            if not self.source_nodes:
                raise InvalidSpec("workload needs at least one source node")
            if "planner" not in self.roles or "evaluator" not in self.roles:
                raise InvalidSpec("role registry must include planner and evaluator")
            if self.dag_shape.min_subtasks < 2:
                raise InvalidSpec("dag_shape.min_subtasks must be >= 2 (root + sink)")
            if self.dag_shape.max_subtasks < self.dag_shape.min_subtasks:
                raise InvalidSpec("dag_shape.max_subtasks < min_subtasks")


def _draw_arrivals(spec: WorkloadSpec) -> list[float]:
    if spec.arrival_times is not None:
        times = [float(t) for t in spec.arrival_times[: spec.count]]
        if any(t < 0 for t in times):
            raise InvalidSpec("arrival times must be >= 0")
        return sorted(times)
    rng = stream(spec.seed, "workload:arrivals")
    mean_gap_ms = 1000.0 / spec.arrival_rate
    t = 0.0
    times = []
    for _ in range(spec.count):
        t += float(rng.exponential(mean_gap_ms))
        times.append(t)
    return times


def _draw_difficulty(spec: WorkloadSpec, rng) -> str:
    u = float(rng.random())
    acc = 0.0
    for bucket in (EASY, MEDIUM, HARD):
        acc += spec.difficulty_mix.get(bucket, 0.0)
        if u < acc:
            return bucket
    return HARD


def _generate_random_dag(spec: WorkloadSpec, index: int, arrival: float,
                         shapes, tools, difficulty_rng) -> TaskDag:
    shape = spec.dag_shape
    task_id = f"t{index:04d}"
    if spec.tool_total_override is not None:
        tool_total = spec.tool_total_override
        bucket = EASY if tool_total <= 3 else MEDIUM if tool_total <= 6 else HARD
    else:
        bucket = _draw_difficulty(spec, difficulty_rng)
        lo, hi = _BUCKET_RANGES[bucket]
        tool_total = int(tools.integers(lo, hi + 1))

    n_sub = int(shapes.integers(shape.min_subtasks, shape.max_subtasks + 1))
    n_layers = int(shapes.integers(shape.min_layers, shape.max_layers + 1))
    n_middle = n_sub - 2
    middle_layers = max(1, n_layers - 2) if n_middle > 0 else 0

    middle_roles = [r for r in spec.roles if r not in ("planner", "evaluator")] or ["planner"]
    offset = int(shapes.integers(0, len(middle_roles))) if middle_roles else 0

    subtask_ids = [f"s{i:02d}" for i in range(n_sub)]
    roles = ["planner"] + [
        middle_roles[(offset + i) % len(middle_roles)] for i in range(n_middle)
    ] + ["evaluator"]

    # Layer assignment: s00 root alone, last id the sink, middles spread in order.
    layer_of = {subtask_ids[0]: 0}
    for i in range(n_middle):
        layer_of[subtask_ids[1 + i]] = 1 + (i * middle_layers) // max(n_middle, 1)
    layer_of[subtask_ids[-1]] = middle_layers + 1

    edges: set[tuple[str, str]] = set()
    for sid in subtask_ids[1:]:
        earlier = [o for o in subtask_ids if layer_of[o] < layer_of[sid]]
        parent = earlier[int(shapes.integers(0, len(earlier)))]
        edges.add((parent, sid))
        for other in earlier:
            if other != parent and float(shapes.random()) < shape.edge_prob:
                edges.add((other, sid))
    sink = subtask_ids[-1]
    for sid in subtask_ids[1:-1]:
        if not any(p == sid for p, _ in edges):
            edges.add((sid, sink))

    counts = [0] * n_sub
    for _ in range(tool_total):
        counts[int(tools.integers(0, n_sub))] += 1

    subtasks = []
    for i, sid in enumerate(subtask_ids):
        subtasks.append(Subtask(
            subtask_id=sid,
            role=roles[i],
            compute_demand=float(shapes.uniform(*shape.compute_demand)),
            output_size=float(shapes.uniform(*shape.output_size)),
            tool_calls=counts[i],
            base_context_size=float(shapes.uniform(*shape.base_context_size)),
        ))

    deadline = (spec.deadline_base_ms
                + spec.deadline_per_tool_ms * tool_total
                + spec.deadline_per_subtask_ms * n_sub)
    return TaskDag(
        task_id=task_id,
        subtasks=tuple(subtasks),
        edges=tuple(sorted(edges)),
        arrival_time=arrival,
        deadline=deadline,
        source_node=spec.source_nodes[index % len(spec.source_nodes)],
    )


def _instantiate_template(spec: WorkloadSpec, index: int, arrival: float) -> TaskDag:
    tpl = spec.template
    subtasks = tuple(
        Subtask(
            subtask_id=str(s["subtask_id"]),
            role=str(s["role"]),
            compute_demand=float(s["compute_demand"]),
            output_size=float(s.get("output_size", 0.0)),
            tool_calls=int(s.get("tool_calls", 0)),
            base_context_size=float(s.get("base_context_size", 0.0)),
        )
        for s in tpl["subtasks"]
    )
    edges = tuple(sorted((str(p), str(c)) for p, c in tpl.get("edges", [])))
    return TaskDag(
        task_id=f"t{index:04d}",
        subtasks=subtasks,
        edges=edges,
        arrival_time=arrival,
        deadline=float(tpl["deadline_ms"]),
        source_node=str(tpl.get("source_node", spec.source_nodes[0])),
    )


def generate_workload(spec: WorkloadSpec) -> list[TaskDag]:
    """Deterministic task list: same spec, same bytes, arrivals non-decreasing."""
    spec.validate()
    arrivals = _draw_arrivals(spec)
    if spec.template is not None:
        tasks = [_instantiate_template(spec, i, arrivals[i]) for i in range(spec.count)]
    else:
        shapes = stream(spec.seed, "workload:shapes")
        tools = stream(spec.seed, "workload:tools")
        difficulty_rng = stream(spec.seed, "workload:difficulty")
        tasks = [
            _generate_random_dag(spec, i, arrivals[i], shapes, tools, difficulty_rng)
            for i in range(spec.count)
        ]
    for dag in tasks:
        problems = validate_dag(dag)
        if problems:
            raise InvalidSpec(f"generated task {dag.task_id} invalid: {problems}")
    return tasks


def export_tasks(tasks: list[TaskDag]) -> str:
    """Line-oriented text form: task header, then one line per subtask and edge."""
    lines = []
    for dag in tasks:
        lines.append(
            f"task {dag.task_id} arrival={dag.arrival_time!r} deadline={dag.deadline!r} "
            f"source={dag.source_node}"
        )
        for s in dag.subtasks:
            lines.append(
                f"subtask {s.subtask_id} role={s.role} demand={s.compute_demand!r} "
                f"out={s.output_size!r} tools={s.tool_calls} ctx={s.base_context_size!r}"
            )
        for p, c in dag.edges:
            lines.append(f"edge {p} {c}")
    return "\n".join(lines) + "\n"
