"""Deterministic discrete-event simulation of one scenario run.

Single-threaded over a priority event queue; all stochastic draws come from
named streams, so a (scenario, seed) pair replays to byte-identical traces.
Internal clock is integer microseconds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from . import affinity, trace
from .affinity import (
    AffinityWeights,
    NodeView,
    PendingSubtask,
    Placement,
    PolicyCache,
    StateView,
)
from .errors import InvalidSpec, NoFeasibleNode
from .metrics import TaskRecord
from .rng import stream
from .topology import Topology, transfer_time
from .trace import (
    DEADLINE_EXPIRED,
    REASSESS_TICK,
    SCHEDULING_DONE,
    SUBTASK_COMPLETE,
    SUBTASK_START,
    TASK_ARRIVAL,
    TOOL_CALL_COMPLETE,
    TRANSFER_COMPLETE,
    TraceRow,
)
from .workload import RoleSpec, TaskDag, classify_difficulty

# Internal scheduler wake-ups sort after every committed event at the same
# timestamp: starts are decided only once all same-instant reveals (transfers,
# completions, reassignments) have landed, so queue priority is honored even
# among subtasks that become ready simultaneously. Wakes emit no trace rows.
_WAKE_PRIORITY = max(trace.KIND_PRIORITY.values()) + 1


def _us(ms: float) -> int:
    return int(round(ms * 1000.0))


@dataclass
class PolicyConfig:
    kind: str = affinity.DYNAROLE_HEFT
    weights: AffinityWeights = field(default_factory=AffinityWeights)
    static_map: dict[str, str] | None = None
    single_node: str | None = None
    cache_enabled: bool = True
    fixed_placement: Placement | None = None  # internal: oracle witness replay


@dataclass
class SimParams:
    seed: int = 0
    horizon_ms: float | None = None          # default: 10x the last deadline
    tool_latency_ms: tuple[float, float] = (100.0, 300.0)
    p_tool: float = 0.98
    p_tool_mismatch: float = 0.90
    decision_cost_ms: tuple[float, float] = (180.0, 320.0)
    orchestrator_host: str | None = None

    def __post_init__(self):
        lo, hi = self.tool_latency_ms
        if not (0 <= lo <= hi):
            raise InvalidSpec("tool_latency_ms must satisfy 0 <= min <= max")
        lo, hi = self.decision_cost_ms
        if not (0 <= lo <= hi):
            raise InvalidSpec("decision_cost_ms must satisfy 0 <= min <= max")
        for p in (self.p_tool, self.p_tool_mismatch):
            if not (0 <= p <= 1):
                raise InvalidSpec("tool success probabilities must be in [0, 1]")

    @property
    def tool_mean_ms(self) -> float:
        return (self.tool_latency_ms[0] + self.tool_latency_ms[1]) / 2.0


@dataclass
class SimResult:
    rows: list[TraceRow]
    records: list[TaskRecord]
    cache_hits: int = 0
    cache_misses: int = 0
    reassignments: int = 0


class _TaskRun:
    __slots__ = (
        "dag", "arrival_us", "deadline_us", "difficulty", "status", "failure_cause",
        "assignment_us", "completion_us", "placement", "completed", "started",
        "pred_node", "pending_transfers",
    )

    def __init__(self, dag: TaskDag):
        self.dag = dag
        self.arrival_us = _us(dag.arrival_time)
        self.deadline_us = self.arrival_us + _us(dag.deadline)
        self.difficulty = classify_difficulty(dag)
        self.status = "pending"
        self.failure_cause = None
        self.assignment_us = None
        self.completion_us = None
        self.placement: Placement | None = None
        self.completed: set[str] = set()
        self.started: set[str] = set()
        self.pred_node: dict[str, str] = {}
        self.pending_transfers: dict[str, int] = {}

    @property
    def terminal(self) -> bool:
        return self.status != "pending"


@dataclass
class _QueueEntry:
    key: tuple
    task_id: str
    subtask_id: str
    ready_us: int
    est_dur_us: int
    expected_wait_us: int


class _NodeRuntime:
    def __init__(self, spec):
        self.spec = spec
        self.energy_remaining = spec.energy_budget
        self.loaded_roles: dict[str, int] = {}   # role -> load-complete us
        self.running: dict[tuple[str, str], tuple[int, int]] = {}  # key -> (start, end)
        self.queue: list[_QueueEntry] = []
        self.bookings: list[list[tuple[int, int]]] = [
            [] for _ in range(spec.concurrency_slots)
        ]
        self.ewma = 0.0
        self._last_accrue_us = 0
        self._last_sample_us = 0
        self._busy_accum_us = 0

    def accrue(self, now_us: int):
        if now_us > self._last_accrue_us:
            self._busy_accum_us += len(self.running) * (now_us - self._last_accrue_us)
            self._last_accrue_us = now_us

    def sample_ewma(self, now_us: int, factor: float):
        self.accrue(now_us)
        delta = now_us - self._last_sample_us
        if delta <= 0:
            return
        busy_fraction = self._busy_accum_us / (self.spec.concurrency_slots * delta)
        self.ewma = (1.0 - factor) * self.ewma + factor * busy_fraction
        self._busy_accum_us = 0
        self._last_sample_us = now_us

    def expected_wait_us(self, now_us: int) -> int:
        slots = self.spec.concurrency_slots
        free = [max(end, now_us) for _, end in self.running.values()]
        free += [now_us] * (slots - len(free))
        heapq.heapify(free)
        for entry in self.queue:
            t = heapq.heappop(free)
            heapq.heappush(free, max(t, now_us) + entry.est_dur_us)
        return max(0, free[0] - now_us)

    def prune_bookings(self, now_us: int):
        for idx, intervals in enumerate(self.bookings):
            if intervals and intervals[0][1] <= now_us:
                self.bookings[idx] = [iv for iv in intervals if iv[1] > now_us]


class Engine:
    def __init__(self, topo: Topology, roles: dict[str, RoleSpec], tasks: list[TaskDag],
                 policy: PolicyConfig, params: SimParams):
        self.topo = topo
        self.roles = roles
        self.policy = policy
        self.params = params
        self.tasks: dict[str, _TaskRun] = {t.task_id: _TaskRun(t) for t in tasks}
        self.nodes = {nid: _NodeRuntime(spec) for nid, spec in topo.nodes.items()}
        self.node_ids = topo.node_ids

        self._heap: list[tuple[int, int, int, tuple]] = []
        self._seq = 0
        self._rows: list[tuple[int, int, int, TraceRow]] = []
        self._emit_seq = 0
        self._wakes: set[tuple[str, int]] = set()
        self._arrivals_left = 0
        self._active = 0
        self._global_running = 0
        self._serialize_cap = policy.kind == affinity.SINGLE_AGENT_SERIAL
        self._cache = PolicyCache() if (
            policy.kind == affinity.DYNAROLE_HEFT and policy.cache_enabled
        ) else None
        self._reassignments = 0

        self._rng_decision = stream(params.seed, "sim:decision")
        self._rng_tool_latency = stream(params.seed, "sim:tools.latency")
        self._rng_tool_success = stream(params.seed, "sim:tools.success")
        self._rng_transfer = stream(params.seed, "sim:transfer.success")

        if params.horizon_ms is not None:
            self.horizon_us = _us(params.horizon_ms)
        elif tasks:
            self.horizon_us = 10 * max(r.deadline_us for r in self.tasks.values())
        else:
            self.horizon_us = 0

        self.orchestrator_host = params.orchestrator_host or self._default_host()

        if policy.kind == affinity.STATIC_ROLE and policy.static_map:
            # Fixed role arrangements: mapped roles are resident from the start.
            for role_id, nid in policy.static_map.items():
                if nid in self.nodes and role_id in roles:
                    self.nodes[nid].loaded_roles[role_id] = 0

    def _default_host(self) -> str:
        ranked = sorted(self.topo.nodes.values(), key=lambda n: (-int(n.tier), n.node_id))
        return ranked[0].node_id if ranked else "-"

    # -- event plumbing -----------------------------------------------------

    def _push(self, time_us: int, kind: str, payload: tuple):
        self._seq += 1
        heapq.heappush(self._heap, (time_us, trace.KIND_PRIORITY[kind], self._seq,
                                    (kind,) + payload))

    def _push_wake(self, time_us: int, node_id: str):
        if (node_id, time_us) in self._wakes:
            return
        self._wakes.add((node_id, time_us))
        self._seq += 1
        heapq.heappush(self._heap, (time_us, _WAKE_PRIORITY, self._seq, ("_wake", node_id)))

    def _emit(self, time_us: int, kind: str, task="-", subtask="-", node="-", outcome="-"):
        self._emit_seq += 1
        row = TraceRow(time_us, kind, task, subtask, node, outcome)
        self._rows.append((time_us, trace.KIND_PRIORITY[kind], self._emit_seq, row))

    # -- run loop -----------------------------------------------------------

    def run(self) -> SimResult:
        for task_id in sorted(self.tasks):
            run = self.tasks[task_id]
            if run.arrival_us <= self.horizon_us:
                self._push(run.arrival_us, TASK_ARRIVAL, (task_id,))
                self._arrivals_left += 1
                self._active += 1

        period_us = _us(self.policy.weights.reassess_period_ms)
        if (self.policy.kind == affinity.DYNAROLE_HEFT and period_us > 0
                and self._active and self.policy.fixed_placement is None):
            self._push(period_us, REASSESS_TICK, ())

        while self._heap:
            time_us, _prio, _seq, payload = heapq.heappop(self._heap)
            if time_us > self.horizon_us:
                break
            kind = payload[0]
            if kind == TASK_ARRIVAL:
                self._on_arrival(time_us, *payload[1:])
            elif kind == SCHEDULING_DONE:
                self._on_scheduling_done(time_us, *payload[1:])
            elif kind == TRANSFER_COMPLETE:
                self._on_transfer(time_us, *payload[1:])
            elif kind == TOOL_CALL_COMPLETE:
                task_id, sid, node_id = payload[1:]
                self._emit(time_us, TOOL_CALL_COMPLETE, task=task_id, subtask=sid,
                           node=node_id, outcome="ok")
            elif kind == SUBTASK_COMPLETE:
                self._on_complete(time_us, *payload[1:])
            elif kind == DEADLINE_EXPIRED:
                self._on_deadline(time_us, *payload[1:])
            elif kind == REASSESS_TICK:
                self._on_tick(time_us)
            elif kind == "_wake":
                self._wakes.discard((payload[1], time_us))
                self._try_start(payload[1], time_us)

        for task_id in sorted(self.tasks):
            run = self.tasks[task_id]
            if run.arrival_us <= self.horizon_us and not run.terminal:
                run.status = "failed"
                run.failure_cause = "Horizon"

        self._rows.sort(key=lambda item: item[:3])
        rows = [item[3] for item in self._rows]
        records = [
            self._record(self.tasks[task_id])
            for task_id in sorted(self.tasks)
            if self.tasks[task_id].arrival_us <= self.horizon_us
        ]
        hits = self._cache.hits if self._cache else 0
        misses = self._cache.misses if self._cache else 0
        return SimResult(rows=rows, records=records, cache_hits=hits,
                         cache_misses=misses, reassignments=self._reassignments)

    def _record(self, run: _TaskRun) -> TaskRecord:
        sched = exec_lat = e2e = None
        if run.assignment_us is not None:
            sched = run.assignment_us - run.arrival_us
        if run.status == "completed":
            exec_lat = run.completion_us - run.assignment_us
            e2e = sched + exec_lat
        return TaskRecord(
            task_id=run.dag.task_id,
            difficulty=run.difficulty,
            tool_count=run.dag.tool_total,
            arrival_us=run.arrival_us,
            assignment_us=run.assignment_us,
            completion_us=run.completion_us,
            scheduling_latency_us=sched,
            execution_latency_us=exec_lat,
            end_to_end_us=e2e,
            outcome="Completed" if run.status == "completed" else "Failed",
            failure_cause=run.failure_cause or "-",
        )

    # -- handlers -----------------------------------------------------------

    def _on_arrival(self, now: int, task_id: str):
        run = self.tasks[task_id]
        self._arrivals_left -= 1
        self._emit(now, TASK_ARRIVAL, task=task_id, node=run.dag.source_node)
        lo, hi = self.params.decision_cost_ms
        cost_ms = lo if lo == hi else float(self._rng_decision.uniform(lo, hi))
        self._push(now + _us(cost_ms), SCHEDULING_DONE, (task_id,))
        self._push(run.deadline_us, DEADLINE_EXPIRED, (task_id,))

    def _snapshot(self, now: int, with_bookings: bool) -> StateView:
        views = {}
        for nid in self.node_ids:
            rt = self.nodes[nid]
            bookings = None
            if with_bookings:
                rt.prune_bookings(now)
                bookings = [list(slot) for slot in rt.bookings]
            views[nid] = NodeView(
                spec=rt.spec,
                energy_remaining=rt.energy_remaining,
                loaded_roles=dict(rt.loaded_roles),
                expected_wait_us=rt.expected_wait_us(now),
                ewma_utilization=rt.ewma,
                bookings=bookings,
                queue_waits=[(now - e.ready_us, e.expected_wait_us) for e in rt.queue],
            )
        return StateView(now_us=now, nodes=views)

    def _plan(self, run: _TaskRun, now: int) -> Placement:
        kind = self.policy.kind
        if self.policy.fixed_placement is not None:
            p = self.policy.fixed_placement
            return Placement(assignments=dict(p.assignments), role_loads=list(p.role_loads),
                             decision_time_us=now, priorities=p.priorities,
                             substituted=p.substituted, serialize=p.serialize)
        if kind == affinity.CLASSIC_HEFT:
            state = self._snapshot(now, with_bookings=True)
            return affinity.heft_schedule(run.dag, self.topo, self.roles, state,
                                          tool_mean_ms=self.params.tool_mean_ms)
        if kind == affinity.DYNAROLE_HEFT:
            state = self._snapshot(now, with_bookings=False)
            return affinity.dynarole_schedule(run.dag, self.topo, self.roles, state,
                                              self.policy.weights, self._cache,
                                              tool_mean_ms=self.params.tool_mean_ms)
        state = self._snapshot(now, with_bookings=False)
        return affinity.baseline_schedule(kind, run.dag, self.topo, self.roles, state,
                                          static_map=self.policy.static_map,
                                          single_node=self.policy.single_node,
                                          tool_mean_ms=self.params.tool_mean_ms)

    def _on_scheduling_done(self, now: int, task_id: str):
        run = self.tasks[task_id]
        if run.terminal:
            return
        try:
            placement = self._plan(run, now)
        except NoFeasibleNode:
            self._emit(now, SCHEDULING_DONE, task=task_id, node=self.orchestrator_host,
                       outcome="Unschedulable")
            run.assignment_us = now
            self._fail(run, "Unschedulable")
            return
        run.placement = placement
        run.assignment_us = now
        self._emit(now, SCHEDULING_DONE, task=task_id, node=self.orchestrator_host,
                   outcome="cache-hit" if placement.cache_hit else "ok")
        if placement.planned:
            for sid, (nid, start, end) in placement.planned.items():
                slot_lists = self.nodes[nid].bookings
                best = min(range(len(slot_lists)),
                           key=lambda i: self._booking_conflict(slot_lists[i], start, end))
                slot_lists[best].append((start, end))
                slot_lists[best].sort()
        for nid, role_id, at_us in placement.role_loads:
            self._start_role_load(nid, role_id, max(at_us, now))
        for s in run.dag.subtasks:
            if not run.dag.predecessors(s.subtask_id):
                self._dispatch(run, s.subtask_id, now)

    @staticmethod
    def _booking_conflict(intervals, start, end):
        overlap = 0
        for b_start, b_end in intervals:
            overlap += max(0, min(end, b_end) - max(start, b_start))
        return overlap

    def _start_role_load(self, node_id: str, role_id: str, now: int):
        rt = self.nodes[node_id]
        if role_id in rt.loaded_roles:
            return
        rt.loaded_roles[role_id] = now + _us(self.roles[role_id].load_time)

    def _dispatch(self, run: _TaskRun, sid: str, now: int):
        """All predecessors done: ship context payloads, then enqueue at the node."""
        node_id = run.placement.assignments[sid]
        s = run.dag.subtask(sid)
        transfers = []
        if s.base_context_size > 0 and run.dag.source_node != node_id:
            transfers.append((run.dag.source_node, s.base_context_size))
        for pred in run.dag.predecessors(sid):
            src = run.pred_node[pred]
            size = run.dag.subtask(pred).output_size
            if size > 0 and src != node_id:
                transfers.append((src, size))
        if not transfers:
            self._node_arrival(run, sid, node_id, now)
            return
        run.pending_transfers[sid] = len(transfers)
        for src, size in transfers:
            dur = _us(transfer_time(self.topo, src, node_id, size))
            ok1 = self._sample_transfer(src, node_id)
            if ok1:
                self._push(now + dur, TRANSFER_COMPLETE, (run.dag.task_id, sid, node_id, "ok"))
                continue
            self._push(now + dur, TRANSFER_COMPLETE, (run.dag.task_id, sid, node_id, "lost"))
            ok2 = self._sample_transfer(src, node_id)
            outcome = "ok" if ok2 else "TransferLoss"
            self._push(now + 2 * dur, TRANSFER_COMPLETE, (run.dag.task_id, sid, node_id, outcome))

    def _sample_transfer(self, src: str, dst: str) -> bool:
        if src == dst:
            return True
        prob = self.topo.route_reliability(src, dst)
        if prob >= 1.0:
            return True
        return float(self._rng_transfer.random()) < prob

    def _on_transfer(self, now: int, task_id: str, sid: str, node_id: str, outcome: str):
        run = self.tasks[task_id]
        if run.terminal:
            return
        if run.placement.assignments.get(sid) != node_id:
            return  # reassigned while in flight; superseded
        self._emit(now, TRANSFER_COMPLETE, task=task_id, subtask=sid, node=node_id,
                   outcome=outcome)
        if outcome == "lost":
            return
        if outcome == "TransferLoss":
            self._fail(run, "TransferLoss")
            return
        run.pending_transfers[sid] -= 1
        if run.pending_transfers[sid] == 0:
            del run.pending_transfers[sid]
            self._node_arrival(run, sid, node_id, now)

    def _node_arrival(self, run: _TaskRun, sid: str, node_id: str, now: int):
        rt = self.nodes[node_id]
        s = run.dag.subtask(sid)
        if sid not in run.placement.substituted:
            self._start_role_load(node_id, s.role, now)
        comp_ms = s.compute_demand * self.roles[s.role].compute_multiplier \
            / rt.spec.compute_rate * 1000.0
        est_dur = _us(comp_ms + s.tool_calls * self.params.tool_mean_ms)
        expected = rt.expected_wait_us(now)
        if run.placement.priorities is not None:
            key = (0, run.placement.priorities[sid], now)
        else:
            key = (1, now, run.dag.task_id, sid)
        entry = _QueueEntry(key=key, task_id=run.dag.task_id, subtask_id=sid,
                            ready_us=now, est_dur_us=est_dur, expected_wait_us=expected)
        rt.queue.append(entry)
        rt.queue.sort(key=lambda e: e.key)
        self._push_wake(now, node_id)

    def _free_slots(self, rt: _NodeRuntime) -> int:
        free = rt.spec.concurrency_slots - len(rt.running)
        if self._serialize_cap:
            free = min(free, 1 - self._global_running)
        return free

    def _try_start(self, node_id: str, now: int):
        rt = self.nodes[node_id]
        while self._free_slots(rt) > 0 and rt.queue:
            started = False
            for idx, entry in enumerate(rt.queue):
                run = self.tasks[entry.task_id]
                if run.terminal:
                    rt.queue.pop(idx)
                    started = True
                    break
                s = run.dag.subtask(entry.subtask_id)
                if entry.subtask_id not in run.placement.substituted:
                    load_done = rt.loaded_roles.get(s.role)
                    if load_done is None:
                        self._start_role_load(node_id, s.role, now)
                        load_done = rt.loaded_roles[s.role]
                    if load_done > now:
                        self._push_wake(load_done, node_id)
                        continue
                rt.queue.pop(idx)
                self._start_subtask(run, entry, node_id, now)
                started = True
                break
            if not started:
                return

    def _start_subtask(self, run: _TaskRun, entry: _QueueEntry, node_id: str, now: int):
        rt = self.nodes[node_id]
        sid = entry.subtask_id
        s = run.dag.subtask(sid)
        role = self.roles[s.role]
        need = affinity.required_energy(s, role, rt.spec)
        if need > rt.energy_remaining:
            self._emit(now, SUBTASK_START, task=run.dag.task_id, subtask=sid,
                       node=node_id, outcome="EnergyDepleted")
            self._fail(run, "EnergyDepleted")
            return
        if not math.isinf(rt.energy_remaining):
            rt.energy_remaining -= need

        compute_us = _us(s.compute_demand * role.compute_multiplier
                         / rt.spec.compute_rate * 1000.0)
        lo, hi = self.params.tool_latency_ms
        p_ok = self.params.p_tool_mismatch if sid in run.placement.substituted \
            else self.params.p_tool
        latencies = []
        failures = []
        for _ in range(s.tool_calls):
            ms = lo if lo == hi else float(self._rng_tool_latency.uniform(lo, hi))
            latencies.append(_us(ms))
        for _ in range(s.tool_calls):
            ok = True if p_ok >= 1.0 else float(self._rng_tool_success.random()) < p_ok
            failures.append(not ok)

        rt.accrue(now)
        rt.running[(run.dag.task_id, sid)] = (now, 0)  # end patched below
        self._global_running += 1
        run.started.add(sid)
        self._emit(now, SUBTASK_START, task=run.dag.task_id, subtask=sid, node=node_id)

        t = now + compute_us
        outcome = "ok"
        for call_idx in range(s.tool_calls):
            t += latencies[call_idx]
            if failures[call_idx]:
                outcome = "ToolError"
                break
            self._push(t, TOOL_CALL_COMPLETE, (run.dag.task_id, sid, node_id))
        end = t
        rt.running[(run.dag.task_id, sid)] = (now, end)
        rt.sample_ewma(now, self.policy.weights.ewma_factor)
        self._push(end, SUBTASK_COMPLETE, (run.dag.task_id, sid, node_id, outcome))

    def _on_complete(self, now: int, task_id: str, sid: str, node_id: str, outcome: str):
        run = self.tasks[task_id]
        rt = self.nodes[node_id]
        rt.accrue(now)
        del rt.running[(task_id, sid)]
        self._global_running -= 1
        rt.sample_ewma(now, self.policy.weights.ewma_factor)
        self._emit(now, SUBTASK_COMPLETE, task=task_id, subtask=sid, node=node_id,
                   outcome=outcome)
        if not run.terminal:
            if outcome == "ToolError":
                self._fail(run, "ToolError")
            else:
                run.completed.add(sid)
                run.pred_node[sid] = node_id
                for succ in run.dag.successors(sid):
                    if succ not in run.completed and succ not in run.started \
                            and succ not in run.pending_transfers \
                            and not self._queued_or_running(run, succ) \
                            and all(p in run.completed for p in run.dag.predecessors(succ)):
                        self._dispatch(run, succ, now)
                if len(run.completed) == len(run.dag.subtasks):
                    run.status = "completed"
                    run.completion_us = now
                    self._active -= 1
        self._push_wake(now, node_id)

    def _queued_or_running(self, run: _TaskRun, sid: str) -> bool:
        nid = run.placement.assignments.get(sid)
        if nid is None:
            return False
        rt = self.nodes[nid]
        if (run.dag.task_id, sid) in rt.running:
            return True
        return any(e.task_id == run.dag.task_id and e.subtask_id == sid for e in rt.queue)

    def _on_tick(self, now: int):
        if self.policy.kind == affinity.DYNAROLE_HEFT:
            for nid in self.node_ids:
                self.nodes[nid].sample_ewma(now, self.policy.weights.ewma_factor)
            state = self._snapshot(now, with_bookings=False)
            emitted_tick = False
            for nid in self.node_ids:
                cause = affinity.detect_overload(state.nodes[nid], self.policy.weights)
                if cause is None:
                    continue
                rt = self.nodes[nid]
                pending = []
                for entry in rt.queue:
                    run = self.tasks[entry.task_id]
                    if run.terminal:
                        continue
                    s = run.dag.subtask(entry.subtask_id)
                    pred_transfers = {
                        run.pred_node[p]: run.dag.subtask(p).output_size
                        for p in run.dag.predecessors(entry.subtask_id)
                    }
                    pending.append(PendingSubtask(
                        task_id=entry.task_id, subtask=s, current_node=nid,
                        pred_transfers=pred_transfers,
                        source_node=run.dag.source_node,
                    ))
                if not pending:
                    continue
                delta = affinity.reassign(pending, self.topo, self.roles, state,
                                          self.policy.weights)
                for (task_id, sid) in sorted(delta):
                    new_node = delta[(task_id, sid)]
                    run = self.tasks[task_id]
                    rt.queue = [e for e in rt.queue
                                if not (e.task_id == task_id and e.subtask_id == sid)]
                    run.placement.assignments[sid] = new_node
                    self._emit(now, REASSESS_TICK, task=task_id, subtask=sid,
                               node=new_node, outcome=cause)
                    self._reassignments += 1
                    emitted_tick = True
                    self._dispatch(run, sid, now)
        if self._active > 0 or self._arrivals_left > 0:
            period_us = _us(self.policy.weights.reassess_period_ms)
            self._push(now + period_us, REASSESS_TICK, ())

    def _on_deadline(self, now: int, task_id: str):
        run = self.tasks[task_id]
        if run.terminal:
            return
        self._emit(now, DEADLINE_EXPIRED, task=task_id, outcome="DeadlineMiss")
        self._fail(run, "DeadlineMiss")

    def _fail(self, run: _TaskRun, cause: str):
        if run.terminal:
            return
        run.status = "failed"
        run.failure_cause = cause
        self._active -= 1
        task_id = run.dag.task_id
        for rt in self.nodes.values():
            if rt.queue:
                rt.queue = [e for e in rt.queue if e.task_id != task_id]


def run_simulation(topo: Topology, roles: dict[str, RoleSpec], tasks: list[TaskDag],
                   policy: PolicyConfig, params: SimParams) -> SimResult:
    engine = Engine(topo, roles, tasks, policy, params)
    return engine.run()
