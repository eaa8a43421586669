"""Per-task records, aggregate statistics and the CSV tables behind the reports.

Failed tasks are excluded from latency aggregates but counted in completion
rates; that convention is stamped into each CSV header comment.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import NoData
from .trace import fmt_ms
from .workload import EASY, HARD, MEDIUM

BUCKETS = (EASY, MEDIUM, HARD)

TASKS_COLUMNS = [
    "policy", "load", "seed", "task_id", "difficulty", "tool_count",
    "arrival_ms", "assignment_ms", "completion_ms",
    "scheduling_latency_ms", "execution_latency_ms", "end_to_end_ms",
    "outcome", "failure_cause",
]

SUMMARY_COLUMNS = [
    "policy", "load", "seeds", "tasks", "completed", "offered_load",
    "rate_easy", "rate_medium", "rate_hard", "rate_overall",
    "sched_mean_ms", "sched_median_ms", "sched_p95_ms",
    "exec_mean_ms", "exec_median_ms", "exec_p95_ms",
    "e2e_mean_ms", "e2e_median_ms", "e2e_p95_ms",
    "scheduling_share", "execution_share",
]

TOOL_COLUMNS = ["policy", "load", "tool_count", "tasks", "completed", "e2e_mean_ms"]

_EXCLUSION_NOTE = ("# failed tasks are excluded from latency aggregates "
                   "and counted in completion rates")


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    difficulty: str
    tool_count: int
    arrival_us: int
    assignment_us: int | None
    completion_us: int | None
    scheduling_latency_us: int | None
    execution_latency_us: int | None
    end_to_end_us: int | None
    outcome: str            # Completed | Failed
    failure_cause: str


def completion_rate(records: list[TaskRecord], bucket: str) -> float:
    """Completed / total within the bucket, rounded to 4 decimal places."""
    in_bucket = [r for r in records if r.difficulty == bucket]
    if not in_bucket:
        raise NoData(f"no records in bucket {bucket}")
    done = sum(1 for r in in_bucket if r.outcome == "Completed")
    return round(done / len(in_bucket), 4)


def overall_rate(records: list[TaskRecord]) -> float:
    if not records:
        raise NoData("no records")
    done = sum(1 for r in records if r.outcome == "Completed")
    return round(done / len(records), 4)


def latency_breakdown(records: list[TaskRecord]) -> tuple[float, float]:
    """(scheduling share, execution share) of mean end-to-end, completed tasks only."""
    done = [r for r in records if r.outcome == "Completed"]
    if not done:
        raise NoData("no completed records")
    mean_sched = sum(r.scheduling_latency_us for r in done) / len(done)
    mean_e2e = sum(r.end_to_end_us for r in done) / len(done)
    share = mean_sched / mean_e2e
    return share, 1.0 - share


def _percentile_nearest_rank(sorted_values: list[float], q: float) -> float:
    import math

    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def latency_stats(values_us: list[int]) -> tuple[float, float, float]:
    """(mean, median, p95) in milliseconds; nearest-rank percentiles."""
    if not values_us:
        raise NoData("no latency samples")
    ordered = sorted(values_us)
    mean = sum(ordered) / len(ordered) / 1000.0
    mid = len(ordered) // 2
    if len(ordered) % 2:
        median = ordered[mid] / 1000.0
    else:
        median = (ordered[mid - 1] + ordered[mid]) / 2000.0
    p95 = _percentile_nearest_rank(ordered, 0.95) / 1000.0
    return mean, median, p95


@dataclass
class RunMetrics:
    policy: str
    load: str
    seeds: int
    tasks: int
    completed: int
    offered_load: float
    rates: dict[str, float | None]
    rate_overall: float
    sched_stats: tuple[float, float, float] | None
    exec_stats: tuple[float, float, float] | None
    e2e_stats: tuple[float, float, float] | None
    scheduling_share: float | None
    execution_share: float | None
    by_tool_count: dict[int, tuple[int, int, float | None]]
    # tool_count -> (tasks, completed, mean e2e ms of completed or None)


def summarize(records: list[TaskRecord], *, policy: str, load: str = "base",
              seeds: int = 1, offered_load: float = 0.0) -> RunMetrics:
    rates = {}
    for bucket in BUCKETS:
        try:
            rates[bucket] = completion_rate(records, bucket)
        except NoData:
            rates[bucket] = None
    done = [r for r in records if r.outcome == "Completed"]
    sched = exec_ = e2e = None
    share = (None, None)
    if done:
        sched = latency_stats([r.scheduling_latency_us for r in done])
        exec_ = latency_stats([r.execution_latency_us for r in done])
        e2e = latency_stats([r.end_to_end_us for r in done])
        share = latency_breakdown(records)
    by_tool: dict[int, tuple[int, int, float | None]] = {}
    for count in sorted({r.tool_count for r in records}):
        subset = [r for r in records if r.tool_count == count]
        completed = [r for r in subset if r.outcome == "Completed"]
        mean = (sum(r.end_to_end_us for r in completed) / len(completed) / 1000.0
                if completed else None)
        by_tool[count] = (len(subset), len(completed), mean)
    return RunMetrics(
        policy=policy, load=load, seeds=seeds, tasks=len(records), completed=len(done),
        offered_load=offered_load, rates=rates,
        rate_overall=overall_rate(records) if records else 0.0,
        sched_stats=sched, exec_stats=exec_, e2e_stats=e2e,
        scheduling_share=share[0], execution_share=share[1],
        by_tool_count=by_tool,
    )


def _ms(value_us: int | None) -> str:
    return "NA" if value_us is None else fmt_ms(value_us)


def _num(value: float | None, places: int = 4) -> str:
    return "NA" if value is None else f"{value:.{places}f}"


def tasks_rows(records: list[TaskRecord], *, policy: str, load: str, seed: int):
    for r in records:
        yield [
            policy, load, str(seed), r.task_id, r.difficulty, str(r.tool_count),
            _ms(r.arrival_us), _ms(r.assignment_us), _ms(r.completion_us),
            _ms(r.scheduling_latency_us), _ms(r.execution_latency_us),
            _ms(r.end_to_end_us), r.outcome, r.failure_cause,
        ]


def summary_row(m: RunMetrics):
    def stats(t):
        return ["NA"] * 3 if t is None else [_num(v) for v in t]

    return [
        m.policy, m.load, str(m.seeds), str(m.tasks), str(m.completed),
        _num(m.offered_load),
        _num(m.rates[EASY]), _num(m.rates[MEDIUM]), _num(m.rates[HARD]),
        _num(m.rate_overall),
        *stats(m.sched_stats), *stats(m.exec_stats), *stats(m.e2e_stats),
        _num(m.scheduling_share, 6), _num(m.execution_share, 6),
    ]


def tool_rows(m: RunMetrics):
    for count in sorted(m.by_tool_count):
        n, completed, mean = m.by_tool_count[count]
        yield [m.policy, m.load, str(count), str(n), str(completed), _num(mean)]


def render_csv(columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(_EXCLUSION_NOTE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    return rows[0], rows[1:]


def export_csv(run_sets, out_dir) -> dict[str, str]:
    """Write tasks.csv / summary.csv / by_tool_count.csv under out_dir.

    run_sets: list of dicts with keys policy, load, seed, records, metrics.
    Returns {filename: path} for the manifest.
    """
    import os

    task_rows_all = []
    summary_rows_all = []
    tool_rows_all = []
    for rs in run_sets:
        task_rows_all.extend(
            tasks_rows(rs["records"], policy=rs["policy"], load=rs["load"], seed=rs["seed"])
        )
    seen = set()
    for rs in run_sets:
        key = (rs["policy"], rs["load"])
        if key in seen or "metrics" not in rs:
            continue
        seen.add(key)
        summary_rows_all.append(summary_row(rs["metrics"]))
        tool_rows_all.extend(tool_rows(rs["metrics"]))

    paths = {}
    os.makedirs(out_dir, exist_ok=True)
    for name, columns, rows in (
        ("tasks.csv", TASKS_COLUMNS, task_rows_all),
        ("summary.csv", SUMMARY_COLUMNS, summary_rows_all),
        ("by_tool_count.csv", TOOL_COLUMNS, tool_rows_all),
    ):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(columns, rows))
        paths[name] = path
    return paths
