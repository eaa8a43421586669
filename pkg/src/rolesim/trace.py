"""Line-delimited trace records: `time_ms kind task subtask node outcome`.

Times are integer microseconds internally and render as exact millisecond
decimals, so serialization is byte-stable across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

TASK_ARRIVAL = "TaskArrival"
SCHEDULING_DONE = "SchedulingDone"
TRANSFER_COMPLETE = "TransferComplete"
SUBTASK_START = "SubtaskStart"
TOOL_CALL_COMPLETE = "ToolCallComplete"
SUBTASK_COMPLETE = "SubtaskComplete"
REASSESS_TICK = "ReassessTick"
DEADLINE_EXPIRED = "DeadlineExpired"

KIND_PRIORITY = {
    TASK_ARRIVAL: 0,
    SCHEDULING_DONE: 1,
    TRANSFER_COMPLETE: 2,
    SUBTASK_START: 3,
    TOOL_CALL_COMPLETE: 4,
    SUBTASK_COMPLETE: 5,
    REASSESS_TICK: 6,
    DEADLINE_EXPIRED: 7,
}

FAILURE_OUTCOMES = {
    "Unschedulable",
    "TransferLoss",
    "ToolError",
    "EnergyDepleted",
    "DeadlineMiss",
}


@dataclass(frozen=True)
class TraceRow:
    time_us: int
    kind: str
    task: str = "-"
    subtask: str = "-"
    node: str = "-"
    outcome: str = "-"

    def sort_key(self):
        return (self.time_us, KIND_PRIORITY[self.kind])


def fmt_ms(time_us: int) -> str:
    """Exact decimal milliseconds with at least one fractional digit."""
    sign = "-" if time_us < 0 else ""
    time_us = abs(time_us)
    whole, frac = divmod(time_us, 1000)
    text = f"{frac:03d}".rstrip("0") or "0"
    return f"{sign}{whole}.{text}"


def parse_ms(text: str) -> int:
    """Inverse of fmt_ms; exact, no float rounding."""
    sign = -1 if text.startswith("-") else 1
    text = text.lstrip("-")
    if "." in text:
        whole, frac = text.split(".", 1)
    else:
        whole, frac = text, "0"
    frac = (frac + "000")[:3]
    return sign * (int(whole) * 1000 + int(frac))


def to_line(row: TraceRow) -> str:
    return f"{fmt_ms(row.time_us)} {row.kind} {row.task} {row.subtask} {row.node} {row.outcome}"


def parse_line(line: str) -> TraceRow:
    parts = line.split()
    if len(parts) != 6:
        raise ValueError(f"malformed trace line: {line!r}")
    time_ms, kind, task, subtask, node, outcome = parts
    if kind not in KIND_PRIORITY:
        raise ValueError(f"unknown event kind {kind!r}")
    return TraceRow(parse_ms(time_ms), kind, task, subtask, node, outcome)


def serialize(rows: list[TraceRow]) -> str:
    return "".join(to_line(r) + "\n" for r in rows)


def parse(text: str) -> list[TraceRow]:
    rows = []
    for raw in text.splitlines():
        raw = raw.strip()
        if raw and not raw.startswith("#"):
            rows.append(parse_line(raw))
    return rows
