"""Task execution traces: data model, JSON-Lines ingestion and validation.

A trace file holds one JSON object per line::

    {"workflow": "eager", "task": "bwa", "execution_id": "17",
     "input_size_bytes": 1000000000, "samples": [[0, 5100000000], [1, 5100000000]]}

An optional ``sample_period`` (seconds) is written by :func:`write_traces`;
it only matters for single-sample executions, whose spacing cannot be inferred.

Samples are piecewise constant: sample ``i`` holds on ``[t_i, t_{i+1})`` and the
last sample holds for one sample period.  Traces with non-uniform spacing are
resampled onto their median spacing by previous-value hold when loaded.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

#: Decimal gigabyte; every GB·s figure in this package uses it.
BYTES_PER_GB = 10**9

# Relative tolerance when deciding whether spacing is already uniform.
_UNIFORM_RTOL = 1e-9


class TraceError(ValueError):
    """A trace file or record is malformed or violates an invariant."""


@dataclass(frozen=True)
class MemorySample:
    t: float
    mem: int

    def __post_init__(self) -> None:
        if not self.t >= 0:
            raise TraceError(f"sample time must be non-negative, got {self.t}")
        if self.mem < 0:
            raise TraceError(f"sample memory must be non-negative, got {self.mem}")


@dataclass(frozen=True, eq=False)
class TaskExecutionTrace:
    """One execution of one task.

    ``times`` (seconds) and ``mem`` (bytes) are read-only numpy arrays of equal
    length.  Use :meth:`from_samples` to build one from raw pairs.
    """

    workflow: str
    task: str
    execution_id: str
    input_size: int
    times: np.ndarray
    mem: np.ndarray
    sample_period: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        mem = np.asarray(self.mem, dtype=np.int64)
        ctx = f"execution {self.execution_id!r}"
        if times.ndim != 1 or times.shape != mem.shape:
            raise TraceError(f"{ctx}: times and mem must be 1-d arrays of equal length")
        if times.size == 0:
            raise TraceError(f"{ctx}: samples must be non-empty")
        if times[0] != 0:
            raise TraceError(f"{ctx}: samples: first timestamp must be 0, got {times[0]}")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise TraceError(f"{ctx}: samples: timestamps must be strictly increasing")
        if np.any(mem < 0):
            raise TraceError(f"{ctx}: samples: memory values must be non-negative")
        if self.input_size < 0:
            raise TraceError(f"{ctx}: input_size must be non-negative")
        if not (self.sample_period > 0 and math.isfinite(self.sample_period)):
            raise TraceError(f"{ctx}: sample_period must be positive")
        times.setflags(write=False)
        mem.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mem", mem)

    @classmethod
    def from_samples(
        cls,
        workflow: str,
        task: str,
        execution_id: str,
        input_size: int,
        samples: Iterable[Sequence[float]],
        sample_period: float | None = None,
    ) -> "TaskExecutionTrace":
        """Build a trace from ``(t, mem)`` pairs, resampling if spacing is uneven.

        ``sample_period`` is only consulted for single-sample traces, whose
        spacing cannot be inferred; it defaults to 1 s there.
        """
        pairs = [(float(t), _as_bytes(m, execution_id)) for t, m in samples]
        if not pairs:
            raise TraceError(f"execution {execution_id!r}: samples must be non-empty")
        times = np.array([p[0] for p in pairs], dtype=np.float64)
        mem = np.array([p[1] for p in pairs], dtype=np.int64)
        if times.size > 1:
            diffs = np.diff(times)
            if not np.all(diffs > 0):
                raise TraceError(
                    f"execution {execution_id!r}: samples: timestamps must be strictly increasing"
                )
            period = float(np.median(diffs))
            if not np.allclose(diffs, period, rtol=_UNIFORM_RTOL, atol=0.0):
                times, mem = resample(times, mem, period)
        else:
            period = float(sample_period) if sample_period is not None else 1.0
        return cls(workflow, task, str(execution_id), int(input_size), times, mem, period)

    @property
    def samples(self) -> list[MemorySample]:
        return [MemorySample(float(t), int(m)) for t, m in zip(self.times, self.mem)]

    @property
    def peak(self) -> int:
        return int(self.mem.max())

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskExecutionTrace):
            return NotImplemented
        return (
            self.workflow == other.workflow
            and self.task == other.task
            and self.execution_id == other.execution_id
            and self.input_size == other.input_size
            and self.sample_period == other.sample_period
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.mem, other.mem)
        )

    def __hash__(self) -> int:
        return hash((self.workflow, self.task, self.execution_id))

    def to_record(self) -> dict:
        return {
            "workflow": self.workflow,
            "task": self.task,
            "execution_id": self.execution_id,
            "input_size_bytes": self.input_size,
            "samples": [[float(t), int(m)] for t, m in zip(self.times, self.mem)],
            "sample_period": self.sample_period,
        }


def duration(trace: TaskExecutionTrace) -> float:
    """Covered runtime: last timestamp plus one sample period."""
    return float(trace.times[-1]) + trace.sample_period


def resample(times: np.ndarray, mem: np.ndarray, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Previous-value hold of ``mem`` onto the grid ``0, period, 2*period, ...``."""
    n = int(math.floor(times[-1] / period * (1 + _UNIFORM_RTOL))) + 1
    grid = np.arange(n, dtype=np.float64) * period
    idx = np.searchsorted(times, grid * (1 + _UNIFORM_RTOL), side="right") - 1
    return grid, np.asarray(mem)[idx]


def _as_bytes(value, execution_id) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceError(f"execution {execution_id!r}: memory value {value!r} is not a number")
    if isinstance(value, float):
        if not math.isfinite(value):
            raise TraceError(f"execution {execution_id!r}: memory value {value!r} is not finite")
        value = round(value)
    return int(value)


@dataclass(frozen=True)
class TraceSet:
    executions: tuple[TaskExecutionTrace, ...]
    sample_period: float = field(init=False)

    def __post_init__(self) -> None:
        executions = tuple(self.executions)
        object.__setattr__(self, "executions", executions)
        seen: set[tuple[str, str, str]] = set()
        for ex in executions:
            key = (ex.workflow, ex.task, ex.execution_id)
            if key in seen:
                raise TraceError(
                    f"execution {ex.execution_id!r}: execution_id duplicated within "
                    f"task {ex.workflow}/{ex.task}"
                )
            seen.add(key)
        period = float(np.median([ex.sample_period for ex in executions])) if executions else 1.0
        object.__setattr__(self, "sample_period", period)

    def __iter__(self) -> Iterator[TaskExecutionTrace]:
        return iter(self.executions)

    def __len__(self) -> int:
        return len(self.executions)

    def by_task(self) -> dict[tuple[str, str], list[TaskExecutionTrace]]:
        """Executions grouped by ``(workflow, task)``, keys in sorted order."""
        groups: dict[tuple[str, str], list[TaskExecutionTrace]] = defaultdict(list)
        for ex in self.executions:
            groups[(ex.workflow, ex.task)].append(ex)
        return {key: groups[key] for key in sorted(groups)}


def parse_record(record: dict) -> TaskExecutionTrace:
    """Validate one decoded JSON object and turn it into a trace."""
    if not isinstance(record, dict):
        raise TraceError("record is not a JSON object")
    ex_id = record.get("execution_id")
    for name in ("workflow", "task", "execution_id", "input_size_bytes", "samples"):
        if name not in record:
            raise TraceError(f"execution {ex_id!r}: missing field {name!r}")
    size = record["input_size_bytes"]
    if isinstance(size, bool) or not isinstance(size, (int, float)) or size < 0:
        raise TraceError(f"execution {ex_id!r}: input_size_bytes must be a non-negative number")
    samples = record["samples"]
    if not isinstance(samples, list) or not samples:
        raise TraceError(f"execution {ex_id!r}: samples must be a non-empty list")
    pairs = []
    for s in samples:
        if not isinstance(s, (list, tuple)) or len(s) != 2:
            raise TraceError(f"execution {ex_id!r}: samples entries must be [t, mem] pairs")
        t, m = s
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not t >= 0:
            raise TraceError(f"execution {ex_id!r}: samples: bad timestamp {t!r}")
        if not isinstance(m, (int, float)) or m < 0:
            raise TraceError(f"execution {ex_id!r}: samples: bad memory value {m!r}")
        pairs.append((t, m))
    period = record.get("sample_period")
    if period is not None and (isinstance(period, bool) or not isinstance(period, (int, float)) or not period > 0):
        raise TraceError(f"execution {ex_id!r}: sample_period must be a positive number")
    return TaskExecutionTrace.from_samples(
        str(record["workflow"]), str(record["task"]), str(ex_id), int(size), pairs, sample_period=period
    )


def load_traces(path: str | Path) -> TraceSet:
    """Read and validate a JSON-Lines trace file.

    Raises :class:`TraceError` with the offending line number.
    """
    path = Path(path)
    executions = []
    explicit = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                executions.append(parse_record(record))
                explicit.append(isinstance(record, dict) and "sample_period" in record)
            except TraceError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
    if not executions:
        raise TraceError(f"{path}: no executions found")
    # Single-sample executions without an explicit period borrow the file's
    # typical spacing.
    periods = [ex.sample_period for ex in executions if len(ex) > 1]
    if periods:
        fallback = float(np.median(periods))
        executions = [
            replace(ex, sample_period=fallback) if len(ex) == 1 and not explicit[i] else ex
            for i, ex in enumerate(executions)
        ]
    try:
        return TraceSet(tuple(executions))
    except TraceError as exc:
        raise TraceError(f"{path}: {exc}") from exc


def write_traces(traces: TraceSet | Iterable[TaskExecutionTrace], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in traces:
            fh.write(json.dumps(ex.to_record(), separators=(",", ":")))
            fh.write("\n")
