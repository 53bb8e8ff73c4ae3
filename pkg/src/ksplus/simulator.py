"""Trace replay of allocation plans with OOM detection, retries and GB·s accounting.

An attempt is killed at the first sample whose memory exceeds the limit in
force at that sample's timestamp.  Plans never decrease, so the limit at a
sample's start is the lowest limit over the interval the sample covers.
A failed attempt is charged everything it was allocated up to the kill and
contributes no useful work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .predictor import TIME_RTOL, AllocationPlan
from .retry import (
    DEFAULT_BUMP,
    DEFAULT_MACHINE_MAX,
    DEFAULT_OFFSET_FACTOR,
    FailureEvent,
    MachineMemoryExceeded,
    RetryPolicy,
    adjust_plan,
)
from .trace import BYTES_PER_GB, TaskExecutionTrace, duration

DEFAULT_MAX_ATTEMPTS = 20

# Limits are products of float regressions; usage this close to a limit is
# treated as equal to it (equality survives).
MEM_RTOL = 1e-9


@dataclass(frozen=True)
class AttemptRecord:
    plan: AllocationPlan
    t_fail: float | None  # None when the attempt ran to completion
    allocated_integral: float  # GB·s
    used_integral: float  # GB·s

    @property
    def succeeded(self) -> bool:
        return self.t_fail is None

    @property
    def wastage(self) -> float:
        return self.allocated_integral - self.used_integral


@dataclass(frozen=True)
class SimulationOutcome:
    execution_id: str
    attempts: tuple[AttemptRecord, ...]
    total_wastage: float  # GB·s
    succeeded: bool
    reason: str | None = None

    @property
    def failures(self) -> int:
        return sum(1 for a in self.attempts if not a.succeeded)

    def to_dict(self) -> dict:
        return {
            "execution_id": self.execution_id,
            "succeeded": self.succeeded,
            "reason": self.reason,
            "total_wastage_gbs": self.total_wastage,
            "attempts": [
                {
                    "plan": a.plan.to_list(),
                    "t_fail": a.t_fail,
                    "allocated_gbs": a.allocated_integral,
                    "used_gbs": a.used_integral,
                }
                for a in self.attempts
            ],
        }


def limits_at_samples(trace: TaskExecutionTrace, plan: AllocationPlan) -> np.ndarray:
    starts = np.array(plan.starts)
    t = trace.times
    idx = np.searchsorted(starts, t + TIME_RTOL * np.maximum(np.abs(t), 1.0), side="right") - 1
    return np.array(plan.limits)[idx]


def used_integral(trace: TaskExecutionTrace) -> float:
    """``∫ mem(t) dt`` over the whole execution, in GB·s."""
    edges = np.append(trace.times, duration(trace))
    return float(np.dot(trace.mem.astype(np.float64), np.diff(edges))) / BYTES_PER_GB


def replay_once(trace: TaskExecutionTrace, plan: AllocationPlan) -> AttemptRecord:
    limits = limits_at_samples(trace, plan)
    over = trace.mem > limits * (1 + MEM_RTOL)
    if over.any():
        t_fail = float(trace.times[int(np.argmax(over))])
        return AttemptRecord(plan, t_fail, plan.integral(t_fail) / BYTES_PER_GB, 0.0)
    return AttemptRecord(
        plan, None, plan.integral(duration(trace)) / BYTES_PER_GB, used_integral(trace)
    )


def total_wastage(attempts) -> float:
    """Allocation of every failed attempt plus over-allocation of a final success."""
    total = sum(a.allocated_integral for a in attempts if not a.succeeded)
    if attempts and attempts[-1].succeeded:
        total += attempts[-1].allocated_integral - attempts[-1].used_integral
    return total


def simulate_with_retries(
    trace: TaskExecutionTrace,
    initial_plan: AllocationPlan,
    policy: RetryPolicy | str,
    machine_max: float = DEFAULT_MACHINE_MAX,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    bump: float = DEFAULT_BUMP,
    offset_factor: float = DEFAULT_OFFSET_FACTOR,
) -> SimulationOutcome:
    """Replay, adjust and replay again until success, a hard error or the budget runs out."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    policy = RetryPolicy.parse(policy)
    attempts: list[AttemptRecord] = []
    plan = initial_plan
    reason = None
    while True:
        record = replay_once(trace, plan)
        attempts.append(record)
        if record.succeeded:
            break
        if len(attempts) >= max_attempts:
            reason = f"attempt budget of {max_attempts} exhausted"
            break
        try:
            plan = adjust_plan(
                plan,
                FailureEvent.at(plan, record.t_fail),
                policy,
                machine_max=machine_max,
                bump=bump,
                offset_factor=offset_factor,
            )
        except MachineMemoryExceeded as exc:
            reason = f"exceeds machine memory: {exc}"
            break
    return SimulationOutcome(
        execution_id=trace.execution_id,
        attempts=tuple(attempts),
        total_wastage=total_wastage(attempts),
        succeeded=attempts[-1].succeeded,
        reason=reason,
    )
