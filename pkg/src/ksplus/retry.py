"""Plan adjustments applied after an out-of-memory kill."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .predictor import AllocationPlan
from .trace import BYTES_PER_GB

DEFAULT_MACHINE_MAX = 128 * BYTES_PER_GB
DEFAULT_BUMP = 0.20
DEFAULT_OFFSET_FACTOR = 2.0


class RetryPolicy(str, enum.Enum):
    KS_PLUS_RESCALE = "ksplus-rescale"
    SELECTIVE_OFFSET = "selective-offset"
    PARTIAL_OFFSET = "partial-offset"
    DOUBLE_ALL = "double-all"
    MAX_MACHINE = "max-machine"

    @classmethod
    def parse(cls, name: "str | RetryPolicy") -> "RetryPolicy":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown retry policy {name!r}; choose from {choices}") from None


class MachineMemoryExceeded(RuntimeError):
    """The failed step already holds the whole machine; nothing is left to try."""


@dataclass(frozen=True)
class FailureEvent:
    t_fail: float
    failed_step_index: int

    @classmethod
    def at(cls, plan: AllocationPlan, t_fail: float) -> "FailureEvent":
        return cls(t_fail, plan.step_index_at(t_fail))


def adjust_plan(
    plan: AllocationPlan,
    event: FailureEvent,
    policy: RetryPolicy | str,
    machine_max: float = DEFAULT_MACHINE_MAX,
    bump: float = DEFAULT_BUMP,
    offset_factor: float = DEFAULT_OFFSET_FACTOR,
) -> AllocationPlan:
    """Return the plan for the next attempt.

    Raises :class:`MachineMemoryExceeded` when the limit in force at the
    failure already equals ``machine_max``.
    """
    policy = RetryPolicy.parse(policy)
    j = event.failed_step_index
    if not 0 <= j < len(plan):
        raise ValueError(f"failed_step_index {j} out of range for a {len(plan)}-step plan")
    starts = plan.starts
    limits = plan.limits
    failed_limit = limits[j]
    if failed_limit >= machine_max:
        raise MachineMemoryExceeded(
            f"limit {failed_limit / BYTES_PER_GB:g} GB at t={event.t_fail:g} s already "
            f"exceeds machine memory {machine_max / BYTES_PER_GB:g} GB"
        )

    def cap(v: float) -> float:
        return min(v, machine_max)

    if policy is RetryPolicy.KS_PLUS_RESCALE:
        # Steps that merely repeat the failed limit cannot help; rescale so the
        # first strictly higher step begins at the failure time.
        target = next((i for i in range(j + 1, len(plan)) if limits[i] > failed_limit), None)
        if target is not None and event.t_fail > 0:
            factor = event.t_fail / starts[target]
            new_starts = starts[: j + 1] + [s * factor for s in starts[j + 1 :]]
            # Scaled starts that collide with earlier ones are absorbed by the
            # later, higher step.
            return AllocationPlan.from_raw(new_starts, limits)
        limits[j] = cap(failed_limit * (1 + bump))
        return AllocationPlan.from_raw(starts, limits)

    if policy is RetryPolicy.SELECTIVE_OFFSET:
        limits[j] = cap(failed_limit * offset_factor)
        return AllocationPlan.from_raw(starts, limits)

    if policy is RetryPolicy.PARTIAL_OFFSET:
        limits = limits[:j] + [cap(l * offset_factor) for l in limits[j:]]
        return AllocationPlan.from_raw(starts, limits)

    if policy is RetryPolicy.DOUBLE_ALL:
        return AllocationPlan.single(cap(failed_limit * offset_factor))

    return AllocationPlan.single(machine_max)
