"""Per-task memory-over-time model and the allocation plans it emits.

Fitting segments every training execution, then regresses each segment's
peak and absolute start time on input size.  Prediction evaluates those
regressions, inflates peaks and deflates starts by safety margins, and
repairs the result into a monotone step function.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import regression
from .regression import LinearModel
from .segmentation import get_segments
from .trace import TaskExecutionTrace

DEFAULT_PEAK_MARGIN = 0.10
DEFAULT_START_MARGIN = 0.15

# Plan starts that come out of float regressions land a few ulps off the
# sample grid; a step counts as active this close before its start.
TIME_RTOL = 1e-9


@dataclass(frozen=True)
class AllocationPlan:
    """Monotone step function: ``steps[i] = (start_seconds, limit_bytes)``.

    The last limit holds until the task terminates.
    """

    steps: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        steps = tuple((float(s), float(l)) for s, l in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValueError("a plan needs at least one step")
        if steps[0][0] != 0:
            raise ValueError("the first step must start at 0")
        for (s0, l0), (s1, l1) in zip(steps, steps[1:]):
            if not s1 > s0:
                raise ValueError("step starts must be strictly increasing")
            if l1 < l0:
                raise ValueError("step limits must be non-decreasing")
        if steps[0][1] < 0:
            raise ValueError("limits must be non-negative")

    @classmethod
    def single(cls, limit: float) -> "AllocationPlan":
        return cls(((0.0, limit),))

    @classmethod
    def from_raw(
        cls, starts: Sequence[float], limits: Sequence[float], merge_equal: bool = False
    ) -> "AllocationPlan":
        """Repair arbitrary per-step predictions into a valid plan.

        Limits become their running maximum.  A step that starts no later than
        the step before it replaces that step, which keeps the plan at or above
        every input step everywhere.  With ``merge_equal``, steps that do not
        raise the limit are dropped.
        """
        if len(starts) != len(limits) or not starts:
            raise ValueError("starts and limits must be non-empty and of equal length")
        kept: list[tuple[float, float]] = []
        running = float("-inf")
        for i, (s, l) in enumerate(zip(starts, limits)):
            running = max(running, float(l))
            s = 0.0 if i == 0 else max(float(s), 0.0)
            while len(kept) > 1 and s <= kept[-1][0]:
                kept.pop()
            if kept and s <= kept[-1][0]:
                kept[-1] = (kept[-1][0], running)
            else:
                kept.append((s, running))
        if merge_equal:
            merged = [kept[0]]
            for s, l in kept[1:]:
                if l > merged[-1][1]:
                    merged.append((s, l))
            kept = merged
        return cls(tuple(kept))

    @property
    def starts(self) -> list[float]:
        return [s for s, _ in self.steps]

    @property
    def limits(self) -> list[float]:
        return [l for _, l in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def step_index_at(self, t: float) -> int:
        return bisect.bisect_right(self.starts, t + TIME_RTOL * max(abs(t), 1.0)) - 1

    def limit_at(self, t: float) -> float:
        return self.steps[self.step_index_at(t)][1]

    def integral(self, t_end: float) -> float:
        """``∫_0^t_end A(t) dt`` in byte-seconds."""
        total = 0.0
        for i, (s, l) in enumerate(self.steps):
            if s >= t_end:
                break
            end = self.steps[i + 1][0] if i + 1 < len(self.steps) else t_end
            total += l * (min(end, t_end) - s)
        return total

    def to_list(self) -> list[list[float]]:
        return [[s, l] for s, l in self.steps]


@dataclass(frozen=True)
class FittedTaskModel:
    task: str
    k: int
    peak_models: tuple[LinearModel, ...]
    start_models: tuple[LinearModel, ...]
    peak_margin: float = DEFAULT_PEAK_MARGIN
    start_margin: float = DEFAULT_START_MARGIN
    workflow: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "peak_models", tuple(self.peak_models))
        object.__setattr__(self, "start_models", tuple(self.start_models))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.peak_models) != self.k or len(self.start_models) != self.k:
            raise ValueError("need exactly k peak models and k start models")
        for name in ("peak_margin", "start_margin"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "workflow": self.workflow,
            "task": self.task,
            "k": self.k,
            "peak_margin": self.peak_margin,
            "start_margin": self.start_margin,
            "peak_models": [m.to_dict() for m in self.peak_models],
            "start_models": [m.to_dict() for m in self.start_models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedTaskModel":
        return cls(
            task=str(d["task"]),
            k=int(d["k"]),
            peak_models=tuple(LinearModel.from_dict(m) for m in d["peak_models"]),
            start_models=tuple(LinearModel.from_dict(m) for m in d["start_models"]),
            peak_margin=float(d.get("peak_margin", DEFAULT_PEAK_MARGIN)),
            start_margin=float(d.get("start_margin", DEFAULT_START_MARGIN)),
            workflow=str(d.get("workflow", "")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FittedTaskModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def check_training(training: Sequence[TaskExecutionTrace]) -> None:
    if not training:
        raise ValueError("training set is empty")
    names = {t.task for t in training}
    if len(names) > 1:
        raise ValueError(f"training traces mix tasks: {sorted(names)}")


def segment_parameters(trace: TaskExecutionTrace, k: int) -> tuple[list[float], list[float]]:
    """Absolute segment start times (s) and peaks (bytes), padded to length ``k``.

    Executions that segment into fewer than ``k`` steps repeat their final
    start and peak in the missing trailing slots.
    """
    seg = get_segments(trace.mem.tolist(), k)
    starts = [i * trace.sample_period for i in seg.start_indices()]
    peaks = [float(p) for p in seg.peaks]
    starts += [starts[-1]] * (k - len(starts))
    peaks += [peaks[-1]] * (k - len(peaks))
    return starts, peaks


def fit_task(
    training: Sequence[TaskExecutionTrace],
    k: int,
    peak_margin: float = DEFAULT_PEAK_MARGIN,
    start_margin: float = DEFAULT_START_MARGIN,
) -> FittedTaskModel:
    check_training(training)
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    params = [(t.input_size, *segment_parameters(t, k)) for t in training]
    peak_models = tuple(regression.fit([(x, peaks[i]) for x, _, peaks in params]) for i in range(k))
    start_models = (regression.constant(0.0, len(params)),) + tuple(
        regression.fit([(x, starts[i]) for x, starts, _ in params]) for i in range(1, k)
    )
    return FittedTaskModel(
        task=training[0].task,
        k=k,
        peak_models=peak_models,
        start_models=start_models,
        peak_margin=peak_margin,
        start_margin=start_margin,
        workflow=training[0].workflow,
    )


def margined_plan(
    peaks: Sequence[float],
    starts: Sequence[float],
    peak_margin: float,
    start_margin: float,
    merge_equal: bool = False,
) -> AllocationPlan:
    limits = [p * (1 + peak_margin) for p in peaks]
    shifted = [0.0] + [s * (1 - start_margin) for s in starts[1:]]
    return AllocationPlan.from_raw(shifted, limits, merge_equal=merge_equal)


def predict_plan(model: FittedTaskModel, input_size: float) -> AllocationPlan:
    peaks = [regression.predict(m, input_size, floor=0.5 * m.y_min) for m in model.peak_models]
    starts = [regression.predict(m, input_size, floor=0.0) for m in model.start_models]
    return margined_plan(peaks, starts, model.peak_margin, model.start_margin)
