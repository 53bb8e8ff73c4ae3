"""Comparison methods and the uniform factory that the experiment harness uses.

Every method turns a training set into a function from input size to a first
:class:`AllocationPlan`, and carries the retry policy it is evaluated with:

=====================  ==========================  ==================
method                 first allocation            retry policy
=====================  ==========================  ==================
ksplus                 variable-size segments      ksplus-rescale
ks-uniform-selective   k equal-duration segments   selective-offset
ks-uniform-partial     k equal-duration segments   partial-offset
tovar-ppm              peak-probability single     max-machine
ppm-improved           peak-probability single     double-all
default                developer-configured        double-all
=====================  ==========================  ==================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import regression
from .predictor import (
    DEFAULT_PEAK_MARGIN,
    DEFAULT_START_MARGIN,
    AllocationPlan,
    check_training,
    fit_task,
    margined_plan,
    predict_plan,
)
from .regression import LinearModel
from .retry import DEFAULT_MACHINE_MAX, RetryPolicy
from .trace import TaskExecutionTrace, duration

METHOD_NAMES = (
    "ksplus",
    "ks-uniform-selective",
    "ks-uniform-partial",
    "tovar-ppm",
    "ppm-improved",
    "default",
)
SEGMENTED_METHODS = frozenset({"ksplus", "ks-uniform-selective", "ks-uniform-partial"})

METHOD_POLICIES = {
    "ksplus": RetryPolicy.KS_PLUS_RESCALE,
    "ks-uniform-selective": RetryPolicy.SELECTIVE_OFFSET,
    "ks-uniform-partial": RetryPolicy.PARTIAL_OFFSET,
    "tovar-ppm": RetryPolicy.MAX_MACHINE,
    "ppm-improved": RetryPolicy.DOUBLE_ALL,
    "default": RetryPolicy.DOUBLE_ALL,
}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    k: int | None = None
    default_limits: Mapping[str, float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; choose from {', '.join(METHOD_NAMES)}")
        if self.name in SEGMENTED_METHODS:
            if self.k is None or self.k < 1:
                raise ValueError(f"method {self.name!r} needs a segment count k >= 1")
        elif self.k is not None:
            object.__setattr__(self, "k", None)
        if self.name == "default" and self.default_limits is None:
            raise ValueError("method 'default' needs default_limits")

    @property
    def policy(self) -> RetryPolicy:
        return METHOD_POLICIES[self.name]


def fit_ppm(
    peaks: Sequence[float], machine_max: float = DEFAULT_MACHINE_MAX, improved: bool = False
) -> float:
    """First allocation minimizing expected cost under the slow-peaks assumption.

    A first attempt at ``c`` that is too small is charged all of ``c`` and then
    rerun at the retry limit (the machine, or ``2c`` when ``improved``).
    Candidates are the distinct observed peaks; ties go to the smaller one.
    """
    observed = np.asarray(peaks, dtype=np.float64)
    if observed.size == 0:
        raise ValueError("no training peaks")
    best_c, best_cost = None, None
    for c in np.unique(observed):
        retry = min(2 * c, machine_max) if improved else machine_max
        fails = observed > c
        cost = float(np.where(fails, c + retry, c).sum()) / observed.size
        if best_cost is None or cost < best_cost:
            best_c, best_cost = float(c), cost
    return best_c


def plan_default(
    task: str, default_limits: Mapping[str, float], workflow: str | None = None
) -> AllocationPlan:
    """Single step at the developer limit; keys may be ``task`` or ``workflow/task``."""
    if workflow is not None and f"{workflow}/{task}" in default_limits:
        return AllocationPlan.single(float(default_limits[f"{workflow}/{task}"]))
    if task not in default_limits:
        raise ValueError(f"no default memory limit configured for task {task!r}")
    return AllocationPlan.single(float(default_limits[task]))


def window_peaks(trace: TaskExecutionTrace, k: int) -> list[float]:
    """Maximum memory in each of ``k`` equal-duration windows of the execution."""
    total = duration(trace)
    lo = trace.times
    hi = np.append(trace.times[1:], total)
    edges = np.arange(k + 1) * (total / k)
    out = []
    for i in range(k):
        inside = (lo < edges[i + 1]) & (hi > edges[i])
        out.append(float(trace.mem[inside].max()))
    return out


@dataclass(frozen=True)
class UniformKSegmentsModel:
    k: int
    runtime_model: LinearModel
    peak_models: tuple[LinearModel, ...]
    peak_margin: float = DEFAULT_PEAK_MARGIN
    start_margin: float = DEFAULT_START_MARGIN

    def plan(self, input_size: float) -> AllocationPlan:
        runtime = regression.predict(
            self.runtime_model, input_size, floor=0.5 * self.runtime_model.y_min
        )
        peaks = [regression.predict(m, input_size, floor=0.5 * m.y_min) for m in self.peak_models]
        starts = [i * runtime / self.k for i in range(self.k)]
        return margined_plan(peaks, starts, self.peak_margin, self.start_margin, merge_equal=True)


def fit_uniform_ksegments(
    training: Sequence[TaskExecutionTrace],
    k: int,
    peak_margin: float = DEFAULT_PEAK_MARGIN,
    start_margin: float = DEFAULT_START_MARGIN,
) -> UniformKSegmentsModel:
    check_training(training)
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    runtime_model = regression.fit([(t.input_size, duration(t)) for t in training])
    windows = [(t.input_size, window_peaks(t, k)) for t in training]
    peak_models = tuple(regression.fit([(x, w[i]) for x, w in windows]) for i in range(k))
    return UniformKSegmentsModel(k, runtime_model, peak_models, peak_margin, start_margin)


def plan_uniform_ksegments(
    training: Sequence[TaskExecutionTrace],
    k: int,
    input_size: float,
    peak_margin: float = DEFAULT_PEAK_MARGIN,
    start_margin: float = DEFAULT_START_MARGIN,
) -> AllocationPlan:
    return fit_uniform_ksegments(training, k, peak_margin, start_margin).plan(input_size)


@dataclass(frozen=True)
class FittedMethod:
    spec: MethodSpec
    planner: Callable[[float], AllocationPlan]

    @property
    def policy(self) -> RetryPolicy:
        return self.spec.policy

    def plan(self, input_size: float) -> AllocationPlan:
        return self.planner(input_size)


def fit_method(
    spec: MethodSpec,
    training: Sequence[TaskExecutionTrace],
    machine_max: float = DEFAULT_MACHINE_MAX,
    peak_margin: float = DEFAULT_PEAK_MARGIN,
    start_margin: float = DEFAULT_START_MARGIN,
) -> FittedMethod:
    """Fit ``spec`` on ``training``; the result plans from a test execution's input size alone."""
    check_training(training)
    name = spec.name
    if name == "ksplus":
        model = fit_task(training, spec.k, peak_margin, start_margin)
        return FittedMethod(spec, lambda size: predict_plan(model, size))
    if name in ("ks-uniform-selective", "ks-uniform-partial"):
        umodel = fit_uniform_ksegments(training, spec.k, peak_margin, start_margin)
        return FittedMethod(spec, umodel.plan)
    if name in ("tovar-ppm", "ppm-improved"):
        c = fit_ppm([t.peak for t in training], machine_max, improved=(name == "ppm-improved"))
        plan = AllocationPlan.single(min(c, machine_max))
        return FittedMethod(spec, lambda size: plan)
    task, workflow = training[0].task, training[0].workflow
    plan = plan_default(task, spec.default_limits, workflow)
    return FittedMethod(spec, lambda size: plan)
