"""Deterministic synthetic traces built from phase-structured task archetypes.

Each phase has a duration and a memory level that are affine in input size,
perturbed per (execution, phase) by a multiplicative factor drawn uniformly
from ``[1 - noise_rel, 1 + noise_rel]``.  Memory is constant within a phase,
so every execution is a clean step function.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .trace import BYTES_PER_GB, TaskExecutionTrace, TraceSet

GB = BYTES_PER_GB


@dataclass(frozen=True)
class PhaseSpec:
    duration_slope: float  # seconds per input byte
    duration_intercept: float  # seconds
    mem_slope: float  # bytes per input byte
    mem_intercept: float  # bytes
    noise_rel: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.noise_rel < 1:
            raise ValueError(f"noise_rel must be in [0, 1), got {self.noise_rel}")


@dataclass(frozen=True)
class TaskArchetype:
    name: str
    phases: tuple[PhaseSpec, ...]
    sample_period: float = 1.0
    workflow: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("an archetype needs at least one phase")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")

    def with_noise(self, noise_rel: float) -> "TaskArchetype":
        return replace(self, phases=tuple(replace(p, noise_rel=noise_rel) for p in self.phases))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "workflow": self.workflow,
            "sample_period": self.sample_period,
            "phases": [asdict(p) for p in self.phases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskArchetype":
        phases = tuple(PhaseSpec(**p) for p in d["phases"])
        return cls(
            name=str(d["name"]),
            phases=phases,
            sample_period=float(d.get("sample_period", 1.0)),
            workflow=str(d.get("workflow", "synthetic")),
        )


def load_archetype(path: str | Path) -> TaskArchetype:
    with Path(path).open(encoding="utf-8") as fh:
        return TaskArchetype.from_dict(json.load(fh))


def _flat(noise: float) -> TaskArchetype:
    return TaskArchetype("flat", (PhaseSpec(5e-9, 10.0, 0.5, 1 * GB, noise),))


def _two_phase(noise: float) -> TaskArchetype:
    # At 1 GB input: 5.1 GB for 8 s, then 10.7 GB for 2 s.
    return TaskArchetype(
        "two-phase",
        (
            PhaseSpec(8e-9, 0.0, 0.6, 4.5 * GB, noise),
            PhaseSpec(2e-9, 0.0, 1.2, 9.5 * GB, noise),
        ),
    )


def _ramp(noise: float) -> TaskArchetype:
    phases = tuple(
        PhaseSpec(1.25e-9, 2.0, 0.2 + 0.1 * p, (1 + 0.5 * p) * GB, noise) for p in range(8)
    )
    return TaskArchetype("ramp", phases)


def _four_stage(noise: float) -> TaskArchetype:
    # load, index, align (drops back down), merge
    return TaskArchetype(
        "four-stage",
        (
            PhaseSpec(2e-9, 5.0, 0.3, 1 * GB, noise),
            PhaseSpec(3e-9, 0.0, 1.4, 3 * GB, noise),
            PhaseSpec(6e-9, 10.0, 0.8, 2 * GB, noise),
            PhaseSpec(1.5e-9, 5.0, 1.6, 5 * GB, noise),
        ),
    )


_BUILTINS = {
    "flat": _flat,
    "two-phase": _two_phase,
    "ramp": _ramp,
    "four-stage": _four_stage,
}

ARCHETYPE_NAMES = tuple(_BUILTINS)


def builtin_archetype(name: str, noise_rel: float = 0.1) -> TaskArchetype:
    try:
        return _BUILTINS[name](noise_rel)
    except KeyError:
        raise ValueError(
            f"unknown archetype {name!r}; choose from {', '.join(ARCHETYPE_NAMES)}"
        ) from None


def draw_input_sizes(
    n: int, seed: int, low: float = 1 * GB, high: float = 10 * GB
) -> list[int]:
    """``n`` input sizes uniform on ``[low, high]`` bytes."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return [int(v) for v in rng.integers(int(low), int(high), endpoint=True, size=n)]


def _factor(rng: np.random.Generator, noise: float) -> float:
    return 1.0 if noise == 0 else float(rng.uniform(1 - noise, 1 + noise))


def generate_one(
    archetype: TaskArchetype, input_size: int, seed: int, index: int
) -> TaskExecutionTrace:
    period = archetype.sample_period
    bounds = [0]
    levels = []
    end = 0.0
    for j, phase in enumerate(archetype.phases):
        rng = np.random.default_rng([seed, index, j])
        base_dur = phase.duration_slope * input_size + phase.duration_intercept
        base_mem = phase.mem_slope * input_size + phase.mem_intercept
        if not base_dur > 0:
            raise ValueError(
                f"archetype {archetype.name!r} phase {j} has non-positive duration "
                f"{base_dur} s at input size {input_size}"
            )
        if base_mem < 0:
            raise ValueError(
                f"archetype {archetype.name!r} phase {j} has negative memory at input size {input_size}"
            )
        end += base_dur * _factor(rng, phase.noise_rel)
        levels.append(int(round(base_mem * _factor(rng, phase.noise_rel))))
        bounds.append(max(bounds[-1] + 1, int(round(end / period))))
    mem = np.repeat(np.array(levels, dtype=np.int64), np.diff(bounds))
    times = np.arange(bounds[-1], dtype=np.float64) * period
    return TaskExecutionTrace(
        workflow=archetype.workflow,
        task=archetype.name,
        execution_id=f"{archetype.name}-{index:04d}",
        input_size=int(input_size),
        times=times,
        mem=mem,
        sample_period=period,
    )


def generate(archetype: TaskArchetype, input_sizes: Sequence[int], seed: int) -> TraceSet:
    """One execution per input size; identical output for identical arguments."""
    if len(input_sizes) == 0:
        raise ValueError("input_sizes must be non-empty")
    return TraceSet(
        tuple(generate_one(archetype, size, seed, i) for i, size in enumerate(input_sizes))
    )
