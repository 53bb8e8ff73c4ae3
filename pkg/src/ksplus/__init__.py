"""Predict workflow task memory usage over time with monotone variable-size segments.

The pieces, bottom up:

- :mod:`ksplus.trace` -- execution traces and JSON-Lines I/O
- :mod:`ksplus.synth` -- synthetic phase-structured traces
- :mod:`ksplus.segmentation` -- greedy monotone step-function segmentation
- :mod:`ksplus.regression` -- least-squares lines on input size
- :mod:`ksplus.predictor` -- per-task model and allocation plans
- :mod:`ksplus.retry` -- plan adjustments after an OOM kill
- :mod:`ksplus.baselines` -- comparison methods
- :mod:`ksplus.simulator` -- trace replay and GB·s wastage
- :mod:`ksplus.harness` -- seeded experiments and reports
"""

from .baselines import MethodSpec, fit_method, fit_ppm, plan_default, plan_uniform_ksegments
from .harness import ExperimentConfig, ResultRow, aggregate, run_experiment, write_outputs
from .predictor import AllocationPlan, FittedTaskModel, fit_task, predict_plan
from .regression import LinearModel
from .retry import FailureEvent, MachineMemoryExceeded, RetryPolicy, adjust_plan
from .segmentation import Segmentation, get_segments, optimal_segments, wastage_of
from .simulator import AttemptRecord, SimulationOutcome, replay_once, simulate_with_retries
from .synth import PhaseSpec, TaskArchetype, builtin_archetype, draw_input_sizes, generate
from .trace import (
    BYTES_PER_GB,
    MemorySample,
    TaskExecutionTrace,
    TraceError,
    TraceSet,
    duration,
    load_traces,
    write_traces,
)

__version__ = "0.1.0"
