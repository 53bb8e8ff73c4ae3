"""
Comparing allocation methods across seeds
=========================================

Runs the experiment harness on a synthetic workflow and prints the same
markdown report that ``ksplus run-experiment`` writes to ``summary.md``.
"""

import tempfile
from pathlib import Path

from ksplus import builtin_archetype, draw_input_sizes, generate
from ksplus.harness import ExperimentConfig, run_experiment, write_outputs
from ksplus.trace import TraceSet

# two tasks from the same workflow
traces = []
for name, seed in (("two-phase", 1), ("ramp", 2)):
    traces += generate(builtin_archetype(name), draw_input_sizes(60, seed=seed), seed=seed)
traces = TraceSet(tuple(traces))

config = ExperimentConfig(
    methods=["ksplus", "ks-uniform-selective", "ks-uniform-partial", "tovar-ppm", "ppm-improved"],
    k_values=[2, 4],
    train_fractions=[0.5],
    seeds=range(5),
)
rows = run_experiment(config, traces)

# %%
out = Path(tempfile.mkdtemp())
paths = write_outputs(rows, out)
print(paths["markdown"].read_text())
