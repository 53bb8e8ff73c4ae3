"""
Predicting a step allocation and recovering from failures
=========================================================

Fit per-segment regressions on training executions, predict a plan for an
unseen input size and replay it against the real trace under each retry
policy.
"""

from ksplus import BYTES_PER_GB as GB, RetryPolicy, builtin_archetype, draw_input_sizes, fit_task, generate, predict_plan
from ksplus.simulator import simulate_with_retries

arch = builtin_archetype("four-stage", noise_rel=0.1)
traces = list(generate(arch, draw_input_sizes(40, seed=11), seed=11))
train, test = traces[:30], traces[30:]

model = fit_task(train, k=3)
for i, (p, s) in enumerate(zip(model.peak_models, model.start_models)):
    print(f"segment {i}: peak = {p.slope:.3f}*x + {p.intercept / GB:.2f} GB,"
          f" start = {s.slope * GB:.2f} s/GB*x + {s.intercept:.1f} s")

# %%
ex = test[0]
plan = predict_plan(model, ex.input_size)
print(f"\ninput {ex.input_size / GB:.2f} GB, real peak {ex.peak / GB:.2f} GB")
for t, limit in plan.steps:
    print(f"  from {t:7.1f} s  limit {limit / GB:6.2f} GB")

# %%
# Every policy, on every test execution. Margins are switched off here to
# force some failures and make the policies differ.
tight = fit_task(train, k=3, peak_margin=0.0, start_margin=0.0)
print(f"\n{'policy':18} {'wastage GB*s':>14} {'failures':>9}")
for policy in RetryPolicy:
    outcomes = [simulate_with_retries(e, predict_plan(tight, e.input_size), policy) for e in test]
    print(f"{policy.value:18} {sum(o.total_wastage for o in outcomes):14.1f} "
          f"{sum(o.failures for o in outcomes):9d}")
