"""
Splitting a memory trace into monotone segments
================================================

A memory series is covered by at most ``k`` non-decreasing steps. The
greedy segmentation is compared against the exhaustive optimum on a short
series, then applied to a synthetic two-phase execution.
"""

import numpy as np

from ksplus import BYTES_PER_GB as GB, builtin_archetype, generate, get_segments, optimal_segments, wastage_of
from ksplus.segmentation import excess

# %%
# A small hand-made series. The greedy pass starts a new segment whenever the
# sample rises above the running peak, then merges the cheapest neighbours.
M = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3]
for k in (1, 2, 3):
    greedy = get_segments(M, k)
    best = optimal_segments(M, k)
    print(f"k={k}  greedy {greedy.sizes} @ {greedy.peaks}  excess {excess(M, greedy)}"
          f"   optimum {best.sizes} @ {best.peaks}  excess {excess(M, best)}")

# %%
# The same thing on a generated execution. Wastage is in GB*s.
arch = builtin_archetype("two-phase", noise_rel=0.1)
(ex,) = generate(arch, [4 * GB], seed=3)
mem = ex.mem.tolist()
print(f"\n{len(mem)} samples, peak {ex.peak / GB:.2f} GB")
for k in (1, 2, 4):
    seg = get_segments(mem, k)
    peaks = ", ".join(f"{p / GB:.2f}" for p in seg.peaks)
    print(f"k={k}: sizes {seg.sizes}, peaks [{peaks}] GB, wastage {wastage_of(mem, seg, ex.sample_period):.1f} GB*s")

# %%
# Single-step allocation at the peak, for scale.
print(f"flat at peak: {(ex.peak * len(mem) - np.sum(ex.mem)) * ex.sample_period / GB:.1f} GB*s")
