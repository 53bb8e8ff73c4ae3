"""Greedy monotone step-function segmentation of a memory series.

A segmentation splits a series ``M`` into contiguous segments with sizes ``S``
(sample counts) and non-decreasing peaks ``P`` such that every sample lies at
or below its segment's peak.  :func:`get_segments` is the production path;
:func:`optimal_segments` is an exhaustive search kept for testing it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Sequence

from .trace import BYTES_PER_GB

#: Longest series :func:`optimal_segments` will enumerate.
MAX_OPTIMAL_LENGTH = 20


@dataclass(frozen=True)
class Segmentation:
    sizes: tuple[int, ...]
    peaks: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if len(self.sizes) != len(self.peaks) or not self.sizes:
            raise ValueError("sizes and peaks must be non-empty and of equal length")
        if any(s < 1 for s in self.sizes):
            raise ValueError("every segment needs at least one sample")
        if any(a > b for a, b in zip(self.peaks, self.peaks[1:])):
            raise ValueError("peaks must be non-decreasing")

    @property
    def k(self) -> int:
        return len(self.sizes)

    def start_indices(self) -> list[int]:
        """Sample index at which each segment begins."""
        return [0, *itertools.accumulate(self.sizes[:-1])]


def get_segments(M: Sequence[float], k: int) -> Segmentation:
    """Segment ``M`` into at most ``k`` monotone steps.

    The first pass opens a new segment whenever a sample exceeds the running
    peak and otherwise extends the current one.  The second pass repeatedly
    merges the segment whose absorption into its successor adds the least
    area, ``(P[i+1] - P[i]) * S[i]``, until ``k`` remain; ties go to the
    earliest segment.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    values = list(M)
    if not values:
        raise ValueError("memory series must be non-empty")

    sizes = [1]
    peaks = [values[0]]
    for m in values[1:]:
        if m <= peaks[-1]:
            sizes[-1] += 1
        else:
            peaks.append(m)
            sizes.append(1)

    if len(peaks) <= k:
        return Segmentation(tuple(sizes), tuple(peaks))
    return _merge_down(sizes, peaks, k)


def _merge_down(sizes: list[int], peaks: list[float], k: int) -> Segmentation:
    # Doubly-linked list over segment slots plus a lazy-deletion heap keyed by
    # (merge error, original index); original order equals current order.
    n = len(peaks)
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    nxt[-1] = -1
    alive = [True] * n
    version = [0] * n

    def error(i: int) -> float:
        return (peaks[nxt[i]] - peaks[i]) * sizes[i]

    heap = [(error(i), i, 0) for i in range(n - 1)]
    heapq.heapify(heap)
    remaining = n
    while remaining > k:
        _, i, ver = heapq.heappop(heap)
        if not alive[i] or ver != version[i] or nxt[i] == -1:
            continue
        j = nxt[i]
        sizes[j] += sizes[i]
        alive[i] = False
        p = prev[i]
        prev[j] = p
        if p != -1:
            nxt[p] = j
            version[p] += 1
            heapq.heappush(heap, (error(p), p, version[p]))
        if nxt[j] != -1:
            version[j] += 1
            heapq.heappush(heap, (error(j), j, version[j]))
        remaining -= 1

    keep = [i for i in range(n) if alive[i]]
    return Segmentation(tuple(sizes[i] for i in keep), tuple(peaks[i] for i in keep))


def excess(M: Sequence[float], seg: Segmentation) -> float:
    """Sum of ``P_i - M_t`` over all samples, in the units of ``M``.

    Exact for integer inputs.  Raises ``ValueError`` if ``seg`` does not cover ``M``.
    """
    values = list(M)
    if sum(seg.sizes) != len(values):
        raise ValueError(f"segment sizes sum to {sum(seg.sizes)}, series has {len(values)} samples")
    total = 0
    pos = 0
    for size, peak in zip(seg.sizes, seg.peaks):
        chunk = values[pos : pos + size]
        if max(chunk) > peak:
            raise ValueError(f"segment starting at sample {pos} does not cover its samples")
        total += peak * size - sum(chunk)
        pos += size
    return total


def wastage_of(M: Sequence[float], seg: Segmentation, sample_period: float) -> float:
    """Modeled over-allocation of ``seg`` on byte series ``M``, in GB·s."""
    return excess(M, seg) * sample_period / BYTES_PER_GB


def optimal_segments(M: Sequence[float], k: int) -> Segmentation:
    """Minimum-wastage monotone segmentation by exhaustive enumeration.

    Peaks are the running maximum of segment maxima.  Ties prefer fewer
    segments, then the lexicographically smallest size vector.  Only for
    series of at most :data:`MAX_OPTIMAL_LENGTH` samples.
    """
    values = list(M)
    n = len(values)
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if n == 0:
        raise ValueError("memory series must be non-empty")
    if n > MAX_OPTIMAL_LENGTH:
        raise ValueError(f"series of length {n} is too long for exhaustive search")

    best_key = None
    best = None
    for n_seg in range(1, min(k, n) + 1):
        for cuts in itertools.combinations(range(1, n), n_seg - 1):
            bounds = (0, *cuts, n)
            sizes = tuple(b - a for a, b in zip(bounds, bounds[1:]))
            peaks = []
            running = None
            for a, b in zip(bounds, bounds[1:]):
                m = max(values[a:b])
                running = m if running is None else max(running, m)
                peaks.append(running)
            cost = sum(p * s for p, s in zip(peaks, sizes)) - sum(values)
            key = (cost, n_seg, sizes)
            if best_key is None or key < best_key:
                best_key = key
                best = (sizes, tuple(peaks))
    return Segmentation(*best)
