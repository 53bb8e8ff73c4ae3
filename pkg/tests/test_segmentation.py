import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksplus.segmentation import (
    Segmentation,
    excess,
    get_segments,
    optimal_segments,
    wastage_of,
)

GB = 10**9


def check_feasible(M, seg, k):
    assert seg.k <= k
    assert sum(seg.sizes) == len(M)
    assert all(s >= 1 for s in seg.sizes)
    assert all(a <= b for a, b in zip(seg.peaks, seg.peaks[1:]))
    pos = 0
    for size, peak in zip(seg.sizes, seg.peaks):
        assert max(M[pos : pos + size]) <= peak
        pos += size


def naive_greedy(M, k):
    """Literal list-based pass 2, kept independent of the heap implementation."""
    S, P = [1], [M[0]]
    for m in M[1:]:
        if m <= P[-1]:
            S[-1] += 1
        else:
            S.append(1)
            P.append(m)
    while len(P) > k:
        e = [(P[i + 1] - P[i]) * S[i] for i in range(len(P) - 1)]
        idx = e.index(min(e))
        S[idx + 1] += S[idx]
        del S[idx], P[idx]
    return S, P


def test_constant_series():
    assert get_segments([5, 5, 5], 1) == Segmentation((3,), (5,))


def test_hand_traced_ramp():
    # pass 1: four unit segments; e=[1,1,1] -> merge 0; e=[2,1] -> merge 1
    assert get_segments([1, 2, 3, 4], 2) == Segmentation((2, 2), (2, 4))


def test_two_plateaus():
    M = [int(5.1 * GB)] * 8 + [int(10.7 * GB)] * 2
    assert get_segments(M, 2) == Segmentation((8, 2), (int(5.1 * GB), int(10.7 * GB)))


def test_drops_fold_into_preceding_segment():
    assert get_segments([3, 1, 2, 5, 4], 5) == Segmentation((3, 2), (3, 5))


@pytest.mark.parametrize("M, k", [([], 1), ([1], 0)])
def test_bad_input(M, k):
    with pytest.raises(ValueError):
        get_segments(M, k)


def test_wastage_examples():
    seg = Segmentation((2, 2), (2 * GB, 4 * GB))
    assert wastage_of([1 * GB, 2 * GB, 3 * GB, 4 * GB], seg, 1.0) == 2.0
    assert wastage_of([5 * GB] * 3, Segmentation((3,), (5 * GB,)), 2.0) == 0.0
    M = [1, 4, 9, 10]
    assert wastage_of(M, get_segments(M, len(M)), 1.0) == 0.0


def test_wastage_rejects_uncovered():
    with pytest.raises(ValueError, match="cover"):
        wastage_of([1, 5], Segmentation((2,), (4,)), 1.0)


def brute_force_costs(M, k):
    """Every cut into <= k segments with running-max peaks -> cost."""
    n = len(M)
    out = {}
    for j in range(1, min(k, n) + 1):
        for cuts in itertools.combinations(range(1, n), j - 1):
            b = (0, *cuts, n)
            peaks, run = [], 0
            for a, c in zip(b, b[1:]):
                run = max(run, max(M[a:c]))
                peaks.append(run)
            sizes = tuple(c - a for a, c in zip(b, b[1:]))
            out[sizes] = sum(p * s for p, s in zip(peaks, sizes)) - sum(M)
    return out


def test_optimal_ramp():
    # [2,2] -> 2; [1,3] -> 3; [3,1] -> 3; [4] -> 6
    assert brute_force_costs([1, 2, 3, 4], 2) == {(4,): 6, (1, 3): 3, (2, 2): 2, (3, 1): 3}
    seg = optimal_segments([1, 2, 3, 4], 2)
    assert seg == Segmentation((2, 2), (2, 4))
    assert excess([1, 2, 3, 4], seg) == 2


def test_optimal_small_cases():
    assert optimal_segments([5, 3], 1) == Segmentation((2,), (5,))
    assert optimal_segments([5, 5, 5], 3) == Segmentation((3,), (5,))


def test_optimal_refuses_long_input():
    with pytest.raises(ValueError, match="too long"):
        optimal_segments(list(range(21)), 2)


values = st.integers(1, 10**11)


@settings(max_examples=300, deadline=None)
@given(st.lists(values, min_size=1, max_size=120), st.integers(1, 10))
def test_greedy_feasible_and_matches_naive(M, k):
    seg = get_segments(M, k)
    check_feasible(M, seg, k)
    assert (list(seg.sizes), list(seg.peaks)) == naive_greedy(M, k)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=10), st.integers(1, 4))
def test_optimal_is_lower_bound(M, k):
    costs = brute_force_costs(M, k)
    opt = optimal_segments(M, k)
    assert excess(M, opt) == min(costs.values())
    assert excess(M, get_segments(M, k)) >= excess(M, opt)


@given(st.lists(st.tuples(values, st.integers(1, 8)), min_size=1, max_size=8, unique_by=lambda p: p[0]),
       st.integers(0, 3))
def test_exact_recovery_of_step_functions(plateaus, extra):
    plateaus = sorted(plateaus)
    M = [v for v, n in plateaus for _ in range(n)]
    seg = get_segments(M, len(plateaus) + extra)
    assert seg.sizes == tuple(n for _, n in plateaus)
    assert excess(M, seg) == 0


@given(st.lists(values, min_size=1, max_size=60))
def test_pass_two_idle_when_k_large(M):
    full = get_segments(M, len(M))
    assert get_segments(M, full.k) == full
    assert get_segments(M, full.k + 5) == full
