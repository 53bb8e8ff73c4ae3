import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksplus.predictor import AllocationPlan
from ksplus.retry import RetryPolicy
from ksplus.simulator import replay_once, simulate_with_retries
from ksplus.trace import duration

from conftest import make_trace

GB = 10**9
MAX = 128 * GB


def two_phase_trace():
    return make_trace([int(5.1 * GB)] * 8 + [int(10.7 * GB)] * 2)


def test_replay_success_integrals():
    rec = replay_once(make_trace([5 * GB, 6 * GB, 7 * GB]), AllocationPlan.single(10 * GB))
    assert rec.succeeded
    assert rec.allocated_integral == pytest.approx(30)
    assert rec.used_integral == pytest.approx(18)
    assert rec.wastage == pytest.approx(12)


def test_replay_failure():
    rec = replay_once(make_trace([4 * GB, 6 * GB]), AllocationPlan.single(5 * GB))
    assert rec.t_fail == 1.0
    assert rec.allocated_integral == pytest.approx(5)
    assert rec.used_integral == 0


def test_exact_allocation_survives():
    tr = make_trace([1 * GB, 1 * GB, 3 * GB, 3 * GB])
    rec = replay_once(tr, AllocationPlan(((0, 1 * GB), (2, 3 * GB))))
    assert rec.succeeded
    assert rec.wastage == 0


def test_margined_plan_succeeds_first_time():
    # 1.10 x peaks, 0.85 x the 8 s boundary
    plan = AllocationPlan(((0, 5.61 * GB), (6.8, 11.77 * GB)))
    out = simulate_with_retries(two_phase_trace(), plan, RetryPolicy.KS_PLUS_RESCALE)
    assert out.succeeded and len(out.attempts) == 1
    expected = 6.8 * 5.61 + 3.2 * 11.77 - (8 * 5.1 + 2 * 10.7)
    assert out.total_wastage == pytest.approx(expected)


def test_late_segment_is_rescaled():
    plan = AllocationPlan(((0, 5.61 * GB), (10, 11.77 * GB)))
    out = simulate_with_retries(two_phase_trace(), plan, RetryPolicy.KS_PLUS_RESCALE)
    assert out.succeeded
    assert [a.t_fail for a in out.attempts] == [8.0, None]
    assert out.attempts[1].plan.steps == ((0, 5.61 * GB), (pytest.approx(8.0), 11.77 * GB))
    first = 8 * 5.61
    second = 8 * 5.61 + 2 * 11.77 - (8 * 5.1 + 2 * 10.7)
    assert out.total_wastage == pytest.approx(first + second)


def test_machine_max_plan_that_fails_is_hard_error():
    out = simulate_with_retries(make_trace([200 * GB]), AllocationPlan.single(MAX), "double-all")
    assert not out.succeeded
    assert "exceeds machine memory" in out.reason
    assert out.total_wastage == 0  # killed at t=0, nothing allocated yet


def test_attempt_budget():
    out = simulate_with_retries(make_trace([1, 100 * GB]), AllocationPlan.single(GB), "ksplus-rescale",
                                max_attempts=3)
    assert not out.succeeded and len(out.attempts) == 3
    assert "budget" in out.reason


def test_default_doubling():
    out = simulate_with_retries(make_trace([20 * GB]), AllocationPlan.single(16 * GB), "double-all")
    assert out.attempts[1].plan.steps == ((0, 32 * GB),)
    assert out.succeeded


@st.composite
def scenario(draw):
    period = draw(st.sampled_from([0.5, 1.0, 2.0]))
    mem = draw(st.lists(st.integers(0, 60) .map(lambda g: g * GB // 2), min_size=1, max_size=40))
    n = draw(st.integers(1, 5))
    starts = sorted(set(draw(st.lists(st.floats(0.1, 50), min_size=n - 1, max_size=n - 1))))
    limits = sorted(draw(st.lists(st.integers(1, 40), min_size=len(starts) + 1, max_size=len(starts) + 1)))
    plan = AllocationPlan(tuple(zip([0.0, *starts], [l * GB for l in limits])))
    return make_trace(mem, period=period), plan


@settings(max_examples=200, deadline=None)
@given(scenario(), st.sampled_from(list(RetryPolicy)))
def test_retries_terminate_within_bound(sc, policy):
    trace, plan = sc
    min_limit = min(plan.limits)
    ratio = MAX / min_limit
    bound = len(plan) + math.ceil(math.log2(ratio)) + math.ceil(math.log(ratio, 1.2))
    out = simulate_with_retries(trace, plan, policy, machine_max=MAX, max_attempts=bound)
    assert out.succeeded, out.reason
    assert out.total_wastage >= 0


@given(scenario(), st.sampled_from(list(RetryPolicy)))
def test_single_attempt_when_first_limit_covers_peak(sc, policy):
    trace, plan = sc
    lifted = AllocationPlan(tuple((s, max(l, float(trace.peak))) for s, l in plan.steps))
    out = simulate_with_retries(trace, lifted, policy)
    assert len(out.attempts) == 1 and out.succeeded


@given(scenario())
def test_grid_aligned_integrals_match_closed_form(sc):
    trace, _ = sc
    p = trace.sample_period
    n = len(trace)
    # plan steps on the sample grid
    cut = n // 2
    lo, hi = trace.peak + GB, trace.peak + 3 * GB
    steps = ((0.0, lo),) if cut == 0 else ((0.0, lo), (cut * p, hi))
    rec = replay_once(trace, AllocationPlan(steps))
    alloc = sum((lo if i < cut or cut == 0 else hi) * p for i in range(n)) / GB
    used = sum(int(m) * p for m in trace.mem) / GB
    assert rec.allocated_integral == pytest.approx(alloc, rel=1e-9)
    assert rec.used_integral == pytest.approx(used, rel=1e-9, abs=1e-12)
