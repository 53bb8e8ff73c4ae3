import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ksplus.regression import LinearModel, fit, predict


@pytest.mark.parametrize(
    "points, slope, intercept",
    [
        ([(1, 10), (2, 20), (3, 30)], 10.0, 0.0),
        ([(5, 7)], 0.0, 7.0),
        ([(2, 4), (2, 8)], 0.0, 6.0),
    ],
)
def test_fit_examples(points, slope, intercept):
    m = fit(points)
    assert m.slope == pytest.approx(slope, abs=1e-12)
    assert m.intercept == pytest.approx(intercept, abs=1e-9)
    assert m.n_train == len(points)


def test_fit_empty_is_error():
    with pytest.raises(ValueError):
        fit([])


@pytest.mark.parametrize(
    "slope, intercept, x, expected",
    [(10, 0, 4, 40), (-1, 2, 10, 0), (0, 6, 999, 6)],
)
def test_predict_examples(slope, intercept, x, expected):
    assert predict(LinearModel(slope, intercept, 2), x, floor=0) == expected


def test_model_rejects_nonfinite():
    with pytest.raises(ValueError):
        LinearModel(math.nan, 0.0, 1)


points = st.lists(
    st.tuples(st.integers(0, 10**11), st.floats(-1e12, 1e12, allow_nan=False)), min_size=2, max_size=40
).filter(lambda ps: len({x for x, _ in ps}) > 1)


@given(points)
def test_residuals_orthogonal_to_x(ps):
    m = fit(ps)
    resid = [(y - m(x), x) for x, y in ps]
    dot = sum(r * x for r, x in resid)
    ymax = max(abs(y) for _, y in ps) + 1.0
    assert abs(dot) <= 1e-6 * ymax * sum(x for x, _ in ps)
    assert abs(sum(r for r, _ in resid)) <= 1e-6 * ymax * len(ps)


@given(points, st.integers(0, 10**12), st.floats(0, 1e12))
def test_predict_never_below_floor(ps, x, floor):
    assert predict(fit(ps), x, floor) >= floor
