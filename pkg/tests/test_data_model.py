import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macrocast.data_model import (
    DEFAULT_PERIODS,
    VARIABLES,
    MonthStamp,
    Panel,
    PeriodDefinition,
    Series,
    month_range,
    months_between,
    slice_series,
    summarize,
)
from macrocast.errors import EmptyPeriod, RangeOutOfBounds

from conftest import constant_panel

months = st.builds(MonthStamp, st.integers(1950, 2100), st.integers(1, 12))


def test_parse_accepts_month_and_first_of_month():
    assert MonthStamp.parse("2005-02") == MonthStamp(2005, 2)
    assert MonthStamp.parse("2005-02-01") == MonthStamp(2005, 2)
    assert str(MonthStamp(2005, 2)) == "2005-02"


@pytest.mark.parametrize("text", ["2005-02-15", "2005-13", "05-02", "2005/02", ""])
def test_parse_rejects_other_spellings(text):
    with pytest.raises(ValueError):
        MonthStamp.parse(text)


def test_successor_rolls_year():
    assert MonthStamp(2008, 12).successor() == MonthStamp(2009, 1)
    assert MonthStamp(2008, 6).successor() == MonthStamp(2008, 7)


@given(months, months)
def test_order_matches_calendar(a, b):
    assert (a < b) == ((a.year, a.month) < (b.year, b.month))


@given(months, st.integers(-500, 500))
def test_shift_round_trips(m, k):
    assert m.shift(k).shift(-k) == m
    assert months_between(m, m.shift(k)) == k
    assert MonthStamp.from_ordinal(m.ordinal) == m


def _series(start, values, name="EM.T"):
    stamps = month_range(start, start.shift(len(values) - 1))
    return Series(name, tuple(stamps), np.asarray(values, dtype=float))


def test_slice_full_range_is_identity():
    s = _series(MonthStamp(2005, 2), np.arange(10.0))
    out = slice_series(s, s.start, s.end)
    assert out.stamps == s.stamps
    assert np.array_equal(out.values, s.values)


def test_slice_counts_months():
    s = _series(MonthStamp(2005, 2), np.arange(241.0))
    assert len(s) == 241 and s.end == MonthStamp(2025, 2)
    out = slice_series(s, MonthStamp(2008, 6), MonthStamp(2009, 6))
    assert len(out) == 13
    assert out.is_consecutive()


def test_slice_outside_range_raises():
    s = _series(MonthStamp(2005, 2), np.arange(12.0))
    with pytest.raises(RangeOutOfBounds):
        slice_series(s, MonthStamp(2007, 1), MonthStamp(2007, 3))
    with pytest.raises(RangeOutOfBounds):
        slice_series(s, MonthStamp(2005, 6), MonthStamp(2005, 3))


def test_panel_length_and_validation():
    p = constant_panel(n=30)
    assert len(p) == months_between(p.start, p.end) + 1 == 30
    data = {v: p.column(v).copy() for v in VARIABLES}
    data["IN.F"][4] = np.nan
    with pytest.raises(ValueError):
        Panel(p.start, p.end, data)
    data = {v: p.column(v)[:-1] for v in VARIABLES}
    with pytest.raises(ValueError):
        Panel(p.start, p.end, data)


def test_default_periods_are_contiguous():
    assert [p.label for p in DEFAULT_PERIODS] == ["P1", "P2", "P3", "P4", "P5"]
    assert DEFAULT_PERIODS[0].start == MonthStamp(2008, 6)
    assert DEFAULT_PERIODS[-1].end == MonthStamp(2025, 1)
    for a, b in zip(DEFAULT_PERIODS, DEFAULT_PERIODS[1:]):
        assert a.end.successor() == b.start


def test_summarize_hand_example():
    p = constant_panel(MonthStamp(2008, 6), n=3, fill=lambda name, j, n: np.array([1.0, 2.0, 3.0]))
    period = PeriodDefinition("P1", MonthStamp(2008, 6), MonthStamp(2008, 8))
    (row,) = summarize(p, [period], ["EM.T"])
    assert (row.min, row.max, row.mean, row.sd, row.n) == (1.0, 3.0, 2.0, 1.0, 3)


def test_summarize_constant_series():
    p = constant_panel(n=40, fill=lambda name, j, n: np.full(n, 17.25))
    for row in summarize(p, [PeriodDefinition("P1", MonthStamp(2005, 3), MonthStamp(2006, 9))]):
        assert row.min == row.max == row.mean == 17.25
        assert row.sd == 0.0


def test_summarize_single_month_period():
    p = constant_panel(n=12)
    (row,) = summarize(p, [PeriodDefinition("P1", MonthStamp(2005, 4), MonthStamp(2005, 4))], ["BA.T"])
    assert row.sd == 0.0 and row.min == row.max == row.mean == p.column("BA.T")[3]


def test_summarize_period_outside_panel():
    p = constant_panel(n=12)
    with pytest.raises(EmptyPeriod):
        summarize(p, [PeriodDefinition("P1", MonthStamp(2010, 1), MonthStamp(2010, 6))])


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=1, max_size=30))
def test_summary_bounds(values):
    n = len(values)
    p = constant_panel(n=n, fill=lambda name, j, k: np.asarray(values))
    period = PeriodDefinition("P1", p.start, p.end)
    for row in summarize(p, [period], ["EM.T"]):
        assert row.min <= row.mean <= row.max
        assert row.sd >= 0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30),
    st.floats(0.01, 100),
    st.floats(-1e4, 1e4),
)
def test_summary_affine_equivariance(values, a, b):
    x = np.asarray(values)
    base = constant_panel(n=len(x), fill=lambda name, j, k: x)
    moved = constant_panel(n=len(x), fill=lambda name, j, k: a * x + b)
    period = PeriodDefinition("P1", base.start, base.end)
    (r0,) = summarize(base, [period], ["EM.T"])
    (r1,) = summarize(moved, [period], ["EM.T"])
    scale = max(1.0, abs(a * r0.mean) + abs(b))
    assert math.isclose(r1.mean, a * r0.mean + b, rel_tol=1e-9, abs_tol=1e-9 * scale)
    assert math.isclose(r1.sd, a * r0.sd, rel_tol=1e-9, abs_tol=1e-9 * scale)
