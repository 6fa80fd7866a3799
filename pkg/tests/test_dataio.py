import csv
import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitmodel import (EpisodeSchedule, ExposureSet, FitConfig, HitParams, TimeSeries,
                      fit_full_run, simulate)
from hitmodel.dataio import (MissingPolicy, align, export_episode_params, export_fit_curve,
                             read_counts, read_exposures, read_schedule, schedule_to_impulses,
                             with_impulse_channel, write_counts, write_exposures,
                             write_schedule)
from hitmodel.errors import (DuplicateChannelDate, MissingData, NegativeCount, NoOverlap,
                             NonMonotonicDates, ParseError, ScheduleOutOfRange)
from hitmodel.estimator import FitResult, Window

from conftest import T0, daily_grid, pulses, single_channel


def day(k):
    return (T0 + dt.timedelta(days=k)).isoformat()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def gappy(tmp_path):
    return write(tmp_path, "counts.csv", f"date,count\n{day(0)},3\n{day(2)},5\n")


def test_consecutive_days(tmp_path):
    s = read_counts(write(tmp_path, "c.csv", f"date,count\n{day(0)},3\n{day(1)},5\n"))
    assert s.grid.n_points == 2 and s.grid.t0 == T0
    assert s.values.tolist() == [3.0, 5.0]


@pytest.mark.parametrize("policy, expected", [
    (MissingPolicy.ZERO, [3.0, 0.0, 5.0]),
    (MissingPolicy.LINEAR_INTERPOLATE, [3.0, 4.0, 5.0]),
    ("zero", [3.0, 0.0, 5.0]),
])
def test_missing_day_policies(gappy, policy, expected):
    assert read_counts(gappy, policy).values.tolist() == expected


def test_missing_day_is_an_error_by_default(gappy):
    with pytest.raises(MissingData, match=day(1)):
        read_counts(gappy)


@pytest.mark.parametrize("body, error, line", [
    (f"{day(0)},3\n{day(1)},x\n", ParseError, 3),
    (f"{day(0)},3\n2016-13-01,4\n", ParseError, 3),
    (f"{day(0)},3,4\n", ParseError, 2),
    (f"{day(1)},3\n{day(0)},4\n", NonMonotonicDates, 3),
    (f"{day(0)},3\n{day(0)},4\n", NonMonotonicDates, 3),
    (f"{day(0)},3\n{day(1)},-1\n", NegativeCount, 3),
    (f"{day(0)},3\n{day(1)},nan\n", ParseError, 3),
])
def test_bad_counts_report_the_line(tmp_path, body, error, line):
    with pytest.raises(error) as info:
        read_counts(write(tmp_path, "c.csv", "date,count\n" + body))
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_bad_header_and_empty(tmp_path):
    with pytest.raises(ParseError):
        read_counts(write(tmp_path, "a.csv", "day,count\n"))
    with pytest.raises(ParseError):
        read_counts(write(tmp_path, "b.csv", "date,count\n"))
    with pytest.raises(ParseError):
        read_counts(write(tmp_path, "c.csv", f"date,count\n{day(0)},1\n"))


def test_weekly_step(tmp_path):
    path = write(tmp_path, "c.csv", f"date,count\n{day(0)},1\n{day(7)},2\n{day(14)},3\n")
    s = read_counts(path, step_days=7)
    assert s.grid.dt == 7.0 and s.values.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ParseError):
        read_counts(write(tmp_path, "d.csv", f"date,count\n{day(0)},1\n{day(8)},2\n"),
                    step_days=7)


def test_two_channels(tmp_path):
    rows = "".join(f"{day(k)},tv,{k}\n{day(k)},news,{10 + k}\n" for k in range(3))
    ex = read_exposures(write(tmp_path, "e.csv", "date,channel,value\n" + rows))
    assert ex.names == ["tv", "news"]
    assert ex.grid == daily_grid(3)
    assert ex["news"].values.tolist() == [10.0, 11.0, 12.0]


def test_channel_on_one_day_only(tmp_path):
    rows = f"{day(0)},tv,1\n{day(1)},tv,1\n{day(2)},news,4\n{day(2)},tv,1\n"
    ex = read_exposures(write(tmp_path, "e.csv", "date,channel,value\n" + rows), "zero")
    assert ex["news"].values.tolist() == [0.0, 0.0, 4.0]
    assert ex["tv"].values.tolist() == [1.0, 1.0, 1.0]


def test_duplicate_channel_date(tmp_path):
    rows = f"{day(0)},tv,1\n{day(0)},tv,2\n"
    with pytest.raises(DuplicateChannelDate) as info:
        read_exposures(write(tmp_path, "e.csv", "date,channel,value\n" + rows))
    assert info.value.line == 3


def test_schedule_file(tmp_path):
    path = write(tmp_path, "s.csv", f"episode,date\n1,{day(0)}\n2,{day(7)}\n")
    sched = read_schedule(path)
    assert sched.labels == ["1", "2"]
    out = write_schedule(sched, tmp_path / "s2.csv")
    assert read_schedule(out) == sched


def test_impulses():
    grid = daily_grid(8)
    sched = EpisodeSchedule.from_dates([grid.date_at(0), grid.date_at(7)])
    assert schedule_to_impulses(sched, grid).values.tolist() == [1, 0, 0, 0, 0, 0, 0, 1]
    assert not schedule_to_impulses(sched, grid, 0.0).values.any()
    with pytest.raises(ScheduleOutOfRange):
        schedule_to_impulses(EpisodeSchedule.from_dates([grid.date_at(9)]), grid)
    ex = with_impulse_channel(ExposureSet.empty(grid), sched, "tv", 2.5)
    assert ex.names == ["tv"] and ex["tv"].values[7] == 2.5


def test_align_examples():
    obs = TimeSeries(daily_grid(10), np.arange(10.0))
    ex = single_channel(np.arange(10.0))
    a, b = align(obs, ex)
    assert a == obs and b == ex

    late = single_channel(np.arange(10.0) + 100, t0=T0 + dt.timedelta(days=5))
    a, b = align(obs, late)
    assert a.grid.t0 == b.grid.t0 == T0 + dt.timedelta(days=5)
    assert a.values.tolist() == [5, 6, 7, 8, 9]
    assert b["tv"].values.tolist() == [100, 101, 102, 103, 104]
    assert align(*align(obs, late)) == (a, b)

    with pytest.raises(NoOverlap):
        align(obs, single_channel(np.ones(5), t0=T0 + dt.timedelta(days=20)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.integers(2, 30), st.integers(-40, 40), st.integers(2, 30))
def test_align_is_idempotent(o0, on, e0, en):
    obs = TimeSeries(daily_grid(on, T0 + dt.timedelta(days=o0)), np.arange(float(on)))
    ex = single_channel(np.arange(float(en)), t0=T0 + dt.timedelta(days=o0 + e0))
    try:
        once = align(obs, ex)
    except NoOverlap:
        return
    assert align(*once) == once
    assert once[0].grid == once[1].grid


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(0, 40), st.floats(0, 1e6, allow_nan=False), min_size=2))
def test_interpolation_stays_between_neighbours(tmp_path_factory, known):
    days = sorted(known)
    path = tmp_path_factory.mktemp("fill") / "c.csv"
    path.write_text("date,count\n" + "".join(f"{day(d)},{known[d]!r}\n" for d in days))
    values = read_counts(path, MissingPolicy.LINEAR_INTERPOLATE).values
    for left, right in zip(days, days[1:]):
        lo, hi = sorted((known[left], known[right]))
        seg = values[left - days[0]:right - days[0] + 1]
        assert np.all(seg >= lo) and np.all(seg <= hi)
        assert seg[0] == known[left] and seg[-1] == known[right]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e9, allow_nan=False, allow_subnormal=True), min_size=2, max_size=60))
def test_counts_round_trip(tmp_path_factory, values):
    series = TimeSeries(daily_grid(len(values)), values)
    path = write_counts(series, tmp_path_factory.mktemp("rt") / "c.csv")
    back = read_counts(path, MissingPolicy.ERROR)
    assert back.grid == series.grid
    assert back.values.tobytes() == series.values.tobytes()


def test_exposures_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ex = ExposureSet.from_arrays(daily_grid(15), {"tv": pulses(15, 7), "news": rng.random(15)})
    back = read_exposures(write_exposures(ex, tmp_path / "e.csv"))
    assert back == ex


def fitted():
    ex = single_channel(pulses(20, 7))
    p = HitParams([2.0], -0.2, 0.001, 3.0)
    obs = simulate(p, ex)
    return obs, ex, fit_full_run(obs, ex, FitConfig(n_starts=8, n_refine=2))


def test_export_fit_curve(tmp_path):
    obs, ex, res = fitted()
    path = export_fit_curve(res, obs, ex, tmp_path / "curve.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["date", "observed", "model", "tv"]
    assert len(rows) == 21
    assert rows[1][0] == day(0)
    assert float(rows[8][1]) == obs.values[7] and float(rows[8][3]) == 1.0
    model = simulate(res.params, ex).values
    assert [float(r[2]) for r in rows[1:]] == model.tolist()


def test_export_curve_for_several_windows(tmp_path):
    obs, ex, res = fitted()
    parts = [FitResult(Window(str(i), a, b), res.params, 0.0, 0.0, None, 0, True, ())
             for i, (a, b) in enumerate([(0, 7), (7, 20)])]
    path = export_fit_curve(parts, obs, ex, tmp_path / "curve.csv")
    rows = list(csv.reader(open(path, newline="")))
    assert len(rows) == 21
    # the second window restarts from its own I0
    assert float(rows[8][2]) == res.params.I0


def test_export_episode_params(tmp_path):
    _, _, res = fitted()
    blank = FitResult(Window("2", 0, 5), res.params, 0.0, 0.0, None, 1, True, ())
    path = export_episode_params([res, blank], tmp_path / "ep.csv", ["tv"])
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0] == ["episode_label", "c_tv", "D", "P", "I0", "sse", "rmse", "r_squared"]
    assert rows[1][0] == "full"
    assert float(rows[1][1]) == res.params.c[0]
    assert float(rows[1][3]) == res.params.P
    assert rows[2][-1] == ""
