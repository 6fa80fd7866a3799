"""Reading and writing the plain-text tables the tools exchange.

All files are UTF-8 CSV with a single header line and ISO dates::

    counts     date,count
    exposures  date,channel,value       (long format)
    schedule   episode,date

Exports render reals with 17 significant digits so they read back exactly.
"""
from __future__ import annotations

import csv
import datetime as _dt
import enum
import math
from pathlib import Path

import numpy as np

from .errors import (DuplicateChannelDate, MissingData, NegativeCount, NoOverlap,
                     NonMonotonicDates, ParseError, ScheduleOutOfRange)
from .estimator import FitResult
from .model import ExposureSet, SimOptions, TimeGrid, TimeSeries, integrate
from .schedule import EpisodeSchedule

COUNTS_HEADER = ["date", "count"]
EXPOSURES_HEADER = ["date", "channel", "value"]
SCHEDULE_HEADER = ["episode", "date"]


class MissingPolicy(str, enum.Enum):
    ZERO = "zero"
    LINEAR_INTERPOLATE = "linear"
    ERROR = "error"


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _rows(path, header):
    """Yield ``(line_number, fields)`` for data rows after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise ParseError(f"expected header {','.join(header)!r}, got {first!r}", line=1)
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}",
                                 line=reader.line_num)
            yield reader.line_num, [f.strip() for f in fields]


def _parse_date(text, line):
    try:
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad date {text!r} (want YYYY-MM-DD)", line=line) from None


def _parse_value(text, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"bad number {text!r}", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", line=line)
    if value < 0:
        raise NegativeCount(f"negative value {text}", line=line)
    return value


def _grid_for(dates, step_days):
    t0, t1 = min(dates), max(dates)
    span = (t1 - t0).days
    if span % step_days:
        raise ParseError(f"date range {t0}..{t1} is not a whole number of {step_days}-day steps")
    if span == 0:
        raise ParseError("a series needs at least two grid points")
    return TimeGrid(t0, span // step_days, float(step_days))


def _fill(grid, known: dict, policy: MissingPolicy, what: str) -> np.ndarray:
    """Values on every grid point from ``{index: value}``, filling gaps by policy."""
    values = np.zeros(grid.n_points)
    idx = np.array(sorted(known), dtype=int)
    vals = np.array([known[i] for i in idx], dtype=float)
    missing = np.setdiff1d(np.arange(grid.n_points), idx)
    if missing.size and policy is MissingPolicy.ERROR:
        dates = ", ".join(str(grid.date_at(int(k))) for k in missing[:5])
        more = "" if missing.size <= 5 else f" (+{missing.size - 5} more)"
        raise MissingData(f"{what}: no value for {dates}{more}")
    if policy is MissingPolicy.LINEAR_INTERPOLATE:
        # np.interp holds the end values constant outside the observed span
        values[:] = np.interp(np.arange(grid.n_points), idx, vals)
    values[idx] = vals
    return values


def _index(grid, date, line):
    k = grid.index_of(date)
    if k is None:
        raise ParseError(f"date {date} is off the {grid.dt:g}-day grid starting {grid.t0}",
                         line=line)
    return k


def read_counts(path, policy: MissingPolicy = MissingPolicy.ERROR,
                step_days: int = 1) -> TimeSeries:
    """Observed counts on a grid spanning the first to last date in the file."""
    policy = MissingPolicy(policy)
    rows = []
    last = None
    for line, (d, v) in _rows(path, COUNTS_HEADER):
        date = _parse_date(d, line)
        if last is not None and date <= last:
            raise NonMonotonicDates(f"date {date} does not follow {last}", line=line)
        rows.append((line, date, _parse_value(v, line)))
        last = date
    if not rows:
        raise ParseError(f"{path}: no data rows")
    grid = _grid_for([date for _, date, _ in rows], step_days)
    known = {_index(grid, date, line): value for line, date, value in rows}
    return TimeSeries(grid, _fill(grid, known, policy, "counts"))


def read_exposures(path, policy: MissingPolicy = MissingPolicy.ERROR,
                   step_days: int = 1) -> ExposureSet:
    """Long-format exposure rows grouped into channels on their union grid.

    Channels keep the order of their first appearance.
    """
    policy = MissingPolicy(policy)
    rows = []
    seen = set()
    last = None
    for line, (d, name, v) in _rows(path, EXPOSURES_HEADER):
        date = _parse_date(d, line)
        if last is not None and date < last:
            raise NonMonotonicDates(f"date {date} appears after {last}", line=line)
        if not name:
            raise ParseError("empty channel name", line=line)
        if (date, name) in seen:
            raise DuplicateChannelDate(f"second value for channel {name!r} on {date}", line=line)
        seen.add((date, name))
        rows.append((line, date, name, _parse_value(v, line)))
        last = date
    if not rows:
        raise ParseError(f"{path}: no data rows")
    grid = _grid_for([date for _, date, _, _ in rows], step_days)
    known: dict[str, dict] = {}
    for line, date, name, value in rows:
        known.setdefault(name, {})[_index(grid, date, line)] = value
    return ExposureSet.from_arrays(
        grid, [(name, _fill(grid, vals, policy, f"channel {name!r}"))
               for name, vals in known.items()]
    )


def read_schedule(path) -> EpisodeSchedule:
    entries = []
    for line, (label, d) in _rows(path, SCHEDULE_HEADER):
        entries.append((label, _parse_date(d, line)))
    if not entries:
        raise ParseError(f"{path}: no data rows")
    return EpisodeSchedule(tuple(entries))


def _write(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _date_text(grid, k):
    return grid.date_at(k).isoformat()


def write_counts(series: TimeSeries, path):
    g = series.grid
    return _write(path, COUNTS_HEADER,
                  ([_date_text(g, k), fmt(v)] for k, v in enumerate(series.values)))


def write_exposures(exposures: ExposureSet, path):
    g = exposures.grid
    rows = ([_date_text(g, k), name, fmt(series.values[k])]
            for k in range(g.n_points) for name, series in exposures.channels)
    return _write(path, EXPOSURES_HEADER, rows)


def write_schedule(schedule: EpisodeSchedule, path):
    return _write(path, SCHEDULE_HEADER,
                  ([label, date.isoformat()] for label, date in schedule.entries))


def schedule_to_impulses(schedule: EpisodeSchedule, grid: TimeGrid,
                         magnitude: float = 1.0) -> TimeSeries:
    """Exposure series equal to ``magnitude`` on broadcast days and 0 elsewhere."""
    if not magnitude >= 0:
        raise ValueError(f"magnitude must be nonnegative, got {magnitude}")
    values = np.zeros(grid.n_points)
    values[schedule.indices(grid)] = magnitude
    return TimeSeries(grid, values)


def with_impulse_channel(exposures: ExposureSet, schedule: EpisodeSchedule, name: str = "tv",
                         magnitude: float = 1.0) -> ExposureSet:
    """``exposures`` plus one broadcast-impulse channel appended last."""
    pulse = schedule_to_impulses(schedule, exposures.grid, magnitude)
    return ExposureSet(exposures.grid, (*exposures.channels, (name, pulse)))


def align(observed: TimeSeries, exposures: ExposureSet):
    """Restrict both inputs to the dates they have in common."""
    a, b = observed.grid, exposures.grid
    if a.dt != b.dt:
        raise NoOverlap(f"grids have different steps ({a.dt:g} and {b.dt:g} days)")
    start = max(a.t0, b.t0)
    stop = min(a.end, b.end)
    if stop <= start:
        raise NoOverlap(f"observations {a.t0}..{a.end} and exposures {b.t0}..{b.end} "
                        "share fewer than two grid points")
    i0, j0 = a.index_of(start), b.index_of(start)
    i1, j1 = a.index_of(stop), b.index_of(stop)
    if None in (i0, j0, i1, j1):
        raise NoOverlap("the two grids are offset from each other")
    return observed.sub(i0, i1 + 1), exposures.sub(j0, j1 + 1)


def _model_curve(result: FitResult, exposures: ExposureSet, options):
    options = options or SimOptions()
    w, p = result.window, result.params
    A = exposures.matrix()[:, w.start_index:w.end_index]
    return integrate(p.c, p.D, p.P, p.I0, A, exposures.grid.dt, options)


def export_fit_curve(result, observed: TimeSeries, exposures: ExposureSet, path, options=None):
    """Plot-ready table: date, observed, model, then one column per channel.

    ``result`` may be one FitResult or a list of them (e.g. per-episode fits);
    each contributes the rows of its own window.
    """
    results = [result] if isinstance(result, FitResult) else list(result)
    g = observed.grid
    A = exposures.matrix()
    rows = []
    for res in results:
        model = _model_curve(res, exposures, options)
        for offset, k in enumerate(range(res.window.start_index, res.window.end_index)):
            rows.append([_date_text(g, k), fmt(observed.values[k]), fmt(model[offset]),
                         *(fmt(a) for a in A[:, k])])
    return _write(path, ["date", "observed", "model", *exposures.names], rows)


def export_episode_params(results, path, channel_names=None):
    """One row per fitted window: label, each media weight, D, P, I0 and diagnostics."""
    results = list(results)
    n = results[0].params.n_channels if results else len(channel_names or ())
    names = list(channel_names) if channel_names is not None else [str(i + 1) for i in range(n)]
    header = ["episode_label", *(f"c_{name}" for name in names),
              "D", "P", "I0", "sse", "rmse", "r_squared"]
    rows = []
    for r in results:
        p = r.params
        rows.append([r.window.label, *(fmt(c) for c in p.c), fmt(p.D), fmt(p.P), fmt(p.I0),
                     fmt(r.sse), fmt(r.rmse), "" if r.r_squared is None else fmt(r.r_squared)])
    return _write(path, header, rows)
