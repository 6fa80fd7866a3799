import datetime as dt

import numpy as np
import pytest

from hitmodel import ExposureSet, TimeGrid

T0 = dt.date(2016, 10, 11)

ACCEPTANCE_LINES = []


def daily_grid(n_points, t0=T0, dt_days=1.0):
    return TimeGrid(t0, n_points - 1, dt_days)


def pulses(n_points, period, magnitude=1.0, offset=0):
    values = np.zeros(n_points)
    values[offset::period] = magnitude
    return values


def single_channel(values, name="tv", t0=T0):
    values = np.asarray(values, dtype=float)
    return ExposureSet.from_arrays(daily_grid(values.shape[0], t0), {name: values})


@pytest.fixture
def grid10():
    return daily_grid(11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
