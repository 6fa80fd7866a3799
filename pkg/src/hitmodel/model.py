"""Interest dynamics driven by media exposure and word of mouth.

The state is a single scalar interest ``I(t)`` evolving as::

    dI/dt = sum_j c_j * A_j(t) + D * I + P * I**2

where ``A_j`` are media exposure series (TV broadcasts, web news, ...),
``D`` is the direct-communication coefficient and ``P`` the indirect
(rumour) coefficient. Exposures are piecewise constant over each step.
"""
from __future__ import annotations

import datetime as _dt
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BlowupDetected, DimensionMismatch


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + k*dt`` for ``k = 0..n_steps`` (dt in days)."""

    t0: _dt.date
    n_steps: int
    dt: float = 1.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def end(self):
        return self.date_at(self.n_steps)

    def date_at(self, k: int):
        offset = _dt.timedelta(days=k * self.dt)
        if self.dt == 1.0:
            return self.t0 + offset
        return _dt.datetime.combine(self.t0, _dt.time()) + offset

    def dates(self) -> list:
        return [self.date_at(k) for k in range(self.n_points)]

    def index_of(self, date) -> int | None:
        """Grid index of ``date``, or None if it is not a grid point."""
        if isinstance(date, _dt.datetime):
            delta = date - _dt.datetime.combine(self.t0, _dt.time())
        else:
            delta = date - self.t0
        days = delta.total_seconds() / 86400.0
        k = round(days / self.dt)
        if not 0 <= k <= self.n_steps or not math.isclose(k * self.dt, days, abs_tol=1e-9):
            return None
        return k

    def subgrid(self, start: int, n_steps: int) -> "TimeGrid":
        return TimeGrid(self.date_at(start), n_steps, self.dt)


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 1 or values.shape[0] != self.grid.n_points:
            raise DimensionMismatch(
                f"expected {self.grid.n_points} values for the grid, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("time series values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.n_points

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def sub(self, start: int, stop: int) -> "TimeSeries":
        """Restrict to grid indices ``[start, stop)`` (at least two points)."""
        return TimeSeries(self.grid.subgrid(start, stop - start - 1), self.values[start:stop])


@dataclass(frozen=True)
class ExposureSet:
    """Named exposure channels sharing one grid, in a fixed order."""

    grid: TimeGrid
    channels: tuple = ()

    def __post_init__(self):
        channels = tuple((str(name), series) for name, series in self.channels)
        names = [name for name, _ in channels]
        if len(set(names)) != len(names):
            raise ValueError(f"channel names must be unique: {names}")
        for name, series in channels:
            if series.grid != self.grid:
                raise DimensionMismatch(f"channel {name!r} is not on the shared grid")
            if np.any(series.values < 0):
                raise ValueError(f"channel {name!r} has negative exposure values")
        object.__setattr__(self, "channels", channels)

    @classmethod
    def from_arrays(cls, grid: TimeGrid, arrays: dict | Iterable = ()) -> "ExposureSet":
        items = arrays.items() if isinstance(arrays, dict) else arrays
        return cls(grid, tuple((name, TimeSeries(grid, vals)) for name, vals in items))

    @classmethod
    def empty(cls, grid: TimeGrid) -> "ExposureSet":
        return cls(grid, ())

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.channels]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def matrix(self) -> np.ndarray:
        """Exposure values as an ``(n_channels, n_points)`` array."""
        if not self.channels:
            return np.zeros((0, self.grid.n_points))
        return np.vstack([series.values for _, series in self.channels])

    def sub(self, start: int, stop: int) -> "ExposureSet":
        return ExposureSet(
            self.grid.subgrid(start, stop - start - 1),
            tuple((name, series.sub(start, stop)) for name, series in self.channels),
        )

    def __getitem__(self, name: str) -> TimeSeries:
        for channel, series in self.channels:
            if channel == name:
                return series
        raise KeyError(name)


@dataclass(frozen=True)
class HitParams:
    """Model coefficients: media weights ``c`` (one per channel), ``D``, ``P`` and ``I0``."""

    c: tuple
    D: float
    P: float
    I0: float

    def __post_init__(self):
        c = tuple(float(x) for x in np.atleast_1d(np.asarray(self.c, dtype=float)))
        object.__setattr__(self, "c", c)
        for name in ("D", "P", "I0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(math.isfinite(x) for x in (*c, self.D, self.P, self.I0)):
            raise ValueError("all parameters must be finite")
        if self.I0 < 0:
            raise ValueError(f"I0 must be nonnegative, got {self.I0}")

    @property
    def n_channels(self) -> int:
        return len(self.c)

    def as_vector(self) -> np.ndarray:
        return np.array([*self.c, self.D, self.P, self.I0])

    @classmethod
    def from_vector(cls, vector: Sequence[float], n_channels: int) -> "HitParams":
        vector = [float(x) for x in vector]
        if len(vector) != n_channels + 3:
            raise DimensionMismatch(f"expected {n_channels + 3} entries, got {len(vector)}")
        return cls(tuple(vector[:n_channels]), vector[n_channels], vector[n_channels + 1],
                   vector[n_channels + 2])

    def scaled(self, k: float) -> "HitParams":
        """Parameters whose trajectory is ``k`` times this one's."""
        return HitParams(tuple(k * x for x in self.c), self.D, self.P / k, k * self.I0)

    def to_dict(self) -> dict:
        return {"c": list(self.c), "D": self.D, "P": self.P, "I0": self.I0}

    @classmethod
    def from_dict(cls, data: dict) -> "HitParams":
        return cls(tuple(data["c"]), data["D"], data["P"], data["I0"])


class Integrator(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


@dataclass(frozen=True)
class SimOptions:
    integrator: Integrator = Integrator.EULER
    blowup_cap: float = 1e12
    clamp_nonnegative: bool = True

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not self.blowup_cap > 0:
            raise ValueError(f"blowup_cap must be positive, got {self.blowup_cap}")


def _check_channels(params: HitParams, exposures: ExposureSet):
    if params.n_channels != exposures.n_channels:
        raise DimensionMismatch(
            f"params have {params.n_channels} media coefficients but exposures have "
            f"{exposures.n_channels} channels ({', '.join(exposures.names) or 'none'})"
        )


def forcing(c: Sequence[float], exposure_matrix: np.ndarray) -> list[float]:
    """Media term ``sum_j c_j A_j(t)`` per grid point, summed channel by channel."""
    total = np.zeros(exposure_matrix.shape[1])
    for cj, row in zip(c, exposure_matrix):
        total = total + cj * row
    return total.tolist()


def rhs(params: HitParams, exposures: ExposureSet, t_index: int, I_value: float) -> float:
    """Right-hand side of the interest equation at grid index ``t_index``."""
    _check_channels(params, exposures)
    if not 0 <= t_index <= exposures.grid.n_steps:
        raise IndexError(f"t_index {t_index} outside grid of {exposures.grid.n_points} points")
    media = 0.0
    for cj, (_, series) in zip(params.c, exposures.channels):
        media += cj * float(series.values[t_index])
    return media + params.D * I_value + params.P * I_value * I_value


def integrate(c, D, P, I0, exposure_matrix, dt, options: SimOptions) -> list[float]:
    """Step the equation over every point of ``exposure_matrix``.

    Low-level entry point working on plain numbers; ``simulate`` wraps it.
    Raises BlowupDetected as soon as ``|I|`` exceeds the cap.
    """
    f = forcing(c, exposure_matrix)
    cap = options.blowup_cap
    clamp = options.clamp_nonnegative
    rk4 = options.integrator is Integrator.RK4
    I = float(I0)
    if not abs(I) <= cap:
        raise BlowupDetected(f"initial interest {I} exceeds cap {cap}", step=0)
    out = [I]
    half = 0.5 * dt
    for k in range(len(f) - 1):
        fk = f[k]
        if rk4:
            k1 = fk + D * I + P * I * I
            y = I + half * k1
            k2 = fk + D * y + P * y * y
            y = I + half * k2
            k3 = fk + D * y + P * y * y
            y = I + dt * k3
            k4 = fk + D * y + P * y * y
            I = I + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            I = I + dt * (fk + D * I + P * I * I)
        if not abs(I) <= cap:
            raise BlowupDetected(f"interest exceeded {cap:g} at step {k + 1}", step=k + 1)
        if clamp and I < 0.0:
            I = 0.0
        out.append(I)
    return out


def integrate_batch(C, D, P, I0, exposure_matrix, dt, options: SimOptions):
    """Vectorised ``integrate`` over many parameter sets at once.

    ``C`` has shape ``(m, n_channels)``; ``D``, ``P``, ``I0`` shape ``(m,)``.
    Returns ``(values, blown)`` where ``values`` is ``(m, n_points)`` and
    ``blown`` flags rows that hit the cap (their values are meaningless).
    Arithmetic is ordered as in ``integrate`` so rows match it exactly.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.asarray(D, dtype=float)
    P = np.asarray(P, dtype=float)
    I = np.array(I0, dtype=float)
    m, n_points = I.shape[0], exposure_matrix.shape[1]
    F = np.zeros((m, n_points))
    for j in range(exposure_matrix.shape[0]):
        F = F + C[:, j][:, None] * exposure_matrix[j][None, :]
    cap = options.blowup_cap
    rk4 = options.integrator is Integrator.RK4
    out = np.empty((m, n_points))
    blown = ~(np.abs(I) <= cap)
    I[blown] = 0.0
    out[:, 0] = I
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_points - 1):
            fk = F[:, k]
            if rk4:
                k1 = fk + D * I + P * I * I
                y = I + half * k1
                k2 = fk + D * y + P * y * y
                y = I + half * k2
                k3 = fk + D * y + P * y * y
                y = I + dt * k3
                k4 = fk + D * y + P * y * y
                I = I + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                I = I + dt * (fk + D * I + P * I * I)
            hit = ~(np.abs(I) <= cap)
            blown |= hit
            I[blown] = 0.0
            if options.clamp_nonnegative:
                I = np.maximum(I, 0.0)
            out[:, k + 1] = I
    return out, blown


def simulate(params: HitParams, exposures: ExposureSet,
             options: SimOptions | None = None) -> TimeSeries:
    """Interest trajectory on the exposure grid, starting from ``params.I0``."""
    options = options or SimOptions()
    _check_channels(params, exposures)
    grid = exposures.grid
    values = integrate(params.c, params.D, params.P, params.I0, exposures.matrix(),
                       grid.dt, options)
    return TimeSeries(grid, values)
