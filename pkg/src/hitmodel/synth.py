"""Synthetic observations and a brute-force grid-search oracle."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GridTooLarge, InvalidWindow
from .estimator import WORST_OBJECTIVE, Window
from .model import (ExposureSet, HitParams, SimOptions, TimeSeries, integrate,
                    integrate_batch, simulate)


class NoiseKind(str, enum.Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.kind is NoiseKind.NONE and self.sigma != 0:
            raise ValueError("sigma must be 0 when the noise kind is 'none'")

    @classmethod
    def gaussian(cls, sigma: float, seed: int = 0) -> "NoiseSpec":
        return cls(NoiseKind.GAUSSIAN, sigma, seed)


def _add_noise(values: np.ndarray, noise: NoiseSpec, clamp: bool) -> np.ndarray:
    if noise.kind is NoiseKind.NONE:
        return values
    rng = np.random.default_rng(noise.seed)
    noisy = values + rng.normal(0.0, noise.sigma, size=values.shape[0])
    return np.maximum(noisy, 0.0) if clamp else noisy


def generate(params: HitParams, exposures: ExposureSet, noise: NoiseSpec | None = None,
             options: SimOptions | None = None) -> TimeSeries:
    """Simulated interest plus i.i.d. observation noise (seeded)."""
    options = options or SimOptions()
    clean = simulate(params, exposures, options)
    values = _add_noise(np.array(clean.values), noise or NoiseSpec(), options.clamp_nonnegative)
    return TimeSeries(clean.grid, values)


def generate_piecewise(segments, exposures: ExposureSet, noise: NoiseSpec | None = None,
                       options: SimOptions | None = None) -> TimeSeries:
    """Simulate with parameters that change from window to window.

    ``segments`` is a list of ``(Window, HitParams)`` whose windows tile the
    whole grid in order. The trajectory is continuous: it starts from the
    first segment's ``I0`` and each step from index ``k`` uses the
    parameters of the window containing ``k``; later ``I0`` values are
    ignored.
    """
    options = options or SimOptions()
    grid = exposures.grid
    expected = 0
    for window, params in segments:
        if window.start_index != expected or window.end_index <= window.start_index:
            raise InvalidWindow("segments must tile the grid contiguously from index 0")
        if params.n_channels != exposures.n_channels:
            raise DimensionMismatch("segment parameters do not match the exposure channels")
        expected = window.end_index
    if expected != grid.n_points:
        raise InvalidWindow(f"segments cover {expected} of {grid.n_points} grid points")

    A = exposures.matrix()
    values = [segments[0][1].I0]
    for window, p in segments:
        stop = min(window.end_index + 1, grid.n_points)
        part = integrate(p.c, p.D, p.P, values[-1], A[:, window.start_index:stop], grid.dt,
                         options)
        values.extend(part[1:])
    values = _add_noise(np.array(values), noise or NoiseSpec(), options.clamp_nonnegative)
    return TimeSeries(grid, values)


@dataclass(frozen=True)
class GridSpec:
    """Candidate values per parameter; ``c`` holds one list per channel."""

    c: tuple
    D: tuple
    P: tuple
    I0: tuple
    cap: int = 10**6

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(tuple(float(v) for v in axis) for axis in self.c))
        for name in ("D", "P", "I0"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if any(len(axis) == 0 for axis in self.axes):
            raise ValueError("every grid axis needs at least one value")
        if any(v < 0 for v in self.I0):
            raise ValueError("I0 grid values must be nonnegative")

    @property
    def axes(self) -> list[tuple]:
        return [*self.c, self.D, self.P, self.I0]

    @property
    def cardinality(self) -> int:
        return math.prod(len(axis) for axis in self.axes)

    @classmethod
    def from_bounds(cls, lo, hi, points_per_axis: int = 11, cap: int = 10**6) -> "GridSpec":
        """Evenly spaced grid over a box ordered like ``HitParams.as_vector``."""
        axes = [tuple(np.linspace(a, b, points_per_axis)) if b > a else (float(a),)
                for a, b in zip(lo, hi)]
        return cls(tuple(axes[:-3]), axes[-3], axes[-2], axes[-1], cap)


def grid_oracle(observed: TimeSeries, exposures: ExposureSet, window: Window, grid: GridSpec,
                options: SimOptions | None = None, chunk: int = 1 << 15):
    """Exhaustive search over ``grid``; returns ``(best params, best objective)``.

    Points are enumerated in lexicographic index order (c per channel, D, P,
    I0) and the first minimum wins, so ties resolve deterministically.
    """
    options = options or SimOptions()
    if observed.grid != exposures.grid:
        raise DimensionMismatch("observed series and exposures are on different grids")
    window.validate(observed.grid)
    if len(grid.c) != exposures.n_channels:
        raise DimensionMismatch(
            f"grid has {len(grid.c)} c axes, exposures have {exposures.n_channels} channels"
        )
    if grid.cardinality > grid.cap:
        raise GridTooLarge(f"grid has {grid.cardinality} points, cap is {grid.cap}")

    A = exposures.matrix()[:, window.start_index:window.end_index]
    obs = observed.values[window.start_index:window.end_index]
    n = exposures.n_channels
    points = itertools.product(*grid.axes)
    best_f, best_x = WORST_OBJECTIVE, None
    while True:
        block = np.array(list(itertools.islice(points, chunk)), dtype=float)
        if block.size == 0:
            break
        values, blown = integrate_batch(block[:, :n], block[:, n], block[:, n + 1],
                                        block[:, n + 2], A, observed.grid.dt, options)
        sse = np.zeros(block.shape[0])
        for k in range(obs.shape[0]):
            r = values[:, k] - obs[k]
            sse = sse + r * r
        sse[blown] = WORST_OBJECTIVE
        i = int(np.argmin(sse))
        if best_x is None or sse[i] < best_f:
            best_f, best_x = float(sse[i]), block[i]
    return HitParams.from_vector(best_x, n), best_f
