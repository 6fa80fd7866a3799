"""Least-squares fitting of the interest model to observed daily counts.

The search draws uniform random starts inside the parameter box, keeps the
best one and polishes it with a box-projected Nelder-Mead simplex. Windows
are half-open index ranges on the observation grid; per-episode analysis
fits one window per broadcast, from a broadcast day up to the day before
the next one.
"""
from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import BlowupDetected, DimensionMismatch, EmptyBounds, InvalidWindow
from .model import (ExposureSet, HitParams, Integrator, SimOptions, TimeGrid, TimeSeries,
                    integrate, simulate)
from .optimize import nelder_mead_box, uniform_starts
from .schedule import EpisodeSchedule

#: Objective value reported when the trajectory blows up.
WORST_OBJECTIVE = math.inf


@dataclass(frozen=True)
class Window:
    """Half-open index range ``[start_index, end_index)`` on the grid."""

    label: str
    start_index: int
    end_index: int

    def __len__(self):
        return self.end_index - self.start_index

    def validate(self, grid: TimeGrid) -> "Window":
        if not 0 <= self.start_index < self.end_index <= grid.n_points:
            raise InvalidWindow(
                f"window {self.label!r} [{self.start_index}, {self.end_index}) does not fit "
                f"a grid of {grid.n_points} points"
            )
        return self


def full_window(grid: TimeGrid, label: str = "full") -> Window:
    return Window(label, 0, grid.n_points)


@dataclass(frozen=True)
class FitConfig:
    """Search box and optimiser settings.

    ``c_bounds`` is one ``(lo, hi)`` pair shared by every channel or a list
    with one pair per channel. ``I0_bounds=None`` means ``[0, 10 * max]`` of
    the observed window. With ``fit_I0=False`` the initial interest is the
    first observed value of the window; ``chain_I0`` (per-episode fits only)
    instead carries the previous window's model value across the boundary.
    """

    c_bounds: tuple = (0.0, 1e3)
    D_bounds: tuple = (-10.0, 10.0)
    P_bounds: tuple = (-1.0, 1.0)
    I0_bounds: tuple | None = None
    n_starts: int = 64
    seed: int = 0
    refine_max_iters: int = 500
    refine_tolerance: float = 1e-10
    refine_restarts: int = 8
    n_refine: int = 8
    fit_I0: bool = True
    chain_I0: bool = False

    def __post_init__(self):
        if int(self.n_starts) != self.n_starts or self.n_starts < 1:
            raise ValueError(f"n_starts must be a positive integer, got {self.n_starts!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be an unsigned integer, got {self.seed!r}")
        if int(self.n_refine) != self.n_refine or self.n_refine < 1:
            raise ValueError(f"n_refine must be a positive integer, got {self.n_refine!r}")
        if self.refine_max_iters < 0 or self.refine_tolerance < 0:
            raise ValueError("refine_max_iters and refine_tolerance must be nonnegative")

    def box(self, n_channels: int, observed_window: np.ndarray, I0_fixed: float | None = None):
        """Resolve ``(lo, hi)`` arrays ordered as ``HitParams.as_vector``."""
        c = np.asarray(self.c_bounds, dtype=float)
        if c.shape == (2,):
            c = np.tile(c, (n_channels, 1))
        elif c.shape != (n_channels, 2):
            raise DimensionMismatch(
                f"c_bounds give {c.shape[0] if c.ndim == 2 else '?'} channel pairs, "
                f"data have {n_channels} channels"
            )
        if I0_fixed is not None:
            i0 = (float(I0_fixed), float(I0_fixed))
        elif self.I0_bounds is None:
            i0 = (0.0, 10.0 * float(np.max(observed_window)))
        else:
            i0 = tuple(float(v) for v in self.I0_bounds)
        pairs = [*map(tuple, c), tuple(self.D_bounds), tuple(self.P_bounds), i0]
        lo = np.array([p[0] for p in pairs], dtype=float)
        hi = np.array([p[1] for p in pairs], dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise EmptyBounds("bounds must be finite")
        if np.any(lo > hi):
            bad = np.flatnonzero(lo > hi).tolist()
            raise EmptyBounds(f"lower bound above upper bound at parameter positions {bad}")
        if lo[-1] < 0:
            raise EmptyBounds(f"I0 lower bound must be nonnegative, got {lo[-1]}")
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "c_bounds": np.asarray(self.c_bounds, dtype=float).tolist(),
            "D_bounds": list(map(float, self.D_bounds)),
            "P_bounds": list(map(float, self.P_bounds)),
            "I0_bounds": None if self.I0_bounds is None else list(map(float, self.I0_bounds)),
            "n_starts": int(self.n_starts),
            "seed": int(self.seed),
            "refine_max_iters": int(self.refine_max_iters),
            "refine_tolerance": float(self.refine_tolerance),
            "refine_restarts": int(self.refine_restarts),
            "n_refine": int(self.n_refine),
            "fit_I0": bool(self.fit_I0),
            "chain_I0": bool(self.chain_I0),
        }


@dataclass(frozen=True)
class FitResult:
    window: Window
    params: HitParams
    sse: float
    rmse: float
    r_squared: float | None
    n_evaluations: int
    converged: bool
    start_objectives: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "window": {"label": self.window.label, "start_index": self.window.start_index,
                       "end_index": self.window.end_index},
            "params": self.params.to_dict(),
            "sse": self.sse,
            "rmse": self.rmse,
            "r_squared": self.r_squared,
            "n_evaluations": self.n_evaluations,
            "converged": self.converged,
        }


def _check_inputs(observed: TimeSeries, exposures: ExposureSet, window: Window):
    if observed.grid != exposures.grid:
        raise DimensionMismatch("observed series and exposures are on different grids")
    window.validate(observed.grid)


def _sse(model, observed) -> float:
    total = 0.0
    for m, o in zip(model, observed):
        r = m - o
        total += r * r
    return total


def _window_problem(observed, exposures, window, options):
    """Closure ``vector -> sse`` over one window (no validation)."""
    A = exposures.matrix()[:, window.start_index:window.end_index]
    obs = observed.values[window.start_index:window.end_index].tolist()
    dt = observed.grid.dt
    n = exposures.n_channels

    def sse(vector):
        v = [float(x) for x in vector]
        try:
            model = integrate(v[:n], v[n], v[n + 1], v[n + 2], A, dt, options)
        except BlowupDetected:
            return WORST_OBJECTIVE
        return _sse(model, obs)

    return sse


def objective(params: HitParams, observed: TimeSeries, exposures: ExposureSet,
              window: Window, options: SimOptions | None = None) -> float:
    """Sum of squared residuals over ``window``, the model starting at its first day.

    A trajectory that blows up scores ``WORST_OBJECTIVE`` instead of raising.
    """
    options = options or SimOptions()
    _check_inputs(observed, exposures, window)
    if params.n_channels != exposures.n_channels:
        raise DimensionMismatch(
            f"params have {params.n_channels} media coefficients, exposures "
            f"{exposures.n_channels} channels"
        )
    vector = [*params.c, params.D, params.P, params.I0]
    return _window_problem(observed, exposures, window, options)(vector)


def n_free_parameters(n_channels: int, config: FitConfig) -> int:
    return n_channels + (3 if config.fit_I0 else 2)


def _fit(observed, exposures, window, config, options, I0_fixed=None) -> FitResult:
    _check_inputs(observed, exposures, window)
    n = exposures.n_channels
    fixed = I0_fixed is not None or not config.fit_I0
    n_free = n + (2 if fixed else 3)
    if len(window) < n_free + 1:
        raise InvalidWindow(
            f"window {window.label!r} has {len(window)} points; {n_free} free parameters "
            f"need at least {n_free + 1}"
        )
    obs = observed.values[window.start_index:window.end_index]
    if fixed and I0_fixed is None:
        I0_fixed = float(obs[0])
    lo, hi = config.box(n, obs, I0_fixed)
    func = _window_problem(observed, exposures, window, options)

    starts = uniform_starts(lo, hi, config.n_starts, config.seed)
    start_f = [func(x) for x in starts]
    ranked = np.argsort(start_f, kind="stable")
    x_best, f_best = starts[ranked[0]], start_f[ranked[0]]
    evaluations = len(starts)
    converged = False
    for i in ranked[:config.n_refine]:
        if config.refine_max_iters == 0 or not math.isfinite(start_f[i]):
            break
        res = nelder_mead_box(func, starts[i], lo, hi, max_iters=config.refine_max_iters,
                              ftol=config.refine_tolerance,
                              max_restarts=config.refine_restarts)
        evaluations += res.n_evaluations
        if res.fun < f_best or (res.fun == f_best and not converged):
            x_best, f_best, converged = res.x, res.fun, res.converged
    params = HitParams.from_vector(np.clip(x_best, lo, hi), n)
    sse = objective(params, observed, exposures, window, options)
    tss = float(np.sum((obs - obs.mean()) ** 2))
    r2 = 1.0 - sse / tss if tss > 0 else None
    return FitResult(window, params, sse, math.sqrt(sse / len(window)), r2, evaluations,
                     converged, tuple(start_f))


def fit(observed: TimeSeries, exposures: ExposureSet, window: Window,
        config: FitConfig | None = None, options: SimOptions | None = None) -> FitResult:
    """Fit the model to ``observed`` over one window."""
    return _fit(observed, exposures, window, config or FitConfig(), options or SimOptions())


def fit_full_run(observed: TimeSeries, exposures: ExposureSet,
                 config: FitConfig | None = None, options: SimOptions | None = None) -> FitResult:
    """Fit over the whole observation grid."""
    return fit(observed, exposures, full_window(observed.grid), config, options)


def episode_windows(schedule: EpisodeSchedule, grid: TimeGrid) -> list[Window]:
    """One window per episode, from its broadcast to the day before the next one."""
    starts = schedule.indices(grid)
    ends = starts[1:] + [grid.n_points]
    return [Window(label, s, e) for label, s, e in zip(schedule.labels, starts, ends)]


def fit_per_episode(observed: TimeSeries, exposures: ExposureSet, schedule: EpisodeSchedule,
                    config: FitConfig | None = None,
                    options: SimOptions | None = None) -> list[FitResult]:
    """Independent fits over consecutive broadcast windows, in episode order."""
    config = config or FitConfig()
    options = options or SimOptions()
    if observed.grid != exposures.grid:
        raise DimensionMismatch("observed series and exposures are on different grids")
    results = []
    for window in episode_windows(schedule, observed.grid):
        I0_fixed = None
        if config.chain_I0 and results:
            I0_fixed = _carry_over(results[-1], exposures, window.start_index, options)
        results.append(_fit(observed, exposures, window, config, options, I0_fixed))
    return results


def _carry_over(previous: FitResult, exposures, next_start, options) -> float:
    """Model interest of the previous window's fit, stepped onto ``next_start``."""
    p = previous.params
    A = exposures.matrix()[:, previous.window.start_index:next_start + 1]
    values = integrate(p.c, p.D, p.P, p.I0, A, exposures.grid.dt, options)
    return max(values[-1], 0.0)


class HitModelRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn wrapper: rows of ``X`` are consecutive days, columns exposure channels.

    ``fit`` estimates the media weights, ``D``, ``P`` and the initial interest
    from the count series ``y``; ``predict`` integrates the fitted model over
    new exposure rows starting from the fitted initial interest.
    """

    def __init__(self, dt=1.0, integrator="euler", n_starts=64, random_state=0,
                 c_bounds=(0.0, 1e3), D_bounds=(-10.0, 10.0), P_bounds=(-1.0, 1.0),
                 I0_bounds=None, fit_I0=True, refine_max_iters=500, refine_tolerance=1e-10,
                 blowup_cap=1e12, clamp_nonnegative=True):
        self.dt = dt
        self.integrator = integrator
        self.n_starts = n_starts
        self.random_state = random_state
        self.c_bounds = c_bounds
        self.D_bounds = D_bounds
        self.P_bounds = P_bounds
        self.I0_bounds = I0_bounds
        self.fit_I0 = fit_I0
        self.refine_max_iters = refine_max_iters
        self.refine_tolerance = refine_tolerance
        self.blowup_cap = blowup_cap
        self.clamp_nonnegative = clamp_nonnegative

    _EPOCH = _dt.date(1970, 1, 1)

    def _options(self):
        return SimOptions(Integrator(self.integrator), self.blowup_cap, self.clamp_nonnegative)

    def _seed(self):
        if self.random_state is None or isinstance(self.random_state, (int, np.integer)):
            return int(self.random_state or 0)
        return int(check_random_state(self.random_state).randint(2**31 - 1))

    def _exposures(self, X):
        grid = TimeGrid(self._EPOCH, X.shape[0] - 1, self.dt)
        return ExposureSet.from_arrays(grid, [(f"x{j}", X[:, j]) for j in range(X.shape[1])])

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_features=0, ensure_min_samples=2, y_numeric=True)
        if np.any(X < 0):
            raise ValueError("exposures must be nonnegative")
        exposures = self._exposures(X)
        observed = TimeSeries(exposures.grid, y)
        config = FitConfig(c_bounds=self.c_bounds, D_bounds=self.D_bounds,
                           P_bounds=self.P_bounds, I0_bounds=self.I0_bounds,
                           n_starts=self.n_starts, seed=self._seed(),
                           refine_max_iters=self.refine_max_iters,
                           refine_tolerance=self.refine_tolerance, fit_I0=self.fit_I0)
        self.result_ = fit_full_run(observed, exposures, config, self._options())
        self.params_ = self.result_.params
        self.coef_ = np.array(self.params_.c)
        self.D_ = self.params_.D
        self.P_ = self.params_.P
        self.I0_ = self.params_.I0
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"X has {X.shape[1]} channels, the model was fitted on {self.n_features_in_}"
            )
        if X.shape[0] == 1:
            return np.array([self.I0_])
        return simulate(self.params_, self._exposures(X), self._options()).values.copy()
