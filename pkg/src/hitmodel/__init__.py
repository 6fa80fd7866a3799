"""Hit-phenomenon interest model: simulation and parameter estimation."""
from .errors import (BlowupDetected, DimensionMismatch, DuplicateChannelDate, EmptyBounds,
                     GridTooLarge, HitModelError, InvalidWindow, MissingData, NegativeCount,
                     NoOverlap, NonMonotonicDates, ParseError, ScheduleOutOfRange,
                     UnsortedSchedule)
from .estimator import (FitConfig, FitResult, HitModelRegressor, Window, episode_windows,
                        fit, fit_full_run, fit_per_episode, full_window, objective)
from .model import (ExposureSet, HitParams, Integrator, SimOptions, TimeGrid, TimeSeries, rhs,
                    simulate)
from .schedule import EpisodeSchedule

__version__ = "0.1.0"
