"""Epidemic wave detection, Bayesian SIR learning and scenario forecasting."""

from .data import EpidemicSeries, RawSeries, build_epidemic_series, parse_jhu_csv, smooth
from .errors import ConfigError, DataError, EpiwaveError, NumericalError
from .filtering import run_filter
from .forecast import ensemble_forecast, mape
from .mast import calibrate_threshold, growth_rate, run_detector
from .sir import NoiseConfig, SirParams, SirState, simulate, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "EpidemicSeries", "EpiwaveError", "NoiseConfig", "NumericalError",
    "RawSeries", "SirParams", "SirState", "build_epidemic_series", "calibrate_threshold",
    "ensemble_forecast", "growth_rate", "mape", "parse_jhu_csv", "run_detector", "run_filter",
    "simulate", "smooth", "step",
]
