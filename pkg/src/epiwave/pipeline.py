"""Wiring of ingestion, detection, learning and forecasting for one series."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path

import numpy as np

from . import data as dp
from .config import PipelineConfig, _opt_date, seed_for, substream
from .errors import ConfigError, DataError
from .filtering import FilterResult, estimate_slope, prior_from_observation, run_filter
from .forecast import ForecastResult, ScenarioSpec, build_scenario, ensemble_forecast
from .mast import (
    Calibration,
    DetectionResult,
    GrowthSeries,
    calibrate_threshold,
    growth_rate,
    run_detector,
)
from .sir import ZERO_NOISE

log = logging.getLogger(__name__)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def trim(series: dp.EpidemicSeries, start=None, end=None) -> dp.EpidemicSeries:
    lo = 0 if start is None else next((k for k, d in enumerate(series.dates) if d >= start), None)
    hi = len(series) if end is None else next(
        (k for k in range(len(series) - 1, -1, -1) if series.dates[k] <= end), -1) + 1
    if lo is None or hi <= lo:
        raise DataError("date range selects no data")
    return dp.EpidemicSeries(series.dates[lo:hi], series.infected[lo:hi], series.removed[lo:hi],
                             series.new_positives[lo:hi], series.population)


@dataclass
class Ingested:
    raw: dp.RawSeries
    repairs: list
    series: dp.EpidemicSeries


def ingest(cfg: PipelineConfig) -> Ingested:
    d = cfg.data
    if not d.path:
        raise ConfigError("data.path is required")
    if not d.population > 0:
        raise ConfigError("data.population must be > 0")
    raw, repairs = dp.parse_jhu_csv(
        _read(d.path), d.region,
        recovered=_read(d.recovered_path) if d.recovered_path else None,
        deaths=_read(d.deaths_path) if d.deaths_path else None)
    series = dp.build_epidemic_series(raw, d.population)
    series = trim(series, _opt_date(d.start_date, "data.start_date"),
                  _opt_date(d.end_date, "data.end_date"))
    return Ingested(raw, repairs, series)


@dataclass
class Detection:
    growth: GrowthSeries
    calibration: Calibration
    result: DetectionResult
    start_day: int


def detect(series: dp.EpidemicSeries, cfg: PipelineConfig) -> Detection:
    p = dp.detector_input(series, cfg.smoothing.detector_window)
    growth = growth_rate(p, cfg.detector.sigma_window, cfg.detector.denom_floor, series.dates)
    start = _opt_date(cfg.detector.start_date, "detector.start_date")
    start_day = growth.first_valid
    if start is not None:
        start_day = max(start_day, next((k for k, d in enumerate(series.dates) if d >= start),
                                        len(series)))
    if start_day >= len(series):
        raise DataError("no days left to monitor after the detector start date")
    sigma = cfg.detector.calibration_sigma
    if sigma <= 0:
        sigma = float(np.median(growth.sigma[start_day:]))
    cal = calibrate_threshold(cfg.detector.risk, sigma, cfg.detector.calibration_trials,
                              seed=seed_for(cfg.seed, "calibration"))
    result = run_detector(growth, cal.threshold, cfg.detector.initial_regime, start_day)
    return Detection(growth, cal, result, start_day)


def learn(series: dp.EpidemicSeries, cfg: PipelineConfig, checkpoint_days=()) -> FilterResult:
    f = cfg.filter
    prior = prior_from_observation(series.infected[0], series.removed[0], series.population,
                                   f.prior_spread, f.prior_beta, f.prior_gamma)
    return run_filter(series, prior, f.particles, f.noise(), f.obs_model(),
                      substream(cfg.seed, "filter"), checkpoint_stride=None,
                      checkpoint_days=checkpoint_days)


@dataclass
class OriginContext:
    day: int
    regime: str
    since_day: int | None
    slope: float


def origin_context(learned: FilterResult, detection: DetectionResult, day: int,
                   force: bool = False) -> OriginContext:
    """Regime and infection-rate slope to use for a forecast issued on ``day``.

    The slope is averaged since the last declared change; when fewer than two
    days have passed the window is widened to the last two days.
    """
    last = detection.timeline.last_change(day)
    regime = detection.timeline.regime_at(day)
    if last is None:
        if not force:
            raise ConfigError(f"forecast origin day {day} precedes the first detection; "
                              "use force to forecast with zero slope")
        return OriginContext(day, regime, None, 0.0)
    since = min(last.day, day - 2)
    if since < 0:
        return OriginContext(day, regime, None, 0.0)
    slope = estimate_slope(learned.summary.mean["beta"], since, day, regime)
    return OriginContext(day, regime, last.day, slope)


SCENARIO_INDEX = {"A": 0, "B": 1}


def forecast_at(series: dp.EpidemicSeries, learned: FilterResult, ctx: OriginContext,
                scenario: str, K: int, cfg: PipelineConfig) -> ForecastResult:
    ckpt = learned.checkpoints.get(ctx.day)
    if ckpt is None:
        raise ConfigError(f"no learner checkpoint for day {ctx.day}")
    beta0 = ckpt.mean("beta")
    spec = ScenarioSpec(scenario, ctx.slope, beta0, ckpt.mean("gamma"),
                        cfg.forecast.rise_days, cfg.forecast.fall_days)
    traj = build_scenario(spec, K)
    noise = cfg.filter.noise() if cfg.forecast.process_noise else ZERO_NOISE
    rng = substream(cfg.seed, "forecast", ctx.day, SCENARIO_INDEX[scenario])
    res = ensemble_forecast(ckpt, traj, noise, K, rng, beta0=beta0)
    origin = series.dates[ctx.day]
    res.dates = tuple(origin + timedelta(days=d) for d in range(1, K + 1))
    res.meta = {"origin_date": series.dates[ctx.day].isoformat(), "scenario": scenario,
                "slope": ctx.slope, "regime": ctx.regime, "beta0": beta0, "seed": cfg.seed}
    return res
