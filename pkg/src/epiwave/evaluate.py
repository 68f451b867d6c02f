"""Rolling-origin evaluation of scenario forecasts against reported infected."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .data import EpidemicSeries
from .errors import ConfigError, InsufficientDataError
from .forecast import SCENARIOS, mape
from .pipeline import Detection, detect, forecast_at, learn, origin_context

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalRow:
    origin_day: int
    origin_date: object
    scenario: str
    horizon: int
    mape: float
    regime: str
    slope: float


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    omitted: list[tuple[int, str, int]] = field(default_factory=list)

    def summary(self) -> dict[tuple[str, int], float]:
        """Time-averaged MAPE per (scenario, horizon)."""
        acc: dict[tuple[str, int], list[float]] = {}
        for r in self.rows:
            acc.setdefault((r.scenario, r.horizon), []).append(r.mape)
        return {k: float(np.mean(v)) for k, v in sorted(acc.items())}

    def series(self, scenario: str, horizon: int) -> tuple[list, np.ndarray]:
        rows = [r for r in self.rows if r.scenario == scenario and r.horizon == horizon]
        return [r.origin_date for r in rows], np.array([r.mape for r in rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["origin_date", "scenario", "horizon_days", "mape_pct", "regime", "slope"])
        for r in self.rows:
            d = r.origin_date.isoformat() if hasattr(r.origin_date, "isoformat") else r.origin_date
            w.writerow([d, r.scenario, r.horizon, repr(r.mape), r.regime, repr(r.slope)])
        return buf.getvalue()

    def summary_json(self, **meta) -> str:
        summ = [{"scenario": s, "horizon_days": h, "mean_mape_pct": v}
                for (s, h), v in self.summary().items()]
        return json.dumps({"summary": summ, "rows": len(self.rows),
                           "omitted": len(self.omitted), **meta}, indent=1, default=str)


def forecast_origins(n_days: int, first_day: int, horizons, stride: int) -> list[int]:
    """Origins from ``first_day`` that leave room for at least the shortest horizon."""
    last = n_days - 1 - min(horizons)
    return list(range(first_day, last + 1, stride))


def rolling_evaluate(series: EpidemicSeries, cfg: PipelineConfig,
                     detection: Detection | None = None,
                     scenarios=SCENARIOS) -> EvalReport:
    horizons = sorted(int(h) for h in cfg.forecast.horizons)
    if not horizons:
        raise ConfigError("forecast horizons must not be empty")
    if cfg.forecast.stride > len(series):
        raise ConfigError(f"stride {cfg.forecast.stride} exceeds series length {len(series)}")
    if detection is None:
        detection = detect(series, cfg)
    events = detection.result.timeline.events
    if not events:
        raise InsufficientDataError("no regime change detected; nothing to evaluate")
    origins = forecast_origins(len(series), events[0].day, horizons, cfg.forecast.stride)
    if not origins:
        raise InsufficientDataError("series too short after the first detection for any horizon")
    learned = learn(series, cfg, checkpoint_days=origins)

    report = EvalReport()
    n = len(series)
    for d in origins:
        ctx = origin_context(learned, detection.result, d)
        fit = [h for h in horizons if d + h < n]
        for h in horizons:
            if h not in fit:
                for sc in scenarios:
                    report.omitted.append((d, sc, h))
                log.debug("origin %s: horizon %d runs past the data, omitted", series.dates[d], h)
        for sc in scenarios:
            fc = forecast_at(series, learned, ctx, sc, max(fit), cfg)
            for h in fit:
                err = mape(fc.mean["i"], series.infected[d + 1:d + 1 + h], h)
                report.rows.append(EvalRow(d, series.dates[d], sc, h, err, ctx.regime, ctx.slope))
    if report.omitted:
        log.info("%d (origin, scenario, horizon) rows omitted near the series end",
                 len(report.omitted))
    return report
