"""Synthetic epidemic series with a known infection-rate schedule.

Used for demos, closed-loop checks and the property-based acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .data import EpidemicSeries, RawSeries, build_epidemic_series, raw_to_long_csv
from .sir import NoiseConfig, SirState, Trajectory, simulate


def piecewise_rates(days: int, breaks: list[tuple[int, float]]) -> np.ndarray:
    """Per-day values from ``[(start_day, value), ...]`` sorted by start day."""
    out = np.empty(days)
    for k, (start, value) in enumerate(breaks):
        stop = breaks[k + 1][0] if k + 1 < len(breaks) else days
        out[start:stop] = value
    return out


@dataclass
class SyntheticEpidemic:
    truth: Trajectory
    series: EpidemicSeries
    raw: RawSeries

    def to_csv(self, region: str = "Synthland") -> str:
        return raw_to_long_csv(self.raw, region)


def make_epidemic(beta, gamma, N: float, i0: float, seed: int, start: date = date(2020, 3, 1),
                  process_noise_rel: float = 0.02, obs_noise_rel: float = 0.0,
                  r0: float = 0.0) -> SyntheticEpidemic:
    """Simulate an epidemic and report it as integer cumulative counts.

    ``beta`` and ``gamma`` are per-day arrays (entry k drives day k -> k+1).
    Reported confirmed = round(i + r) and recovered = round(r), optionally
    with multiplicative reporting noise on the active and removed counts.
    """
    beta = np.asarray(beta, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), beta.shape)
    rng = np.random.default_rng(seed)
    days = len(beta)
    tr = simulate(SirState(N - i0 - r0, i0, r0), (beta, gamma), days, N,
                  NoiseConfig(flow_noise_rel=process_noise_rel), rng)
    i, r = tr.i.copy(), tr.r.copy()
    if obs_noise_rel > 0:
        i = np.maximum(i * (1 + obs_noise_rel * rng.standard_normal(days + 1)), 0.0)
        r = np.maximum(r * (1 + obs_noise_rel * rng.standard_normal(days + 1)), 0.0)
        r = np.maximum.accumulate(r)
    recovered = np.round(r)
    confirmed = np.maximum.accumulate(np.round(i) + recovered)
    dates = tuple(start + timedelta(days=k) for k in range(days + 1))
    raw = RawSeries(dates, confirmed, recovered, np.zeros(days + 1))
    return SyntheticEpidemic(tr, build_epidemic_series(raw, N), raw)


def demo_waves(seed: int = 0, days: int = 240, N: float = 5e7) -> SyntheticEpidemic:
    """Three growth phases separated by controlled phases."""
    beta = piecewise_rates(days, [(0, 0.07), (60, 0.16), (115, 0.07), (165, 0.15), (215, 0.08)])
    return make_epidemic(beta, 0.1, N, i0=2e4, seed=seed, r0=1e4)
