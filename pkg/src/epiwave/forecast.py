"""Infection-rate scenarios and ensemble forecasts.

Scenario A carries the current infection-rate slope for ``rise_days`` and
then holds the attained value (no countermeasures). Scenario B, when the
rate is rising, continues the rise for ``rise_days``, then falls at the
opposite slope for ``fall_days`` and holds; with a non-positive slope it is
identical to A.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidHorizonError, UndefinedMapeError
from .filtering import Ensemble, systematic_resample, weighted_quantile
from .sir import NoiseConfig, SirParams, SirState, step

SCENARIOS = ("A", "B")
CI_Z90 = 1.645


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    slope: float
    beta0: float
    gamma0: float = 0.0
    rise_days: int = 15
    fall_days: int = 30

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.kind!r}")
        if self.rise_days < 0 or self.fall_days < 0:
            raise ConfigError("rise_days and fall_days must be >= 0")
        if self.beta0 < 0 or self.gamma0 < 0:
            raise ConfigError("beta0 and gamma0 must be >= 0")


def build_scenario(spec: ScenarioSpec, K: int) -> np.ndarray:
    """Infection rate for forecast days ``1..K`` (array index ``d - 1``)."""
    if K < 1:
        raise InvalidHorizonError(f"horizon must be >= 1, got {K}")
    d = np.arange(1, K + 1, dtype=float)
    rise = float(spec.rise_days)
    if spec.kind == "A" or spec.slope <= 0:
        beta = spec.beta0 + spec.slope * np.minimum(d, rise)
    else:
        up = np.minimum(d, rise)
        down = np.clip(d - rise, 0.0, float(spec.fall_days))
        beta = spec.beta0 + spec.slope * (up - down)
    return np.maximum(beta, 0.0)


@dataclass
class ForecastResult:
    """Per-day ensemble summaries for forecast days ``1..K``."""

    forecast_day: int
    M: int
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    q05: dict[str, np.ndarray]
    q95: dict[str, np.ndarray]
    dates: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.mean["i"])

    def gaussian_band(self, name: str = "i") -> tuple[np.ndarray, np.ndarray]:
        """``mean -/+ 1.645 std``, the Gaussian counterpart of the q05/q95 band."""
        m, s = self.mean[name], self.std[name]
        return m - CI_Z90 * s, m + CI_Z90 * s

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "i_mean", "i_std", "i_q05", "i_q95",
                    "r_mean", "r_std", "r_q05", "r_q95"])
        for d in range(self.K):
            label = self.dates[d] if d < len(self.dates) else self.forecast_day + d + 1
            label = label.isoformat() if hasattr(label, "isoformat") else label
            row = [label]
            for name in ("i", "r"):
                row += [repr(float(x[name][d])) for x in (self.mean, self.std, self.q05, self.q95)]
            w.writerow(row)
        return buf.getvalue()

    def header_json(self) -> str:
        return json.dumps({"forecast_day": self.forecast_day, "K": self.K, "M": self.M,
                           **self.meta}, indent=1, default=str)


def ensemble_forecast(checkpoint: Ensemble, traj, noise: NoiseConfig, K: int,
                      rng: np.random.Generator, beta0: float | None = None,
                      resample: bool = True) -> ForecastResult:
    """Propagate the posterior ensemble ``K`` days under a rate trajectory.

    Each particle follows ``traj`` scaled by its own ratio to ``beta0``
    (the posterior mean rate by default), so the posterior spread of the
    infection rate is carried into the forecast. Recovery rates stay at
    each particle's value; rates do not random-walk, only flows get
    process noise.
    """
    traj = np.asarray(traj, dtype=float)
    if K < 1:
        raise InvalidHorizonError(f"horizon must be >= 1, got {K}")
    if traj.shape != (K,):
        raise ConfigError(f"rate trajectory has length {traj.size}, horizon is {K}")
    ens = checkpoint
    if resample:
        ens = ens.take(systematic_resample(ens.weights, rng))
    if beta0 is None:
        beta0 = ens.mean("beta")
    ratio = ens.beta / beta0 if beta0 > 0 else np.ones(ens.size)
    noise = noise.without_walk()

    state = SirState(ens.s, ens.i, ens.r)
    out = {k: np.empty((K, ens.size)) for k in ("i", "r")}
    for d in range(K):
        params = SirParams(traj[d] * ratio, ens.gamma)
        state = step(state, params, ens.N, noise, rng)
        out["i"][d] = state.i
        out["r"][d] = state.r
    w = ens.weights
    mean, std, q05, q95 = {}, {}, {}, {}
    for name, vals in out.items():
        # offset by the first particle so identical particles give an exact mean
        mean[name] = vals[:, 0] + (vals - vals[:, :1]) @ w
        std[name] = np.sqrt(np.maximum(((vals - mean[name][:, None]) ** 2) @ w, 0.0))
        if np.allclose(w, w[0]):
            q05[name], q95[name] = np.quantile(vals, [0.05, 0.95], axis=1, method="inverted_cdf")
        else:
            qs = np.array([weighted_quantile(v, w, (0.05, 0.95)) for v in vals])
            q05[name], q95[name] = qs[:, 0], qs[:, 1]
    return ForecastResult(checkpoint.day, ens.size, mean, std, q05, q95)


def mape(forecast_i, actual_i, horizon: int | None = None) -> float:
    """Mean absolute percentage error over the first ``horizon`` days."""
    f = np.asarray(forecast_i, dtype=float)
    a = np.asarray(actual_i, dtype=float)
    if horizon is None:
        horizon = len(a)
    if horizon < 1 or len(f) < horizon or len(a) < horizon:
        raise InvalidHorizonError(f"series do not cover horizon {horizon}")
    f, a = f[:horizon], a[:horizon]
    zero = np.flatnonzero(a == 0)
    if zero.size:
        raise UndefinedMapeError((zero + 1).tolist())
    return float(100.0 / horizon * np.sum(np.abs(f - a) / np.abs(a)))
