"""Bootstrap particle filter over SIR states and time-varying rates.

The ensemble is stored column-wise (one array per quantity) so prediction
and weighting are vectorised over particles.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Iterator

import numpy as np

from .data import EpidemicSeries
from .errors import (
    DataError,
    DegenerateUpdateError,
    InsufficientDataError,
    InvalidPriorError,
)
from .sir import NoiseConfig, SirParams, SirState, step, walk_params

QUANTILES = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class Particle:
    state: SirState
    params: SirParams
    weight: float


@dataclass(frozen=True)
class Ensemble:
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    weights: np.ndarray
    day: int
    N: float

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    @property
    def state(self) -> SirState:
        return SirState(self.s, self.i, self.r)

    @property
    def params(self) -> SirParams:
        return SirParams(self.beta, self.gamma)

    def particle(self, m: int) -> Particle:
        return Particle(SirState(float(self.s[m]), float(self.i[m]), float(self.r[m])),
                        SirParams(float(self.beta[m]), float(self.gamma[m])),
                        float(self.weights[m]))

    def __iter__(self) -> Iterator[Particle]:
        return (self.particle(m) for m in range(self.size))

    def mean(self, name: str) -> float:
        v = getattr(self, name)
        # offset by the first particle so identical particles give an exact mean
        return float(v[0] + np.dot(self.weights, v - v[0]))

    def take(self, idx: np.ndarray) -> "Ensemble":
        """Ensemble made of the particles at ``idx`` with uniform weights."""
        m = len(idx)
        return replace(self, s=self.s[idx], i=self.i[idx], r=self.r[idx],
                       beta=self.beta[idx], gamma=self.gamma[idx], weights=np.full(m, 1.0 / m))


@dataclass(frozen=True)
class Prior:
    """Uniform ranges ``(lo, hi)``; susceptibles default to ``N - i - r``."""

    i: tuple[float, float]
    r: tuple[float, float]
    beta: tuple[float, float] = (0.01, 1.0)
    gamma: tuple[float, float] = (0.01, 0.5)
    s: tuple[float, float] | None = None


@dataclass(frozen=True)
class ObsModel:
    """Gaussian observation noise on infected and removed counts.

    With ``relative=True`` the stds are fractions of the observed value,
    floored at ``floor`` persons; otherwise they are absolute persons.
    """

    infected_noise_std: float = 0.05
    removed_noise_std: float = 0.05
    relative: bool = True
    floor: float = 10.0

    def __post_init__(self):
        if not (self.infected_noise_std > 0 and self.removed_noise_std > 0):
            raise ValueError("observation noise stds must be > 0")

    def stds(self, infected: float, removed: float) -> tuple[float, float]:
        if not self.relative:
            return self.infected_noise_std, self.removed_noise_std
        return (max(self.infected_noise_std * abs(infected), self.floor),
                max(self.removed_noise_std * abs(removed), self.floor))


def prior_from_observation(infected: float, removed: float, N: float, spread: float = 0.1,
                           beta=(0.01, 1.0), gamma=(0.01, 0.5)) -> Prior:
    """Prior centred on the first observation, +/- ``spread`` relative."""
    i_lo, i_hi = infected * (1 - spread), infected * (1 + spread)
    r_lo, r_hi = removed * (1 - spread), removed * (1 + spread)
    r_hi = min(r_hi, N - i_hi)
    r_lo = min(r_lo, r_hi)
    return Prior(i=(i_lo, i_hi), r=(r_lo, r_hi), beta=tuple(beta), gamma=tuple(gamma))


def init_ensemble(prior: Prior, M: int, N: float, rng: np.random.Generator, day: int = 0) -> Ensemble:
    if M < 2:
        raise InvalidPriorError(f"ensemble size must be >= 2, got {M}")
    ranges = {"i": prior.i, "r": prior.r, "beta": prior.beta, "gamma": prior.gamma}
    if prior.s is not None:
        ranges["s"] = prior.s
    for name, (lo, hi) in ranges.items():
        if not lo <= hi:
            raise InvalidPriorError(f"inverted prior range for {name}: ({lo}, {hi})")
        if lo < 0:
            raise InvalidPriorError(f"negative prior bound for {name}")
        if name in ("s", "i", "r") and hi > N:
            raise InvalidPriorError(f"prior range for {name} exceeds population")
    draw = {k: rng.uniform(lo, hi, M) for k, (lo, hi) in ranges.items()}
    i, r = draw["i"], draw["r"]
    if prior.s is None:
        if np.any(i + r > N):
            raise InvalidPriorError("prior allows i + r > N")
        s = N - i - r
    else:
        total = draw["s"] + i + r
        if np.any(total <= 0):
            raise InvalidPriorError("prior allows an empty population")
        scale = N / total
        s, i, r = draw["s"] * scale, i * scale, r * scale
    return Ensemble(s, i, r, draw["beta"], draw["gamma"], np.full(M, 1.0 / M), day, float(N))


def predict(ens: Ensemble, noise: NoiseConfig, rng: np.random.Generator) -> Ensemble:
    params = walk_params(SirParams(ens.beta, ens.gamma), noise, rng)
    nxt = step(SirState(ens.s, ens.i, ens.r), params, ens.N, noise, rng)
    shape = ens.weights.shape
    return replace(ens, s=np.broadcast_to(nxt.s, shape).copy(), i=np.broadcast_to(nxt.i, shape).copy(),
                   r=np.broadcast_to(nxt.r, shape).copy(),
                   beta=np.broadcast_to(params.beta, shape).copy(),
                   gamma=np.broadcast_to(params.gamma, shape).copy(), day=ens.day + 1)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling."""
    M = len(weights)
    positions = (rng.uniform() + np.arange(M)) / M
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


def update(ens: Ensemble, obs: tuple[float, float], obs_model: ObsModel,
           rng: np.random.Generator, resample_threshold: float = 0.5) -> Ensemble:
    """Reweight by the Gaussian likelihood of ``(infected, removed)``.

    Resamples systematically when the effective sample size drops below
    ``resample_threshold * M``.
    """
    y_i, y_r = obs
    if not (np.isfinite(y_i) and np.isfinite(y_r)) or y_i < 0 or y_r < 0:
        raise DataError(f"observation must be finite and >= 0, got {obs}")
    sd_i, sd_r = obs_model.stds(y_i, y_r)
    loglik = -0.5 * (((ens.i - y_i) / sd_i) ** 2 + ((ens.r - y_r) / sd_r) ** 2)
    with np.errstate(divide="ignore"):
        logw = np.log(ens.weights) + loglik
    top = logw.max()
    # the weights are all zero in linear scale: nothing left to normalise
    if not np.isfinite(top) or top < np.log(np.finfo(float).tiny):
        raise DegenerateUpdateError(day=ens.day)
    w = np.exp(logw - top)
    w /= w.sum()
    out = replace(ens, weights=w)
    if out.ess < resample_threshold * ens.size:
        out = out.take(systematic_resample(w, rng))
    return out


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q) -> np.ndarray:
    """Left-continuous inverse of the weighted empirical CDF."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cdf = np.cumsum(weights[order])
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, np.atleast_1d(q) - 1e-12, side="left")
    return v[np.minimum(idx, len(v) - 1)]


SUMMARY_FIELDS = ("i", "r", "beta", "gamma")


@dataclass
class PosteriorSummary:
    """Per-day posterior mean and 5/50/95% quantiles of i, r, beta, gamma."""

    dates: tuple[date, ...]
    mean: dict[str, np.ndarray]
    q05: dict[str, np.ndarray]
    q50: dict[str, np.ndarray]
    q95: dict[str, np.ndarray]
    std: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def allocate(cls, dates) -> "PosteriorSummary":
        n = len(dates)
        mk = lambda: {k: np.empty(n) for k in SUMMARY_FIELDS}  # noqa: E731
        return cls(tuple(dates), mk(), mk(), mk(), mk(), mk())

    def record(self, k: int, ens: Ensemble) -> None:
        for name in SUMMARY_FIELDS:
            vals = getattr(ens, name)
            m = float(np.dot(ens.weights, vals))
            self.mean[name][k] = m
            self.std[name][k] = float(np.sqrt(max(np.dot(ens.weights, (vals - m) ** 2), 0.0)))
            self.q05[name][k], self.q50[name][k], self.q95[name][k] = weighted_quantile(
                vals, ens.weights, QUANTILES)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["date"]
        for name in SUMMARY_FIELDS:
            head += [f"{name}_mean", f"{name}_q05", f"{name}_q50", f"{name}_q95"]
        w.writerow(head)
        for k, d in enumerate(self.dates):
            row = [d.isoformat() if hasattr(d, "isoformat") else d]
            for name in SUMMARY_FIELDS:
                row += [repr(float(x[name][k])) for x in (self.mean, self.q05, self.q50, self.q95)]
            w.writerow(row)
        return buf.getvalue()


@dataclass
class FilterResult:
    summary: PosteriorSummary
    checkpoints: dict[int, Ensemble]
    ess: np.ndarray


def run_filter(series: EpidemicSeries, prior: Prior | None, M: int, noise: NoiseConfig,
               obs_model: ObsModel, rng: np.random.Generator, checkpoint_stride: int | None = 1,
               checkpoint_days=None) -> FilterResult:
    """Alternate predict/update over every day of ``series``.

    Day 0 is initialised from ``prior`` (or from the first observation when
    ``prior`` is None) and updated with the day-0 observation. Checkpoints
    are kept every ``checkpoint_stride`` days and on ``checkpoint_days``.
    """
    n = len(series)
    if n < 2:
        raise InsufficientDataError(f"filter needs at least 2 days, got {n}")
    N = series.population
    if prior is None:
        prior = prior_from_observation(series.infected[0], series.removed[0], N)
    wanted = set(checkpoint_days or ())
    summary = PosteriorSummary.allocate(series.dates)
    checkpoints: dict[int, Ensemble] = {}
    ess = np.empty(n)
    ens = init_ensemble(prior, M, N, rng)
    for k in range(n):
        if k > 0:
            ens = predict(ens, noise, rng)
        try:
            ens = update(ens, (series.infected[k], series.removed[k]), obs_model, rng)
        except DegenerateUpdateError as exc:
            raise DegenerateUpdateError(day=k) from exc
        summary.record(k, ens)
        ess[k] = ens.ess
        if (checkpoint_stride and k % checkpoint_stride == 0) or k in wanted:
            checkpoints[k] = ens
    return FilterResult(summary, checkpoints, ess)


def estimate_slope(beta_means, since_day: int, at_day: int, regime: str) -> float:
    """Average daily change of the infection rate over ``(since_day, at_day]``.

    A slope that contradicts the declared regime (falling while critical,
    rising while controlled) is replaced by zero.
    """
    b = np.asarray(beta_means, dtype=float)
    if at_day - since_day < 2:
        raise InsufficientDataError(
            f"slope window ({since_day}, {at_day}] spans fewer than 2 days")
    if since_day < 0 or at_day >= len(b):
        raise InsufficientDataError(f"rate estimates do not cover days {since_day}..{at_day}")
    slope = float(np.mean(np.diff(b[since_day:at_day + 1])))
    if regime == "critical" and slope < 0:
        return 0.0
    if regime == "controlled" and slope > 0:
        return 0.0
    return slope
