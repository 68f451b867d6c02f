"""Growth-rate quickest detection (MAST).

The growth rate ``x[k] = p[k] / p[k-1]`` of smoothed daily new positives is
treated as Gaussian with unknown, time-varying mean and a windowed std
estimate. Each day contributes the generalised log-likelihood ratio of
"mean > 1" against "mean <= 1" with the mean maximised separately under each
hypothesis, which gives the signed quadratic

    l = (x - 1) |x - 1| / (2 sigma^2)

for onset watching and ``-l`` for termination watching. The increments are
accumulated with a Page/CUSUM recursion floored at zero; a regime change is
declared when the statistic reaches the threshold, after which the
statistic is reset and the watched direction inverted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .errors import (
    CalibrationInfeasibleError,
    InsufficientDataError,
    InvalidSigmaError,
    InvalidWindowError,
)

ONSET = "onset"
TERMINATION = "termination"
CONTROLLED = "controlled"
CRITICAL = "critical"

SIGMA_FLOOR = 1e-4


def watch_direction(regime: str) -> str:
    if regime == CONTROLLED:
        return ONSET
    if regime == CRITICAL:
        return TERMINATION
    raise ValueError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class GrowthSeries:
    """Growth rates and their windowed stds; undefined entries are NaN."""

    dates: tuple
    x: np.ndarray
    sigma: np.ndarray

    @property
    def first_valid(self) -> int:
        ok = np.flatnonzero(np.isfinite(self.x) & np.isfinite(self.sigma))
        return int(ok[0]) if ok.size else len(self.x)


def growth_rate(p_smoothed, window_sigma: int = 20, denom_floor: float = 1.0,
                dates=None) -> GrowthSeries:
    p = np.asarray(p_smoothed, dtype=float)
    if window_sigma < 2:
        raise InvalidWindowError(f"sigma window must be >= 2, got {window_sigma}")
    if p.size < 3:
        raise InsufficientDataError(f"need at least 3 days of positives, got {p.size}")
    q = np.maximum(p, denom_floor)
    x = np.full(p.size, np.nan)
    x[1:] = q[1:] / q[:-1]
    sigma = np.full(p.size, np.nan)
    for k in range(2, p.size):
        lo = max(1, k - window_sigma + 1)
        sigma[k] = max(float(np.std(x[lo:k + 1], ddof=1)), SIGMA_FLOOR)
    if dates is None:
        dates = tuple(range(p.size))
    return GrowthSeries(tuple(dates), x, sigma)


def mast_increment(x, sigma, direction: str = ONSET):
    """Per-day log-likelihood-ratio increment; vectorised over arrays."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise InvalidSigmaError(f"sigma must be > 0, got {sigma}")
    d = np.asarray(x, dtype=float) - 1.0
    ell = d * np.abs(d) / (2.0 * sigma ** 2)
    if direction == TERMINATION:
        ell = -ell
    elif direction != ONSET:
        raise ValueError(f"unknown direction {direction!r}")
    return float(ell) if np.ndim(ell) == 0 else ell


@dataclass(frozen=True)
class MastState:
    t: float = 0.0
    direction: str = ONSET
    start_day: int = 0
    threshold: float = 1.0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("statistic must be >= 0")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")

    @property
    def alarm(self) -> bool:
        return self.t >= self.threshold


def mast_update(state: MastState, x_k: float, sigma_k: float) -> MastState:
    ell = mast_increment(x_k, sigma_k, state.direction)
    return replace(state, t=max(0.0, state.t + ell))


def cusum_path(increments) -> np.ndarray:
    """Page recursion ``t_n = max(0, t_{n-1} + l_n)`` from ``t_0 = 0``."""
    out = np.empty(len(increments))
    t = 0.0
    for n, ell in enumerate(increments):
        t = max(0.0, t + ell)
        out[n] = t
    return out


# --- threshold calibration -------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    threshold: float
    threshold_stderr: float
    mean_time: float
    mean_time_stderr: float
    target_time: float
    trials: int
    censored: int

    @property
    def risk(self) -> float:
        return 1.0 / self.target_time


class _NullPaths:
    """Null-hypothesis statistic paths grown lazily, one RNG stream per trial.

    Each trial keeps the record values of its running maximum; the first
    crossing time of any threshold ``h`` is then the time of the first
    record ``>= h``. Re-using the same paths for every candidate ``h``
    makes the estimated mean crossing time monotone in ``h``.
    """

    chunk = 4096

    def __init__(self, sigma_profile, trials, max_days, seed):
        self.sigma = np.atleast_1d(np.asarray(sigma_profile, dtype=float))
        if np.any(~(self.sigma > 0)):
            raise InvalidSigmaError("sigma profile must be > 0")
        self.max_days = int(max_days)
        seqs = np.random.SeedSequence(seed).spawn(trials)
        self.rngs = [np.random.default_rng(s) for s in seqs]
        self.t = np.zeros(trials)
        self.n = np.zeros(trials, dtype=np.int64)
        self.top = np.full(trials, -np.inf)
        self.rec_time = [np.empty(0, np.int64) for _ in range(trials)]
        self.rec_val = [np.empty(0) for _ in range(trials)]

    def _sigma_at(self, days):
        return self.sigma[days % len(self.sigma)]

    def extend(self, level: float) -> None:
        for j, rng in enumerate(self.rngs):
            while self.top[j] < level and self.n[j] < self.max_days:
                L = int(min(self.chunk, self.max_days - self.n[j]))
                days = self.n[j] + np.arange(L)
                sig = self._sigma_at(days)
                x = 1.0 + sig * rng.standard_normal(L)
                ell = mast_increment(x, sig, ONSET)
                csum = np.cumsum(ell)
                # reflected walk in closed form: t_n = S_n - min(-t_0, min_{k<=n} S_k)
                path = csum - np.minimum(-self.t[j], np.minimum.accumulate(csum))
                path = np.maximum(path, 0.0)
                before = np.maximum(
                    np.concatenate([[-np.inf], np.maximum.accumulate(path)[:-1]]), self.top[j])
                new = np.flatnonzero(path > before)
                if new.size:
                    self.rec_time[j] = np.concatenate([self.rec_time[j], days[new] + 1])
                    self.rec_val[j] = np.concatenate([self.rec_val[j], path[new]])
                    self.top[j] = path[new[-1]]
                self.t[j] = path[-1]
                self.n[j] += L

    def crossing_times(self, h: float):
        self.extend(h)
        times = np.empty(len(self.rngs))
        censored = np.zeros(len(self.rngs), dtype=bool)
        for j in range(len(self.rngs)):
            k = np.searchsorted(self.rec_val[j], h, side="left")
            if k < len(self.rec_val[j]):
                times[j] = self.rec_time[j][k]
            else:
                times[j] = self.max_days
                censored[j] = True
        return times, censored

    def mean_time(self, h: float):
        times, censored = self.crossing_times(h)
        se = float(np.std(times, ddof=1) / np.sqrt(len(times)))
        return float(times.mean()), se, int(censored.sum())


def null_crossing_times(h: float, sigma_profile=0.02, trials: int = 500, max_days: int = 10 ** 6,
                        seed: int = 0):
    """First threshold-crossing times of null statistic paths (mean-1 growth)."""
    paths = _NullPaths(sigma_profile, trials, max_days, seed)
    return paths.crossing_times(h)


def calibrate_threshold(risk: float, sigma_profile=0.02, trials: int = 1000,
                        max_days: int | None = None, seed: int = 0,
                        resolution: float = 1e-3) -> Calibration:
    """Smallest threshold whose null mean time to false alarm is ``>= 1/risk``.

    Null paths draw ``x ~ N(1, sigma_k^2)`` with ``sigma_k`` cycling through
    ``sigma_profile``. The search brackets by doubling and then bisects down
    to ``resolution`` (relative). Crossing means the statistic reaches the
    threshold, so ``risk = 1`` gives ``h = 0``.
    """
    if not 0 < risk <= 1:
        raise ValueError(f"risk must be in (0, 1], got {risk}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    target = 1.0 / risk
    if max_days is None:
        max_days = int(np.ceil(50 * target))
    paths = _NullPaths(sigma_profile, trials, max_days, seed)
    if target <= 1.0:
        mean, se, cens = paths.mean_time(0.0)
        return Calibration(0.0, 0.0, mean, se, target, trials, cens)
    if max_days < target:
        raise CalibrationInfeasibleError(
            f"target mean time {target:.4g} days exceeds the simulation budget of {max_days} days",
            best_threshold=float("inf"), best_mean_time=float(max_days))

    lo, hi = 0.0, 1.0
    while True:
        mean, _, cens = paths.mean_time(hi)
        if mean >= target:
            break
        if cens == trials:
            raise CalibrationInfeasibleError("every null path hit the day budget",
                                             best_threshold=hi, best_mean_time=mean)
        lo, hi = hi, 2.0 * hi
    while hi - lo > resolution * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if paths.mean_time(mid)[0] >= target:
            hi = mid
        else:
            lo = mid
    mean, se, cens = paths.mean_time(hi)
    # std-error of h from the local slope of mean time against h
    dh = 0.05 * hi
    slope = (paths.mean_time(hi + dh)[0] - paths.mean_time(max(hi - dh, 0.0))[0]) / (
        hi + dh - max(hi - dh, 0.0))
    h_se = se / slope if slope > 0 else float("inf")
    return Calibration(float(hi), float(h_se), mean, se, target, trials, cens)


# --- detector ----------------------------------------------------------------


@dataclass(frozen=True)
class RegimeEvent:
    day: int
    event: str  # "onset-declared" | "termination-declared"
    date: object = None


@dataclass
class RegimeTimeline:
    initial_regime: str
    events: list[RegimeEvent] = field(default_factory=list)

    @property
    def current_regime(self) -> str:
        return self.regime_at(10 ** 12)

    def regime_at(self, day: int) -> str:
        regime = self.initial_regime
        for e in self.events:
            if e.day <= day:
                regime = CRITICAL if e.event == "onset-declared" else CONTROLLED
        return regime

    def last_change(self, day: int) -> RegimeEvent | None:
        last = None
        for e in self.events:
            if e.day <= day:
                last = e
        return last

    def to_json(self) -> str:
        def fmt(d):
            return d.isoformat() if isinstance(d, date) else d
        return json.dumps({
            "initial_regime": self.initial_regime,
            "current_regime": self.current_regime,
            "events": [{"day": e.day, "date": fmt(e.date), "event": e.event} for e in self.events],
        }, indent=1)


@dataclass
class Trace:
    episode: int
    direction: str
    start_day: int
    values: list[float] = field(default_factory=list)

    @property
    def days(self) -> range:
        return range(self.start_day, self.start_day + len(self.values))


@dataclass
class DetectionResult:
    timeline: RegimeTimeline
    traces: list[Trace]
    threshold: float
    dates: tuple = ()

    def traces_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "episode", "direction", "t", "threshold"])
        for tr in self.traces:
            for day, t in zip(tr.days, tr.values):
                d = self.dates[day] if day < len(self.dates) else day
                d = d.isoformat() if isinstance(d, date) else d
                w.writerow([d, tr.episode, tr.direction, repr(float(t)), repr(float(self.threshold))])
        return buf.getvalue()


def run_detector(growth: GrowthSeries, h: float, initial_regime: str = CONTROLLED,
                 start_day: int | None = None) -> DetectionResult:
    """Run the reset-and-invert state machine from ``start_day`` to the end."""
    if start_day is None:
        start_day = growth.first_valid
    if start_day < growth.first_valid:
        raise InsufficientDataError(
            f"growth statistics undefined before day {growth.first_valid}; start_day={start_day}")
    timeline = RegimeTimeline(initial_regime)
    state = MastState(0.0, watch_direction(initial_regime), start_day, h)
    traces = [Trace(0, state.direction, start_day)]
    n = len(growth.x)
    for k in range(start_day, n):
        x, sig = growth.x[k], growth.sigma[k]
        if not (np.isfinite(x) and np.isfinite(sig)):
            raise InsufficientDataError(f"growth statistics undefined on day {k}")
        state = mast_update(state, x, sig)
        traces[-1].values.append(state.t)
        if state.alarm:
            kind = "onset-declared" if state.direction == ONSET else "termination-declared"
            timeline.events.append(RegimeEvent(k, kind, growth.dates[k]))
            direction = TERMINATION if state.direction == ONSET else ONSET
            state = MastState(0.0, direction, k + 1, h)
            if k + 1 < n:
                traces.append(Trace(len(traces), direction, k + 1))
    return DetectionResult(timeline, traces, h, tuple(growth.dates))
