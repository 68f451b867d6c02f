"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(and immediately with ``pytest -s``). Criteria 9-11 need the public JHU CSSE
US time series; they download it (or read it from ``$EPIWAVE_JHU_DIR``) and
are skipped when neither is available.
"""

from __future__ import annotations

import os
import time
import urllib.request
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, make_series
from epiwave.cli import main
from epiwave.config import FilterConfig, from_mapping, substream
from epiwave.evaluate import rolling_evaluate
from epiwave.filtering import Prior, run_filter
from epiwave.forecast import ensemble_forecast, mape
from epiwave.mast import (
    GrowthSeries,
    calibrate_threshold,
    cusum_path,
    mast_increment,
    null_crossing_times,
    run_detector,
)
from epiwave.pipeline import detect, ingest, learn
from epiwave.sir import NoiseConfig, SirParams, SirState, simulate, step
from epiwave.synthetic import demo_waves, make_epidemic


def record(number: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append((str(number), status, detail))
    print(f"\ncriterion {number}: {status}  {detail}")
    assert ok, detail


def skip(number: int, why: str) -> None:
    ACCEPTANCE_LINES.append((str(number), "SKIP", why))
    pytest.skip(why)


# --- property-based suite ----------------------------------------------------


def test_c1_sir_conservation():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        N = 10 ** rng.uniform(2, 9)
        s = rng.uniform(0, N)
        i = rng.uniform(0, N - s)
        state = SirState(s, i, N - s - i)
        noise = NoiseConfig(state_noise_std=rng.uniform(0, 0.01) * N,
                            flow_noise_rel=rng.uniform(0, 0.5))
        for _ in range(100):
            params = SirParams(rng.uniform(0, 2), rng.uniform(0, 1))
            state = step(state, params, N, noise, rng)
            worst = max(worst, abs(state.s + state.i + state.r - N) / N)
            assert min(state.s, state.i, state.r) >= 0
    record(1, worst <= 1e-9, f"10^4 random steps, max |s+i+r-N|/N = {worst:.2e} (limit 1e-9)")


def brute_force(incs):
    return np.array([max(0.0, max(sum(incs[j:n + 1]) for j in range(n + 1)))
                     for n in range(len(incs))])


def test_c2_cusum_oracle():
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        # multiples of 2^-10 keep every partial sum exact, so equality is exact
        incs = list(np.round(rng.normal(0, 5, n) * 1024) / 1024)
        if not np.array_equal(cusum_path(incs), brute_force(incs)):
            mismatches += 1
    record(2, mismatches == 0, f"1000 sequences (length <= 20), {mismatches} mismatches")


def test_c3_increment_antisymmetry():
    xs = np.linspace(0.5, 1.5, 101)
    sigmas = np.geomspace(1e-4, 1.0, 41)
    X, S = np.meshgrid(xs, sigmas)
    anti = np.array_equal(mast_increment(X, S, "onset"), -mast_increment(X, S, "termination"))
    zero = np.all(mast_increment(np.ones_like(S), S, "onset") == 0) and np.all(
        mast_increment(np.ones_like(S), S, "termination") == 0)
    record(3, bool(anti and zero), f"{X.size} grid points: antisymmetric={anti}, zero at x=1={zero}")


def test_c4_threshold_calibration():
    cal2 = calibrate_threshold(1e-2, 0.02, trials=1000, seed=11)
    cal4 = calibrate_threshold(1e-4, 0.02, trials=1000, seed=11)
    t2, c2 = null_crossing_times(cal2.threshold, 0.02, trials=500, seed=2024)
    t4, c4 = null_crossing_times(cal4.threshold, 0.02, trials=500, seed=2024)
    r2, r4 = t2.mean() / 1e2, t4.mean() / 1e4
    ok = (cal4.threshold > cal2.threshold and abs(r2 - 1) <= 0.2 and abs(r4 - 1) <= 0.2
          and not c2.any() and not c4.any())
    record(4, ok, f"h(1e-2)={cal2.threshold:.2f}, h(1e-4)={cal4.threshold:.2f}; held-out mean "
                  f"false-alarm time / target = {r2:.3f}, {r4:.3f} (limit 1 +/- 0.2)")


def test_c5_synthetic_change_detection():
    h = calibrate_threshold(1e-4, 0.02, trials=1000, seed=5).threshold
    days, change = 260, 60
    delays, early = [], 0
    for trial in range(500):
        rng = np.random.default_rng(10_000 + trial)
        x = np.concatenate([[np.nan], 1.0 + 0.02 * rng.standard_normal(days - 1)])
        x[change:] += 0.06
        g = GrowthSeries(tuple(range(days)), x, np.full(days, 0.02))
        events = run_detector(g, h, "controlled", start_day=1).timeline.events
        if events and events[0].day < change:
            early += 1
        onset = [e.day for e in events if e.event == "onset-declared" and e.day >= change]
        delays.append(onset[0] - change if onset else np.inf)
    delays = np.array(delays)
    within = float(np.mean(delays <= 10))
    p95 = float(np.percentile(delays, 95))
    ok = within >= 0.95 and early == 0
    record(5, ok, f"h={h:.1f}: delay <= 10 days in {within:.1%} of 500 trials (need >= 95%), "
                  f"95th-percentile delay {p95:.0f} days, median {np.median(delays):.0f}; "
                  f"pre-change alarms {early}")


def step_truth(seed: int, days: int = 100, N: float = 1e8):
    rng = np.random.default_rng(seed)
    beta = np.where(np.arange(days) < 50, 0.30, 0.15)
    tr = simulate(SirState(N - 100, 100.0, 0.0), (beta, np.full(days, 0.1)), days, N,
                  NoiseConfig(flow_noise_rel=0.02), rng)
    i = np.maximum(tr.i * (1 + 0.05 * rng.standard_normal(days + 1)), 0.0)
    r = np.maximum(tr.r * (1 + 0.05 * rng.standard_normal(days + 1)), 0.0)
    # posterior on day k refers to the rate that produced day k from day k-1
    truth = np.concatenate([[beta[0]], beta])
    return make_series(i, r, N), truth


def test_c6_filter_recovery():
    f = FilterConfig()
    days = np.array([k for k in range(20, 101) if not 50 <= k < 60])
    errors, covered = [], []
    for rep in range(100):
        series, truth = step_truth(rep)
        res = run_filter(series, Prior(i=(50, 150), r=(0, 10)), 5000, f.noise(), f.obs_model(),
                         np.random.default_rng(1000 + rep), checkpoint_stride=None)
        sm = res.summary
        errors.append(np.abs(sm.mean["beta"][days] - truth[days]).max())
        covered.append((sm.q05["beta"][days] <= truth[days]) & (truth[days] <= sm.q95["beta"][days]))
    coverage = float(np.mean(covered))
    ok = errors[0] <= 0.05 and 0.80 <= coverage <= 0.97
    record(6, ok, f"run 0 max |mean beta - truth| = {errors[0]:.3f} (limit 0.05; "
                  f"{np.mean(np.array(errors) <= 0.05):.0%} of 100 runs within); "
                  f"90% CI coverage over 100 runs {coverage:.3f} (need 0.80-0.97)")


def test_c7_closed_loop_forecast():
    days, origin, change = 140, 70, 40
    d = np.arange(days, dtype=float)
    # rising rate that follows scenario A from the origin: 15 more days of rise, then flat
    beta = 0.12 + 0.002 * np.clip(np.minimum(d, origin + 15) - change, 0, None)
    f = FilterConfig()
    m14, m28 = [], []
    for seed in range(10):
        epi = make_epidemic(beta, 0.1, 1e7, i0=1000, r0=500, seed=seed)
        s = epi.series
        prior = Prior(i=(900, 1100), r=(450, 550), beta=tuple(f.prior_beta),
                      gamma=tuple(f.prior_gamma))
        res = run_filter(s, prior, 5000, f.noise(), f.obs_model(), substream(seed, "filter"),
                         checkpoint_stride=None, checkpoint_days=[origin])
        fc = ensemble_forecast(res.checkpoints[origin], beta[origin:origin + 28], f.noise(), 28,
                               substream(seed, "forecast"))
        actual = s.infected[origin + 1:origin + 29]
        m14.append(mape(fc.mean["i"], actual, 14))
        m28.append(mape(fc.mean["i"], actual, 28))
    ok = max(m14) < 5 and max(m28) < 10
    record(7, ok, f"10 runs, M=5000: 2-week MAPE max {max(m14):.2f}% (limit 5), "
                  f"4-week max {max(m28):.2f}% (limit 10)")


def test_c8_determinism(tmp_path):
    (tmp_path / "waves.csv").write_text(demo_waves(seed=0).to_csv("Synthland"))
    (tmp_path / "c.toml").write_text('seed = 21\n[data]\npath = "waves.csv"\n'
                                     'region = "Synthland"\npopulation = 5e7\n')
    files = ["series.csv", "traces.csv", "posterior.csv", "evaluation.csv"]
    for run in ("a", "b"):
        for cmd in ("ingest", "detect", "learn", "evaluate"):
            assert main([cmd, "-c", str(tmp_path / "c.toml"), "-o", str(tmp_path / run)]) == 0
    same = [f for f in files if (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()]
    record(8, len(same) == len(files), f"{len(same)}/{len(files)} CSV outputs byte-identical "
                                       f"across two seeded runs")


# --- paper-number reproduction on the JHU US series -----------------------------

JHU_BASE = ("https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/"
            "csse_covid_19_data/csse_covid_19_time_series/")
JHU_FILES = {q: f"time_series_covid19_{q}_global.csv" for q in ("confirmed", "recovered", "deaths")}
US_POPULATION = 328_239_523


@pytest.fixture(scope="module")
def jhu_dir(tmp_path_factory):
    local = os.environ.get("EPIWAVE_JHU_DIR")
    if local and all((Path(local) / f).exists() for f in JHU_FILES.values()):
        return Path(local)
    d = tmp_path_factory.mktemp("jhu")
    try:
        for name in JHU_FILES.values():
            with urllib.request.urlopen(JHU_BASE + name, timeout=20) as resp:
                (d / name).write_bytes(resp.read())
    except OSError as exc:
        return exc
    return d


def us_config(jhu_dir, horizons=(14, 28, 56)):
    tree = {
        "seed": 2020,
        "data": {"path": str(jhu_dir / JHU_FILES["confirmed"]),
                 "recovered_path": str(jhu_dir / JHU_FILES["recovered"]),
                 "deaths_path": str(jhu_dir / JHU_FILES["deaths"]),
                 "region": "US", "population": US_POPULATION,
                 "start_date": "2020-03-01", "end_date": "2020-12-13"},
        "detector": {"start_date": "2020-05-01", "risk": 1e-4},
        "forecast": {"horizons": list(horizons)},
    }
    return from_mapping(tree).validate()


def need_data(number, jhu_dir):
    if not isinstance(jhu_dir, Path):
        skip(number, f"JHU US time series unavailable ({jhu_dir})")


@pytest.mark.network
def test_c9_us_detections(jhu_dir):
    need_data(9, jhu_dir)
    cfg = us_config(jhu_dir)
    series = ingest(cfg).series
    events = detect(series, cfg).result.timeline.events
    expected = [("onset-declared", date(2020, 6, 22)), ("termination-declared", date(2020, 8, 12)),
                ("onset-declared", date(2020, 9, 29))]
    got = [(e.event, e.date) for e in events]
    ok = len(got) >= 3 and all(g[0] == x[0] and abs((g[1] - x[1]).days) <= 4
                               for g, x in zip(got, expected))
    record(9, ok, "events " + ", ".join(f"{k.split('-')[0]} {d}" for k, d in got)
           + " (expected 2020-06-22 / 2020-08-12 / 2020-09-29 +/- 4 days)")


def in_window(d: date) -> bool:
    return date(2020, 7, 19) <= d <= date(2020, 8, 13) or date(2020, 10, 22) <= d <= date(2020, 11, 14)


@pytest.mark.network
def test_c10_us_rolling_mape(jhu_dir):
    need_data(10, jhu_dir)
    cfg = us_config(jhu_dir)
    report = rolling_evaluate(ingest(cfg).series, cfg)
    bad = []
    for r in report.rows:
        if r.horizon == 14 and r.mape >= 5:
            bad.append((r.origin_date, r.scenario, 14, round(r.mape, 1)))
        if r.horizon == 28 and in_window(r.origin_date) and r.mape >= 15:
            bad.append((r.origin_date, r.scenario, 28, round(r.mape, 1)))
    summary = report.summary()
    eight = {sc: summary.get((sc, 56), np.nan) for sc in "AB"}
    ok = not bad and all(8 <= v <= 16 for v in eight.values())
    record(10, ok, f"{len(bad)} rows over limit (first: {bad[:3]}); 8-week time-averaged MAPE "
                   f"A={eight['A']:.1f}% B={eight['B']:.1f}% (need 8-16)")


@pytest.mark.network
def test_c11_us_runtime(jhu_dir):
    need_data(11, jhu_dir)
    cfg = us_config(jhu_dir, horizons=(14, 28))
    t0 = time.perf_counter()
    series = ingest(cfg).series
    det = detect(series, cfg)
    learn(series, cfg)
    rolling_evaluate(series, cfg, det)
    elapsed = time.perf_counter() - t0
    record(11, elapsed < 300, f"full US pipeline in {elapsed:.0f} s (limit 300)")
