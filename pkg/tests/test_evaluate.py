import numpy as np
import pytest

from epiwave.config import from_mapping
from epiwave.errors import ConfigError, InsufficientDataError
from epiwave.evaluate import forecast_origins, rolling_evaluate
from epiwave.pipeline import detect
from epiwave.synthetic import make_epidemic, piecewise_rates


@pytest.fixture(scope="module")
def single_wave():
    beta = piecewise_rates(150, [(0, 0.07), (60, 0.15)])
    return make_epidemic(beta, 0.1, 5e7, i0=2e4, r0=1e4, seed=0).series


def config(**over):
    tree = {"seed": 4, "filter": {"particles": 500}, "forecast": {"horizons": [14, 28]}}
    for k, v in over.items():
        sec, key = k.split("__")
        tree.setdefault(sec, {})[key] = v
    return from_mapping(tree).validate()


def test_forecast_origins():
    assert forecast_origins(30, 10, [14, 28], 1) == list(range(10, 16))
    assert forecast_origins(30, 10, [14], 4) == [10, 14]


def test_report_is_complete(single_wave):
    cfg = config()
    det = detect(single_wave, cfg)
    rep = rolling_evaluate(single_wave, cfg, det)
    n = len(single_wave)
    first = det.result.timeline.events[0].day
    keys = [(r.origin_day, r.scenario, r.horizon) for r in rep.rows]
    assert len(keys) == len(set(keys))
    expected = {(d, s, h) for d in range(first, n) for s in "AB" for h in (14, 28) if d + h <= n - 1}
    assert set(keys) == expected
    assert all(r.mape >= 0 for r in rep.rows)
    assert {o[0] for o in rep.omitted} <= set(range(first, n))
    header = rep.to_csv().splitlines()[0]
    assert header == "origin_date,scenario,horizon_days,mape_pct,regime,slope"


def test_report_is_reproducible(single_wave):
    cfg = config(forecast__stride=5)
    a = rolling_evaluate(single_wave, cfg)
    b = rolling_evaluate(single_wave, cfg)
    assert a.to_csv() == b.to_csv()
    assert a.summary_json(seed=4) == b.summary_json(seed=4)


def test_matching_scenario_gives_small_two_week_error(single_wave):
    # after detection the true rate is flat, which scenario A with zero slope matches
    rep = rolling_evaluate(single_wave, from_mapping({"seed": 4}).validate())
    assert rep.summary()[("A", 14)] < 5.0
    assert rep.summary()[("B", 14)] < 5.0


def test_errors(single_wave):
    with pytest.raises(ConfigError):
        rolling_evaluate(single_wave, config(forecast__stride=1000))
    flat = make_epidemic(np.full(120, 0.1), 0.1, 1e8, i0=1e5, seed=1, process_noise_rel=0.0).series
    with pytest.raises(InsufficientDataError):
        rolling_evaluate(flat, config())
