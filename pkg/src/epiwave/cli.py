"""Command-line front end: ``epiwave {ingest,detect,learn,forecast,evaluate,simulate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig, load_config
from .data import parse_date, smooth
from .errors import ConfigError, EpiwaveError
from .evaluate import rolling_evaluate
from .synthetic import demo_waves

log = logging.getLogger("epiwave")


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _config(args) -> PipelineConfig:
    return load_config(args.config, args.set)


def cmd_ingest(cfg: PipelineConfig, out: Path) -> int:
    ing = pipeline.ingest(cfg)
    s = ing.series
    _write(out, "series.csv", s.to_csv())
    _write(out, "series.json", s.to_json())
    disp = cfg.smoothing.display_window
    if disp % 2 == 0:
        disp += 1
    lines = ["date,infected_avg,removed_avg,new_positives_avg"]
    avgs = [smooth(v, disp, "centered") for v in (s.infected, s.removed, s.new_positives)]
    for k, d in enumerate(s.dates):
        lines.append(",".join([d.isoformat()] + [repr(float(a[k])) for a in avgs]))
    _write(out, "series_display.csv", "\n".join(lines) + "\n")
    print(f"{len(s)} days {s.dates[0]} .. {s.dates[-1]}; {len(ing.repairs)} monotone repairs")
    for rep in ing.repairs[:10]:
        print(f"  repaired {rep.quantity} on {rep.date}: {rep.original:g} -> {rep.repaired:g}")
    return 0


def cmd_detect(cfg: PipelineConfig, out: Path) -> int:
    series = pipeline.ingest(cfg).series
    det = pipeline.detect(series, cfg)
    tl = json.loads(det.result.timeline.to_json())
    tl["threshold"] = det.calibration.threshold
    tl["threshold_stderr"] = det.calibration.threshold_stderr
    tl["risk"] = cfg.detector.risk
    tl["monitoring_start"] = series.dates[det.start_day].isoformat()
    _write(out, "timeline.json", json.dumps(tl, indent=1))
    _write(out, "traces.csv", det.result.traces_csv())
    print(f"threshold h={det.calibration.threshold:.3f} (risk {cfg.detector.risk:g})")
    for e in det.result.timeline.events:
        print(f"  {e.date}: {e.event}")
    return 0


def cmd_learn(cfg: PipelineConfig, out: Path) -> int:
    series = pipeline.ingest(cfg).series
    learned = pipeline.learn(series, cfg)
    _write(out, "posterior.csv", learned.summary.to_csv())
    print(f"posterior written for {len(series)} days")
    return 0


def cmd_forecast(cfg: PipelineConfig, out: Path, origin: str, scenario: str,
                 horizon: int | None, force: bool) -> int:
    series = pipeline.ingest(cfg).series
    try:
        day = series.index_of(parse_date(origin))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad forecast origin {origin!r}: {exc}") from None
    K = horizon or max(int(h) for h in cfg.forecast.horizons)
    det = pipeline.detect(series, cfg)
    learned = pipeline.learn(series, cfg, checkpoint_days=[day])
    ctx = pipeline.origin_context(learned, det.result, day, force=force)
    fc = pipeline.forecast_at(series, learned, ctx, scenario, K, cfg)
    stem = f"forecast_{series.dates[day].isoformat()}_{scenario}"
    _write(out, stem + ".csv", fc.to_csv())
    _write(out, stem + ".json", fc.header_json())
    print(f"{stem}: regime {ctx.regime}, slope {ctx.slope:.5f}, K={K}")
    return 0


def cmd_evaluate(cfg: PipelineConfig, out: Path) -> int:
    series = pipeline.ingest(cfg).series
    report = rolling_evaluate(series, cfg)
    _write(out, "evaluation.csv", report.to_csv())
    _write(out, "evaluation_summary.json", report.summary_json(seed=cfg.seed))
    for (sc, h), v in report.summary().items():
        print(f"scenario {sc} horizon {h:>2}d: time-averaged MAPE {v:.2f}%")
    return 0


def cmd_simulate(out_file: Path, seed: int, days: int) -> int:
    epi = demo_waves(seed=seed, days=days)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    out_file.write_text(epi.to_csv(), encoding="utf-8")
    print(f"synthetic series written to {out_file} (region 'Synthland', population 5e7)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epiwave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="TOML config file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("-o", "--out", default="out", type=Path, help="output directory")

    for name in ("ingest", "detect", "learn", "evaluate"):
        common(sub.add_parser(name))
    fp = sub.add_parser("forecast")
    common(fp)
    fp.add_argument("--origin", required=True, help="forecast origin date")
    fp.add_argument("--scenario", choices=("A", "B"), default="A")
    fp.add_argument("--horizon", type=int, default=None)
    fp.add_argument("--force", action="store_true",
                    help="allow origins before the first detection (slope 0)")
    sp = sub.add_parser("simulate", help="write a synthetic multi-wave CSV")
    sp.add_argument("output", type=Path)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--days", type=int, default=240)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.output, args.seed, args.days)
        cfg = _config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg, args.out)
        if args.command == "detect":
            return cmd_detect(cfg, args.out)
        if args.command == "learn":
            return cmd_learn(cfg, args.out)
        if args.command == "forecast":
            return cmd_forecast(cfg, args.out, args.origin, args.scenario, args.horizon, args.force)
        return cmd_evaluate(cfg, args.out)
    except EpiwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
