"""Ingestion of JHU-style cumulative reports and per-day series preparation.

Two table layouts are understood:

* wide: one row per region, one column per date (the JHU CSSE
  ``time_series_covid19_*`` layout). Rows whose region columns match are
  summed. Each wide table carries a single quantity, so recovered and
  deaths are passed as separate tables.
* long: a ``date`` column plus either a single ``value`` column or the
  ``confirmed``/``recovered``/``deaths`` columns. An optional ``region``
  column selects rows.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    InvalidPopulationError,
    InvalidWindowError,
    ParseError,
    RegionNotFoundError,
)

log = logging.getLogger(__name__)

QUANTITIES = ("confirmed", "recovered", "deaths")
REGION_COLUMNS = ("Country/Region", "Country_Region", "Province/State", "Province_State",
                  "Combined_Key", "Admin2", "region")


@dataclass(frozen=True)
class RepairEntry:
    quantity: str
    date: date
    original: float
    repaired: float


@dataclass(frozen=True)
class RawSeries:
    dates: tuple[date, ...]
    confirmed_cum: np.ndarray
    recovered_cum: np.ndarray
    deaths_cum: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class EpidemicSeries:
    dates: tuple[date, ...]
    infected: np.ndarray
    removed: np.ndarray
    new_positives: np.ndarray
    population: float

    def __len__(self) -> int:
        return len(self.dates)

    def index_of(self, day: date) -> int:
        try:
            return self.dates.index(day)
        except ValueError:
            raise KeyError(f"{day} not in series ({self.dates[0]} .. {self.dates[-1]})") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "infected", "removed", "new_positives"])
        for k, d in enumerate(self.dates):
            w.writerow([d.isoformat(), _num(self.infected[k]), _num(self.removed[k]),
                        _num(self.new_positives[k])])
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [
            {"date": d.isoformat(), "infected": float(self.infected[k]),
             "removed": float(self.removed[k]), "new_positives": float(self.new_positives[k])}
            for k, d in enumerate(self.dates)
        ]

    def to_json(self) -> str:
        return json.dumps({"population": self.population, "records": self.to_records()}, indent=1)


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def parse_date(text: str) -> date:
    """Parse ISO (``2020-03-01``) or US-style (``3/1/20``, ``3/1/2020``) dates."""
    s = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%y", "%m/%d/%Y"):
        try:
            return datetime.strptime(s, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {text!r}")


def _try_date(text: str) -> date | None:
    try:
        return parse_date(text)
    except ValueError:
        return None


def _parse_number(text: str, row: int, col: int) -> float:
    s = text.strip()
    if s == "":
        return float("nan")
    try:
        v = float(s)
    except ValueError:
        raise ParseError(f"malformed number {text!r}", row=row, column=col) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite number {text!r}", row=row, column=col)
    return v


def _read_rows(text: str) -> list[list[str]]:
    if text.startswith("﻿"):
        text = text[1:]
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise EmptyInputError("table has no data rows")
    return rows


def _parse_wide(rows, region):
    header = rows[0]
    date_cols = [(j, _try_date(h)) for j, h in enumerate(header)]
    date_cols = [(j, d) for j, d in date_cols if d is not None]
    region_cols = [j for j, h in enumerate(header) if h.strip() in REGION_COLUMNS]
    if not region_cols:
        raise ParseError("wide table has no region column (e.g. 'Country/Region')", row=1)
    total = np.zeros(len(date_cols))
    found = False
    for i, row in enumerate(rows[1:], start=2):
        if not any(j < len(row) and row[j].strip() == region for j in region_cols):
            continue
        found = True
        vals = []
        for j, _ in date_cols:
            if j >= len(row):
                raise ParseError("row is shorter than header", row=i, column=j + 1)
            vals.append(_parse_number(row[j], i, j + 1))
        vals = np.array(vals)
        # blank cells inside a summed row count as "no report" for that row
        total += np.where(np.isnan(vals), 0.0, vals)
    if not found:
        raise RegionNotFoundError(region)
    return [d for _, d in date_cols], total


def _parse_long(rows, region, date_column, value_columns, region_column):
    header = [h.strip() for h in rows[0]]
    dj = header.index(date_column)
    rj = header.index(region_column) if region_column in header else None
    vjs = [header.index(c) for c in value_columns]
    dates, values = [], []
    found = rj is None
    for i, row in enumerate(rows[1:], start=2):
        if rj is not None:
            if rj >= len(row) or row[rj].strip() != region:
                continue
            found = True
        if dj >= len(row):
            raise ParseError("missing date cell", row=i, column=dj + 1)
        try:
            d = parse_date(row[dj])
        except ValueError:
            raise ParseError(f"malformed date {row[dj]!r}", row=i, column=dj + 1) from None
        vals = []
        for j in vjs:
            if j >= len(row):
                raise ParseError("row is shorter than header", row=i, column=j + 1)
            vals.append(_parse_number(row[j], i, j + 1))
        dates.append(d)
        values.append(vals)
    if not found:
        raise RegionNotFoundError(region)
    if not dates:
        raise EmptyInputError(f"no rows for region {region!r}")
    return dates, np.array(values)


def _regularise(dates, values, quantity, log_out):
    """Sort by date, merge duplicates, carry forward gaps, repair decreases."""
    order = sorted(range(len(dates)), key=lambda k: dates[k])
    by_day: dict[date, float] = {}
    for k in order:
        v = values[k]
        if not np.isnan(v):
            by_day[dates[k]] = v
        else:
            by_day.setdefault(dates[k], np.nan)
    start, end = min(by_day), max(by_day)
    n = (end - start).days + 1
    out_dates = tuple(start + timedelta(days=k) for k in range(n))
    out = np.empty(n)
    prev = 0.0
    for k, d in enumerate(out_dates):
        v = by_day.get(d, np.nan)
        if np.isnan(v):
            v = prev
        if v < 0:
            log_out.append(RepairEntry(quantity, d, v, max(prev, 0.0)))
            v = max(prev, 0.0)
        elif v < prev:
            log_out.append(RepairEntry(quantity, d, v, prev))
            v = prev
        out[k] = v
        prev = v
    return out_dates, out


def repair_monotone(values: Sequence[float]) -> np.ndarray:
    """Replace every decrease of a cumulative series by the previous value."""
    return np.maximum.accumulate(np.maximum(np.asarray(values, dtype=float), 0.0))


def _table_series(text, region, quantity, date_column, value_column, region_column):
    rows = _read_rows(text)
    header = [h.strip() for h in rows[0]]
    if date_column in header:
        cols = [quantity] if quantity in header else [value_column]
        if cols[0] not in header:
            raise ParseError(f"long table lacks a {quantity!r} or {value_column!r} column", row=1)
        dates, vals = _parse_long(rows, region, date_column, cols, region_column)
        return dates, vals[:, 0]
    return _parse_wide(rows, region)


def parse_jhu_csv(
    text: str,
    region: str,
    *,
    recovered: str | None = None,
    deaths: str | None = None,
    date_column: str = "date",
    value_column: str = "value",
    region_column: str = "region",
) -> tuple[RawSeries, list[RepairEntry]]:
    """Parse cumulative reports for ``region`` into a gap-free, monotone series.

    ``text`` holds the confirmed counts, or all three quantities when it is a
    long table with ``confirmed``, ``recovered`` and ``deaths`` columns.
    ``recovered`` / ``deaths`` are optional extra tables; a quantity with no
    source is taken as zero.

    Returns the cleaned series and the log of monotone repairs.
    """
    if not text or not text.strip():
        raise EmptyInputError("empty CSV document")
    rows = _read_rows(text)
    header = [h.strip() for h in rows[0]]
    sources: dict[str, tuple[list[date], np.ndarray]] = {}
    if date_column in header and all(q in header for q in QUANTITIES[1:]):
        value_cols = [q for q in QUANTITIES if q in header]
        dates, vals = _parse_long(rows, region, date_column, value_cols, region_column)
        for j, q in enumerate(value_cols):
            sources[q] = (dates, vals[:, j])
    else:
        sources["confirmed"] = _table_series(text, region, "confirmed", date_column,
                                             value_column, region_column)
        for q, extra in (("recovered", recovered), ("deaths", deaths)):
            if extra is not None:
                if not extra.strip():
                    raise EmptyInputError(f"empty {q} table")
                sources[q] = _table_series(extra, region, q, date_column, value_column,
                                           region_column)

    repairs: list[RepairEntry] = []
    regular = {q: _regularise(*sources[q], q, repairs) for q in sources}
    start = max(r[0][0] for r in regular.values())
    end = min(r[0][-1] for r in regular.values())
    if end < start:
        raise EmptyInputError("input tables share no common dates")
    n = (end - start).days + 1
    dates = tuple(start + timedelta(days=k) for k in range(n))
    cols = {}
    for q in QUANTITIES:
        if q in regular:
            qd, qv = regular[q]
            off = (start - qd[0]).days
            cols[q] = qv[off:off + n].copy()
        else:
            cols[q] = np.zeros(n)
    if repairs:
        log.info("monotone repair changed %d values", len(repairs))
    raw = RawSeries(dates, cols["confirmed"], cols["recovered"], cols["deaths"])
    return raw, repairs


def build_epidemic_series(raw: RawSeries, population: float) -> EpidemicSeries:
    """Derive active infected, removed and daily new positives."""
    if len(raw) == 0:
        raise EmptyInputError("empty raw series")
    c = np.asarray(raw.confirmed_cum, dtype=float)
    if not population > c.max():
        raise InvalidPopulationError(
            f"population {population} must exceed the largest confirmed count {c.max()}")
    removed = np.asarray(raw.recovered_cum, dtype=float) + np.asarray(raw.deaths_cum, dtype=float)
    infected = np.maximum(c - removed, 0.0)
    new_pos = np.empty_like(c)
    new_pos[0] = c[0]
    new_pos[1:] = np.maximum(np.diff(c), 0.0)
    return EpidemicSeries(tuple(raw.dates), infected, removed, new_pos, float(population))


def smooth(series: Sequence[float], window: int, mode: str = "centered") -> np.ndarray:
    """Moving average with shrunken windows at the edges.

    ``mode="centered"`` needs an odd window; ``"trailing"`` averages the
    current day and the ``window - 1`` days before it.
    """
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise InvalidWindowError(f"window must be >= 1, got {window}")
    if x.size == 0:
        raise EmptyInputError("cannot smooth an empty series")
    n = x.size
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    if mode == "centered":
        if window % 2 == 0:
            raise InvalidWindowError(f"centered window must be odd, got {window}")
        half = window // 2
        lo = np.maximum(idx - half, 0)
        hi = np.minimum(idx + half + 1, n)
    elif mode == "trailing":
        lo = np.maximum(idx - window + 1, 0)
        hi = idx + 1
    else:
        raise InvalidWindowError(f"unknown smoothing mode {mode!r}")
    return (csum[hi] - csum[lo]) / (hi - lo)


def detector_input(series: EpidemicSeries, window: int = 7) -> np.ndarray:
    """Trailing moving average of daily new positives, the detector's input."""
    return smooth(np.maximum(series.new_positives, 0.0), window, mode="trailing")


def raw_to_long_csv(raw: RawSeries, region: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["date", "confirmed", "recovered", "deaths"]
    w.writerow(head + (["region"] if region is not None else []))
    for k, d in enumerate(raw.dates):
        row = [d.isoformat(), _num(raw.confirmed_cum[k]), _num(raw.recovered_cum[k]),
               _num(raw.deaths_cum[k])]
        w.writerow(row + ([region] if region is not None else []))
    return buf.getvalue()


def read_series_csv(text: str, population: float) -> EpidemicSeries:
    """Load a normalized ``date,infected,removed,new_positives`` file."""
    rows = _read_rows(text)
    header = [h.strip() for h in rows[0]]
    need = ["date", "infected", "removed", "new_positives"]
    if header[:4] != need:
        raise ParseError(f"expected header {','.join(need)}", row=1)
    dates, vals = [], []
    for i, row in enumerate(rows[1:], start=2):
        try:
            dates.append(parse_date(row[0]))
        except (ValueError, IndexError):
            raise ParseError("malformed date", row=i, column=1) from None
        vals.append([_parse_number(row[j], i, j + 1) for j in range(1, 4)])
    v = np.array(vals)
    return EpidemicSeries(tuple(dates), v[:, 0], v[:, 1], v[:, 2], float(population))

