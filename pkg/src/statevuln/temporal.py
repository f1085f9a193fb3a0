"""Weekly aggregation, trailing rolling means and density-group case-rate curves."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import MissingTercile, UnsortedInput
from .indicators import PER_100K, TERCILE_CLASSES

logger = logging.getLogger(__name__)

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True)
class CaseSeries:
    """Ordered (date, value) points for one region or group.

    ``partial`` marks rolling-mean points computed over a shortened window.
    """

    key: str
    dates: tuple[dt.date, ...]
    values: np.ndarray
    partial: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.dates),):
            raise ValueError("dates and values differ in length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError(f"series {self.key!r} has negative or non-finite values")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise UnsortedInput(f"series {self.key!r}: {b} does not follow {a}")

    def __len__(self):
        return len(self.dates)

    @classmethod
    def from_pairs(cls, key, pairs):
        pairs = list(pairs)
        return cls(key, [d for d, _ in pairs], [v for _, v in pairs])


def fill_daily_gaps(series: CaseSeries, start=None, end=None) -> CaseSeries:
    """Reindex to a contiguous daily range; missing days become 0."""
    if not len(series) and start is None:
        return series
    start = start or series.dates[0]
    end = end or series.dates[-1]
    n = (end - start).days + 1
    values = np.zeros(n)
    for d, v in zip(series.dates, series.values):
        if start <= d <= end:
            values[(d - start).days] = v
    if len(series):
        # only interior holes are surprising; padding to a wider range is not
        holes = (series.dates[-1] - series.dates[0]).days + 1 - len(series)
        if holes:
            logger.warning("series %r: %d missing day(s) treated as 0", series.key, holes)
    dates = [start + i * ONE_DAY for i in range(n)]
    return CaseSeries(series.key, dates, values)


def iso_week_monday(day: dt.date) -> dt.date:
    return day - dt.timedelta(days=day.weekday())


def weekly_aggregate(daily: CaseSeries) -> CaseSeries:
    """Sum daily values into ISO weeks, each dated at its Monday.

    Weeks between the first and last observation are emitted contiguously.
    """
    if not len(daily):
        return CaseSeries(daily.key, (), np.zeros(0))
    daily = fill_daily_gaps(daily)
    first = iso_week_monday(daily.dates[0])
    n_weeks = (iso_week_monday(daily.dates[-1]) - first).days // 7 + 1
    sums = np.zeros(n_weeks)
    for d, v in zip(daily.dates, daily.values):
        sums[(iso_week_monday(d) - first).days // 7] += v
    mondays = [first + dt.timedelta(weeks=i) for i in range(n_weeks)]
    return CaseSeries(daily.key, mondays, sums)


def rolling_average(series: CaseSeries, window: int = 7) -> CaseSeries:
    """Trailing mean over ``window`` points.

    The first ``window - 1`` outputs average the available prefix and are
    flagged in ``partial``.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    x = series.values
    n = x.size
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - window + 1)
        out[i] = x[lo:i + 1].sum() / (i + 1 - lo)
    partial = np.arange(n) < window - 1
    return CaseSeries(series.key, series.dates, out, partial)


def local_maxima(series: CaseSeries, min_fraction: float = 0.25) -> list[dt.date]:
    """Dates of local peaks at least ``min_fraction`` of the series maximum.

    Informational only: used to annotate waves in the report.
    """
    x = series.values
    if x.size < 3 or x.max() <= 0:
        return []
    floor = min_fraction * x.max()
    peaks = []
    for i in range(1, x.size - 1):
        if x[i] > x[i - 1] and x[i] >= x[i + 1] and x[i] >= floor:
            peaks.append(series.dates[i])
    return peaks


class GroupSeries(NamedTuple):
    raw: CaseSeries
    smoothed: CaseSeries


def tercile_case_rate_series(
    daily_by_region: Mapping[str, CaseSeries],
    terciles: Mapping[str, str],
    populations: Mapping[str, float],
    window: int = 7,
) -> dict[str, GroupSeries]:
    """Weekly cases per 100k for each density group, raw and smoothed.

    Cases are pooled over member regions and divided by the pooled
    population. Smoothing applies a trailing ``window``-day mean to the daily
    pooled rate before weekly aggregation.
    """
    for key in daily_by_region:
        if key not in terciles:
            raise MissingTercile(f"region {key!r} has no density class")
        if not populations.get(key, 0) > 0:
            raise MissingTercile(f"region {key!r} has no population")
    nonempty = [s for s in daily_by_region.values() if len(s)]
    if not nonempty:
        return {}
    start = min(s.dates[0] for s in nonempty)
    end = max(s.dates[-1] for s in nonempty)

    out = {}
    for cls in TERCILE_CLASSES:
        members = sorted(k for k, c in terciles.items() if c == cls)
        if not members:
            continue
        pop = sum(populations[k] for k in members)
        total = None
        for key in members:
            series = daily_by_region.get(key)
            if series is None:
                continue
            filled = fill_daily_gaps(series, start, end)
            total = filled.values if total is None else total + filled.values
        if total is None:
            total = np.zeros((end - start).days + 1)
        dates = [start + i * ONE_DAY for i in range((end - start).days + 1)]
        rate = CaseSeries(cls, dates, total / pop * PER_100K)
        out[cls] = GroupSeries(
            weekly_aggregate(rate),
            weekly_aggregate(rolling_average(rate, window)),
        )
    return out


def national_series(daily_by_region: Mapping[str, CaseSeries]) -> CaseSeries:
    """Daily national totals over the union date range."""
    nonempty = [s for s in daily_by_region.values() if len(s)]
    if not nonempty:
        return CaseSeries("national", (), np.zeros(0))
    start = min(s.dates[0] for s in nonempty)
    end = max(s.dates[-1] for s in nonempty)
    total = sum(fill_daily_gaps(s, start, end).values for s in nonempty)
    dates = [start + i * ONE_DAY for i in range((end - start).days + 1)]
    return CaseSeries("national", dates, total)


TEMPORAL_COLUMNS = ("series_id", "date", "raw", "smoothed")


def write_temporal_csv(rows: Sequence[tuple[str, CaseSeries, CaseSeries]], path: str | Path) -> None:
    """Long-format CSV; each entry is (series_id, raw, smoothed) on shared dates."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TEMPORAL_COLUMNS)
        for series_id, raw, smoothed in rows:
            if raw.dates != smoothed.dates:
                raise ValueError(f"{series_id}: raw and smoothed dates differ")
            for d, r, s in zip(raw.dates, raw.values, smoothed.values):
                writer.writerow([series_id, d.isoformat(), f"{r:.12g}", f"{s:.12g}"])
