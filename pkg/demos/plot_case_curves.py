"""
Weekly case curves by density group
===================================

Pool daily counts over regions in the same density tercile, convert to
cases per 100k and smooth with a trailing 7-day mean.
"""

from statevuln import indicators, pipeline, temporal

ingested = pipeline.run_ingest(pipeline.fixture_config())
records = {r.key: r for r in ingested.records}

###############################################################################
# Terciles split the ascending density order at floor(n/3) and floor(2n/3).
terciles = indicators.density_terciles({k: r.density for k, r in records.items()})
for cls in indicators.TERCILE_CLASSES:
    print(cls, sorted(k for k, c in terciles.items() if c == cls))

###############################################################################
# The first six smoothed points average a shortened window and are flagged.
daily = {k: temporal.CaseSeries.from_pairs(k, pairs) for k, pairs in ingested.daily_cases.items()}
lagos = temporal.rolling_average(daily["lagos"])
print("partial prefix:", int(lagos.partial.sum()), "points")

###############################################################################
# Weekly rates per group, dated at each ISO week's Monday.
groups = temporal.tercile_case_rate_series(
    daily, terciles, {k: r.population for k, r in records.items()}
)
for cls, series in groups.items():
    peaks = temporal.local_maxima(series.smoothed)
    top = series.smoothed.values.max()
    print(f"{cls:6s} weeks={len(series.raw)} peak={top:.1f}/100k waves at {[d.isoformat() for d in peaks]}")

###############################################################################
# A quick text sparkline of the national weekly total.
national = temporal.weekly_aggregate(temporal.national_series(daily))
bars = " .:-=+*#%@"
scale = national.values.max()
print("".join(bars[min(9, int(9 * v / scale))] for v in national.values))
