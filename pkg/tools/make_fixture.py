"""Regenerate the bundled synthetic 8-region fixture.

Values are invented. The densest region tops the ranking and holds ~35.4%
of all cases; one region reports almost nothing. Run from the repository root::

    python tools/make_fixture.py
"""
import csv
import datetime as dt
import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "statevuln" / "data" / "fixture"

# key: (2020 cases, population, area_km2, rwi, facilities, age60_share, wave shift in days)
REGIONS = {
    "lagos":   (98_366, 14_862_000, 1_911.0, 0.90, 2_300, 0.045, 0),
    "fct":     (20_000, 3_564_000, 7_315.0, 0.70, 900, 0.032, 6),
    "rivers":  (40_000, 7_303_000, 11_077.0, 0.30, 1_400, 0.041, -4),
    "oyo":     (38_499, 7_841_000, 28_454.0, 0.20, 1_500, 0.058, 10),
    "kano":    (53_000, 13_077_000, 20_131.0, -0.20, 1_300, 0.037, -10),
    "sokoto":  (15_000, 4_998_000, 25_973.0, -0.60, 650, 0.034, 14),
    "zamfara": (13_000, 4_515_000, 39_762.0, -0.70, 550, 0.033, 18),
    "kogi":    (5, 4_473_000, 29_833.0, -0.10, 1_100, 0.052, 0),
}

# the same region spelled differently in each file exercises the alias table
SPELLINGS = {
    "cases":      {"lagos": "Lagos", "fct": "FCT", "kogi": "Kogi"},
    "population": {"lagos": "  LAGOS ", "fct": "Federal Capital Territory"},
    "poverty":    {"fct": "Abuja"},
    "health":     {"fct": "FCT Abuja", "rivers": "RIVERS"},
    "age":        {"fct": "fct, abuja"},
}

START = dt.date(2020, 2, 27)
END = dt.date(2020, 12, 31)


def name(kind, key):
    return SPELLINGS[kind].get(key, key.title())


def allocate(total, weights):
    """Integer split of ``total`` proportional to ``weights`` (largest remainder)."""
    s = sum(weights)
    raw = [total * w / s for w in weights]
    base = [math.floor(r) for r in raw]
    left = total - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def daily_counts(total, shift):
    days = (END - START).days + 1
    w = [
        math.exp(-(((t - 125 - shift) / 30.0) ** 2))
        + 0.8 * math.exp(-(((t - 295 - shift) / 18.0) ** 2))
        + 0.02
        for t in range(days)
    ]
    return allocate(total, w)


def write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# rough (lon, lat) centres and half-sizes for synthetic boundaries
SHAPES = {
    "lagos": (3.55, 6.60, 0.30, 0.20),
    "oyo": (3.60, 8.20, 0.90, 0.80),
    "kogi": (6.70, 7.70, 0.90, 0.70),
    "fct": (7.20, 8.90, 0.40, 0.40),
    "rivers": (6.80, 4.85, 0.60, 0.40),
    "kano": (8.50, 11.70, 0.80, 0.70),
    "sokoto": (5.20, 13.00, 0.90, 0.60),
    "zamfara": (6.30, 12.00, 0.70, 0.50),
}

GEO_NAMES = {"fct": "Federal Capital Territory"}


def box(cx, cy, hx, hy):
    # counter-clockwise exterior with a mid-edge vertex for a less trivial outline
    return [
        [round(cx - hx, 4), round(cy - hy, 4)],
        [round(cx + hx, 4), round(cy - hy, 4)],
        [round(cx + hx, 4), round(cy + hy * 0.3, 4)],
        [round(cx + hx * 0.6, 4), round(cy + hy, 4)],
        [round(cx - hx, 4), round(cy + hy, 4)],
        [round(cx - hx, 4), round(cy - hy, 4)],
    ]


def geojson():
    features = []
    for key, (cx, cy, hx, hy) in SHAPES.items():
        outer = box(cx, cy, hx, hy)
        if key == "lagos":
            island = box(cx + hx + 0.18, cy - 0.05, 0.12, 0.06)
            geometry = {"type": "MultiPolygon", "coordinates": [[outer], [island]]}
        elif key == "kano":
            hole = box(cx, cy, 0.12, 0.10)[::-1]
            geometry = {"type": "Polygon", "coordinates": [outer, hole]}
        else:
            geometry = {"type": "Polygon", "coordinates": [outer]}
        features.append({
            "type": "Feature",
            "properties": {"admin1Name": GEO_NAMES.get(key, key.title()), "admin0Name": "Nigeria"},
            "geometry": geometry,
        })
    return {"type": "FeatureCollection", "features": features}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    case_rows = [[name("cases", "lagos"), "2019-12-31", 3]]
    n_days = (END - START).days + 1
    for key, (cases, *_rest) in REGIONS.items():
        shift = REGIONS[key][-1]
        for i, c in enumerate(daily_counts(cases, shift)):
            case_rows.append([name("cases", key), (START + dt.timedelta(days=i)).isoformat(), c])
    case_rows.append([name("cases", "lagos"), "2021-01-01", 400])
    assert len(case_rows) == 2 + n_days * len(REGIONS)
    write(OUT / "cases.csv", ["region", "date", "new_cases"], case_rows)

    write(OUT / "population.csv", ["region", "population", "area_km2"],
          [[name("population", k), v[1], v[2]] for k, v in REGIONS.items()])
    write(OUT / "poverty.csv", ["region", "rwi"],
          [[name("poverty", k), v[3]] for k, v in REGIONS.items()])
    write(OUT / "health.csv", ["region", "facilities"],
          [[name("health", k), v[4]] for k, v in REGIONS.items()])
    write(OUT / "age.csv", ["region", "age60_share"],
          [[name("age", k), v[5]] for k, v in REGIONS.items()])
    (OUT / "regions.geojson").write_text(json.dumps(geojson(), indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
