"""Region boundaries, spherical areas and SVG choropleths.

Boundaries come from GeoJSON (Polygon / MultiPolygon features, lon/lat in
degrees). Maps are plain SVG 1.1 with an equirectangular projection fitted to
the data's bounding box, so the output is byte-for-byte reproducible.
"""
from __future__ import annotations

import json
import logging
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import DegenerateRing, EmptyInput, MissingNameProperty, ParseError
from .ingest import RegionNamer

logger = logging.getLogger(__name__)

AUTHALIC_RADIUS_KM = 6371.0072
DEFAULT_NAME_PROPERTY = "admin1Name"
NODATA_COLOR = "#d9d9d9"

# light -> dark; the last entry marks the highest class
PALETTES = {
    "risk_score": ("#fde0dd", "#fa9fb5", "#c51b8a"),
    "density": ("#edf8e9", "#bae4b3", "#74c476", "#31a354", "#006d2c"),
    "poverty": ("#feedde", "#fdbe85", "#fd8d3c", "#e6550d", "#a63603"),
    "healthcare": ("#eff3ff", "#bdd7e7", "#6baed6", "#3182bd", "#08519c"),
    "age": ("#f2f0f7", "#cbc9e2", "#9e9ac8", "#756bb1", "#54278f"),
}

TITLES = {
    "risk_score": "Composite risk score",
    "density": "Population density score",
    "poverty": "Poverty score",
    "healthcare": "Healthcare access deficit score",
    "age": "Age risk score (share aged 60+)",
}

MAP_VARIABLES = tuple(PALETTES)


@dataclass(frozen=True)
class RegionGeometry:
    """One region's boundary: polygons of rings, exterior ring first."""

    key: str
    polygons: tuple[tuple[np.ndarray, ...], ...]
    computed_area_km2: float


# ---------------------------------------------------------------------------
# area


def _check_ring(ring) -> np.ndarray:
    ring = np.asarray(ring, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise DegenerateRing("ring must be a sequence of (lon, lat) pairs")
    if not np.all(np.isfinite(ring)):
        raise DegenerateRing("ring has non-finite coordinates")
    if np.any(np.abs(ring[:, 0]) > 180) or np.any(np.abs(ring[:, 1]) > 90):
        raise DegenerateRing("coordinates outside lon [-180, 180] / lat [-90, 90]")
    if len(ring) and not np.array_equal(ring[0], ring[-1]):
        ring = np.vstack([ring, ring[:1]])
    if len({tuple(p) for p in ring}) < 3:
        raise DegenerateRing("ring needs at least 3 distinct vertices")
    return ring


def ring_excess(ring) -> float:
    """Signed spherical excess (steradians) of a closed ring with great-circle edges."""
    ring = np.radians(_check_ring(ring))
    lon, lat = ring[:, 0], ring[:, 1]
    dlon = np.diff(lon)
    dlon = (dlon + np.pi) % (2 * np.pi) - np.pi
    t1 = np.tan(lat[:-1] / 2)
    t2 = np.tan(lat[1:] / 2)
    return math.fsum(2 * np.arctan2(np.tan(dlon / 2) * (t1 + t2), 1 + t1 * t2))


def _canonical(ring):
    # same start vertex and direction for every rotation/winding of a ring,
    # so equivalent rings give bit-identical areas
    pts = [tuple(p) for p in _check_ring(ring)[:-1]]
    i = min(range(len(pts)), key=lambda k: pts[k])
    pts = pts[i:] + pts[:i]
    if pts[-1] < pts[1]:
        pts = pts[:1] + pts[:0:-1]
    return pts + pts[:1]


def ring_area(ring, radius: float = AUTHALIC_RADIUS_KM) -> float:
    """Unsigned area of one ring in km^2 (the smaller of the two caps it bounds)."""
    e = abs(ring_excess(_canonical(ring)))
    e = min(e, 4 * math.pi - e)
    return e * radius * radius


def geodesic_area(polygons, radius: float = AUTHALIC_RADIUS_KM) -> float:
    """Area in km^2 on the authalic sphere; holes are subtracted.

    ``polygons`` is a sequence of polygons, each a sequence of rings whose
    first ring is the exterior.
    """
    total = 0.0
    for poly in polygons:
        if not len(poly):
            continue
        total += ring_area(poly[0], radius) - sum(ring_area(h, radius) for h in poly[1:])
    return total


# ---------------------------------------------------------------------------
# GeoJSON


def _polygons_of(geometry, path, index):
    kind = geometry.get("type") if isinstance(geometry, dict) else None
    coords = geometry.get("coordinates") if isinstance(geometry, dict) else None
    if kind == "Polygon":
        raw = [coords]
    elif kind == "MultiPolygon":
        raw = coords
    else:
        raise ParseError(f"feature {index}: unsupported geometry type {kind!r}", path)
    try:
        return tuple(tuple(_check_ring(r) for r in poly) for poly in raw)
    except (DegenerateRing, TypeError, ValueError) as exc:
        raise ParseError(f"feature {index}: {exc}", path) from None


def load_regions(
    path: str | Path,
    name_property: str = DEFAULT_NAME_PROPERTY,
    namer: RegionNamer | None = None,
    strict: bool = True,
) -> list[RegionGeometry]:
    """Read a GeoJSON FeatureCollection into canonical-keyed geometries.

    Features sharing a canonical name are merged into one region.
    """
    path = Path(path)
    if namer is None:
        namer = RegionNamer(strict=strict)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"invalid JSON: {exc}", path) from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("expected a GeoJSON FeatureCollection", path)
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError("FeatureCollection has no 'features' list", path)

    merged: dict[str, list] = {}
    for i, feature in enumerate(features):
        if not isinstance(feature, dict):
            raise ParseError(f"feature {i} is not an object", path)
        props = feature.get("properties") or {}
        name = props.get(name_property) if isinstance(props, dict) else None
        if not isinstance(name, str) or not name.strip():
            raise MissingNameProperty(f"feature {i} lacks property {name_property!r}", path)
        key = namer(name)
        merged.setdefault(key, []).extend(_polygons_of(feature.get("geometry"), path, i))

    return [
        RegionGeometry(key, tuple(polys), geodesic_area(polys))
        for key, polys in sorted(merged.items())
    ]


# ---------------------------------------------------------------------------
# class breaks


def equal_interval_breaks(values: Sequence[float], n_classes: int = 5) -> tuple[float, ...]:
    """Interior breaks splitting [min, max] into equal-width classes."""
    lo, hi = min(values), max(values)
    if hi == lo:
        return ()
    step = (hi - lo) / n_classes
    return tuple(lo + step * i for i in range(1, n_classes))


def percentile_breaks(values: Sequence[float]) -> tuple[float, ...]:
    """Breaks reproducing the floor(n/3), floor(2n/3) rank split.

    Each break is the midpoint between the last value of one class and the
    first of the next; breaks that collapse under ties are dropped.
    """
    s = sorted(values)
    n = len(s)
    if n < 3:
        return equal_interval_breaks(s, 3) if n else ()
    out = []
    for cut in (n // 3, (2 * n) // 3):
        if s[cut - 1] < s[cut]:
            b = (s[cut - 1] + s[cut]) / 2
            if not out or b > out[-1]:
                out.append(b)
    return tuple(out)


def class_index(value: float, breaks: Sequence[float]) -> int:
    """Half-open classes [b_i, b_{i+1}): a value on a break goes up."""
    return bisect_right(breaks, value)


def _pick(palette, n):
    """n colours spread over a light-to-dark ramp, always ending on the darkest."""
    if n >= len(palette):
        return tuple(palette)
    if n == 1:
        return (palette[-1],)
    idx = [round(i * (len(palette) - 1) / (n - 1)) for i in range(n)]
    return tuple(palette[i] for i in idx)


@dataclass(frozen=True)
class ChoroplethSpec:
    variable: str
    class_breaks: tuple[float, ...]
    palette: tuple[str, ...]
    title: str
    legend_labels: tuple[str, ...] | None = None
    credit: str = "Source: boundary and indicator input files"

    def __post_init__(self):
        b = tuple(float(x) for x in self.class_breaks)
        object.__setattr__(self, "class_breaks", b)
        object.__setattr__(self, "palette", tuple(self.palette))
        if any(not x < y for x, y in zip(b, b[1:])):
            raise ValueError("class breaks must be strictly ascending")
        if len(self.palette) != len(b) + 1:
            raise ValueError(f"{len(b) + 1} classes need {len(b) + 1} colours, got {len(self.palette)}")
        if self.legend_labels is not None and len(self.legend_labels) != len(self.palette):
            raise ValueError("one legend label per class")


def _fmt(x):
    return f"{x:.3g}"


def default_spec(variable: str, values: Mapping[str, float], n_classes: int | None = None) -> ChoroplethSpec:
    """Percentile classes for the risk map, equal intervals for factor maps."""
    vals = list(values.values())
    if variable == "risk_score":
        breaks = percentile_breaks(vals) if vals else ()
    else:
        breaks = equal_interval_breaks(vals, n_classes or 5) if vals else ()
    palette = _pick(PALETTES[variable], len(breaks) + 1)
    if variable == "risk_score" and len(breaks) == 2:
        labels = ("low", "medium", "high")
    elif not breaks:
        labels = ("all regions",)
    else:
        labels = tuple(
            [f"< {_fmt(breaks[0])}"]
            + [f"{_fmt(a)} to {_fmt(b)}" for a, b in zip(breaks, breaks[1:])]
            + [f">= {_fmt(breaks[-1])}"]
        )
    return ChoroplethSpec(variable, breaks, palette, TITLES[variable], labels)


# ---------------------------------------------------------------------------
# SVG


def _label_text(key):
    return key.upper() if len(key) <= 3 else key.title()


def _planar_centroid(xy):
    x, y = xy[:, 0], xy[:, 1]
    cross = x[:-1] * y[1:] - x[1:] * y[:-1]
    a = cross.sum() / 2
    if a == 0:
        return float(x.mean()), float(y.mean()), 0.0
    cx = ((x[:-1] + x[1:]) * cross).sum() / (6 * a)
    cy = ((y[:-1] + y[1:]) * cross).sum() / (6 * a)
    return float(cx), float(cy), abs(a)


def render_choropleth(
    geoms: Sequence[RegionGeometry],
    values: Mapping[str, float],
    spec: ChoroplethSpec,
    map_width: float = 600.0,
) -> str:
    """Render a standalone SVG choropleth.

    Regions without a value are drawn in the no-data grey. Identical inputs
    give identical bytes.
    """
    if not geoms:
        raise EmptyInput("no geometries to render")
    geoms = sorted(geoms, key=lambda g: g.key)
    unmatched = sorted(set(values) - {g.key for g in geoms})
    if unmatched:
        logger.warning("no geometry for: %s", ", ".join(unmatched))

    rings = [r for g in geoms for poly in g.polygons for r in poly]
    allpts = np.vstack(rings)
    lon_min, lat_min = allpts.min(axis=0)
    lon_max, lat_max = allpts.max(axis=0)
    kx = math.cos(math.radians((lat_min + lat_max) / 2))
    span_x = max((lon_max - lon_min) * kx, 1e-9)
    span_y = max(lat_max - lat_min, 1e-9)
    scale = map_width / span_x
    map_height = span_y * scale

    margin, top, legend_w = 20.0, 50.0, 200.0
    width = margin * 3 + map_width + legend_w
    n_classes = len(spec.palette)
    height = top + max(map_height, 30.0 + 22.0 * (n_classes + 1)) + 50.0

    def project(ring):
        x = margin + (ring[:, 0] - lon_min) * kx * scale
        y = top + (lat_max - ring[:, 1]) * scale
        return np.column_stack([x, y])

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f"<title>{escape(spec.title)}</title>",
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<text x="{margin:.0f}" y="30" font-family="sans-serif" font-size="18" '
        f'font-weight="bold">{escape(spec.title)}</text>',
        '<g id="regions" stroke="#4d4d4d" stroke-width="0.6" stroke-linejoin="round">',
    ]
    labels = []
    for g in geoms:
        value = values.get(g.key)
        if value is None or not math.isfinite(value):
            fill, cls = NODATA_COLOR, "nodata"
        else:
            i = class_index(value, spec.class_breaks)
            fill, cls = spec.palette[i], f"class-{i}"
        best = None
        for p_i, poly in enumerate(g.polygons):
            for r_i, ring in enumerate(poly):
                xy = project(ring)
                d = "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in xy[:-1]) + " Z"
                ring_fill = fill if r_i == 0 else "#ffffff"
                role = cls if r_i == 0 else "hole"
                out.append(
                    f'<path id={quoteattr(f"{g.key}-{p_i}-{r_i}")} class="{role}" '
                    f'fill="{ring_fill}" d="{d}"/>'
                )
                if r_i == 0:
                    cx, cy, a = _planar_centroid(xy)
                    if best is None or a > best[2]:
                        best = (cx, cy, a)
        labels.append((best[0], best[1], _label_text(g.key)))
    out.append("</g>")

    out.append('<g id="labels" font-family="sans-serif" font-size="10" text-anchor="middle">')
    for cx, cy, text in labels:
        out.append(f'<text x="{cx:.2f}" y="{cy:.2f}">{escape(text)}</text>')
    out.append("</g>")

    lx = margin * 2 + map_width
    ly = top + 10.0
    legend_labels = spec.legend_labels or tuple(f"class {i + 1}" for i in range(n_classes))
    out.append('<g id="legend" font-family="sans-serif" font-size="11">')
    out.append(f'<text x="{lx:.0f}" y="{ly:.0f}" font-weight="bold">Legend</text>')
    for i, (color, text) in enumerate(zip(spec.palette, legend_labels)):
        y = ly + 12 + 22 * i
        out.append(f'<rect x="{lx:.0f}" y="{y:.0f}" width="18" height="14" fill="{color}" stroke="#4d4d4d"/>')
        out.append(f'<text x="{lx + 26:.0f}" y="{y + 11:.0f}">{escape(text)}</text>')
    y = ly + 12 + 22 * n_classes
    out.append(f'<rect x="{lx:.0f}" y="{y:.0f}" width="18" height="14" fill="{NODATA_COLOR}" stroke="#4d4d4d"/>')
    out.append(f'<text x="{lx + 26:.0f}" y="{y + 11:.0f}">no data</text>')
    out.append("</g>")

    out.append(
        f'<text x="{margin:.0f}" y="{height - 15:.0f}" font-family="sans-serif" '
        f'font-size="10" fill="#555555">{escape(spec.credit)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_maps(geoms, layers: Mapping[str, Mapping[str, float]], out_dir: str | Path) -> list[Path]:
    """Write ``<variable>.svg`` for each variable in ``layers``."""
    out_dir = Path(out_dir)
    written = []
    for variable in MAP_VARIABLES:
        if variable not in layers:
            continue
        values = layers[variable]
        svg = render_choropleth(geoms, values, default_spec(variable, values))
        path = out_dir / f"{variable}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    return written
