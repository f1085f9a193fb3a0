"""Read raw indicator files and harmonize them into one state-level table.

The five input files follow fixed schemas::

    cases.csv       region,date,new_cases
    population.csv  region,population,area_km2[,density]
    poverty.csv     region,rwi[,population]
    health.csv      region,facilities
    age.csv         region,age60_share

Region names are canonicalized through an alias table (CSV ``alias,canonical``)
and, when a sub-unit map is supplied, rows naming sub-units (e.g. LGAs) are
aggregated to their parent region with a per-column rule.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import (
    EmptyJoin,
    InputError,
    MissingMapping,
    ParseError,
    UnknownRegion,
    ZeroWeight,
)

logger = logging.getLogger(__name__)

SUM = "sum"
WEIGHTED_MEAN = "population_weighted_mean"

# Declared, never inferred: counts add up, intensities are population-weighted.
DEFAULT_RULES = {
    "new_cases": SUM,
    "population": SUM,
    "area_km2": SUM,
    "facilities": SUM,
    "rwi": WEIGHTED_MEAN,
    "age60_share": WEIGHTED_MEAN,
}

INDICATOR_FILES = ("cases", "population", "poverty", "health", "age")


# ---------------------------------------------------------------------------
# region names


def normalize_name(raw: str) -> str:
    """Lowercase, trim and collapse internal whitespace."""
    return " ".join(raw.split()).lower()


def _read_single_column(text: str) -> list[str]:
    reader = csv.DictReader(text.splitlines())
    return [normalize_name(row["canonical"]) for row in reader if row.get("canonical")]


def default_canonical_names() -> frozenset[str]:
    """The 36 states plus the federal capital, as canonical keys."""
    text = resources.files("statevuln").joinpath("data/states.csv").read_text("utf-8")
    return frozenset(_read_single_column(text))


def _parse_alias_rows(rows: Iterable[dict], path=None) -> dict[str, str]:
    table = {}
    for lineno, row in enumerate(rows, start=2):
        alias = row.get("alias")
        canonical = row.get("canonical")
        if not alias or not canonical or not alias.strip() or not canonical.strip():
            raise ParseError("alias row needs both 'alias' and 'canonical'", path, lineno)
        table[normalize_name(alias)] = normalize_name(canonical)
    return table


def load_alias_table(path: str | Path | None = None) -> dict[str, str]:
    """Load an ``alias,canonical`` CSV. With no path, the shipped default is used."""
    if path is None:
        text = resources.files("statevuln").joinpath("data/aliases.csv").read_text("utf-8")
        return _parse_alias_rows(csv.DictReader(text.splitlines()))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"alias", "canonical"} <= set(reader.fieldnames):
            raise ParseError("header must contain 'alias,canonical'", path, 1)
        table = _parse_alias_rows(reader, path)
    # chains (a -> b -> c) are flattened so that lookups stay idempotent
    for alias in list(table):
        seen = {alias}
        target = table[alias]
        while target in table and target not in seen:
            seen.add(target)
            target = table[target]
        table[alias] = target
    return table


def canonicalize_region_name(
    raw: str,
    alias_table: Mapping[str, str] | None = None,
    canonical: Iterable[str] | None = None,
    strict: bool = True,
) -> str:
    """Map a free-text region name to its canonical key.

    >>> canonicalize_region_name("Federal Capital Territory")
    'fct'
    >>> canonicalize_region_name("  LAGOS ")
    'lagos'

    Unknown names raise :class:`UnknownRegion` in strict mode; in lenient
    mode the normalized string is returned and a warning is logged.
    """
    if alias_table is None:
        alias_table = load_alias_table()
    known = frozenset(canonical) if canonical is not None else default_canonical_names()
    known |= frozenset(alias_table.values())
    name = normalize_name(raw)
    if not name:
        raise InputError("region name is empty")
    if name in known:
        return name
    resolved = alias_table.get(name)
    if resolved is not None:
        return resolved
    if strict:
        raise UnknownRegion(f"unknown region {raw!r} (normalized {name!r})")
    logger.warning("unknown region %r passed through as %r", raw, name)
    return name


class RegionNamer:
    """Memoizing canonicalizer; lenient-mode warnings fire once per name."""

    def __init__(self, alias_table=None, canonical=None, strict=True):
        self.alias_table = load_alias_table() if alias_table is None else dict(alias_table)
        if canonical is None:
            canonical = default_canonical_names()
        self.canonical = frozenset(canonical) | frozenset(self.alias_table.values())
        self.strict = strict
        self._cache: dict[str, str] = {}

    def __call__(self, raw: str) -> str:
        key = normalize_name(raw)
        if key not in self._cache:
            self._cache[key] = canonicalize_region_name(
                raw, self.alias_table, self.canonical, self.strict
            )
        return self._cache[key]


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class RawIndicatorRow:
    region_name: str
    value: float
    date: dt.date | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InputError(f"non-finite value for {self.region_name!r}")


@dataclass(frozen=True)
class RegionRecord:
    key: str
    population: float
    area_km2: float
    density: float
    rwi: float
    facilities: float
    age60_share: float
    total_cases: float

    def __post_init__(self):
        if not self.population > 0:
            raise InputError(f"{self.key}: population must be positive")
        if not self.area_km2 > 0:
            raise InputError(f"{self.key}: area_km2 must be positive")
        expected = self.population / self.area_km2
        if abs(self.density - expected) > 1e-9 * expected:
            raise InputError(f"{self.key}: density inconsistent with population/area")
        if self.total_cases < 0:
            raise InputError(f"{self.key}: negative case total")
        if not 0.0 <= self.age60_share <= 1.0:
            raise InputError(f"{self.key}: age60_share outside [0, 1]")

    FIELDS = ("population", "area_km2", "density", "rwi", "facilities", "age60_share", "total_cases")


class PopulationRow(NamedTuple):
    population: float
    area_km2: float
    density: float | None = None


class JoinResult(NamedTuple):
    records: list[RegionRecord]
    exclusions: list[str]


# ---------------------------------------------------------------------------
# operations


def aggregate_subunits(
    rows: Sequence[RawIndicatorRow],
    mapping: Mapping[str, str],
    rule: str = SUM,
    populations: Mapping[str, float] | None = None,
) -> dict[str, float]:
    """Aggregate sub-unit values to their parent regions.

    Parameters
    ----------
    rows : sequence of RawIndicatorRow
        ``region_name`` holds the sub-unit name.
    mapping : mapping
        Sub-unit name to region key. Names are compared after normalization.
    rule : {"sum", "population_weighted_mean"}
    populations : mapping, optional
        Sub-unit populations; required for the weighted mean.

    Returns
    -------
    dict
        One value per region key reached by ``rows``.
    """
    norm_map = {normalize_name(k): v for k, v in mapping.items()}
    norm_pop = None
    if rule == WEIGHTED_MEAN:
        if populations is None:
            raise MissingMapping("population_weighted_mean needs sub-unit populations")
        norm_pop = {normalize_name(k): float(v) for k, v in populations.items()}
    elif rule != SUM:
        raise ValueError(f"unknown aggregation rule {rule!r}")

    totals: dict[str, float] = defaultdict(float)
    weights: dict[str, float] = defaultdict(float)
    for row in rows:
        sub = normalize_name(row.region_name)
        if sub not in norm_map:
            raise MissingMapping(f"sub-unit {row.region_name!r} has no region mapping")
        key = norm_map[sub]
        if rule == SUM:
            totals[key] += row.value
        else:
            if sub not in norm_pop:
                raise MissingMapping(f"sub-unit {row.region_name!r} has no population weight")
            w = norm_pop[sub]
            totals[key] += w * row.value
            weights[key] += w

    if rule == SUM:
        return dict(sorted(totals.items()))
    out = {}
    for key in sorted(totals):
        if weights[key] <= 0:
            raise ZeroWeight(f"region {key!r} has zero total population")
        out[key] = totals[key] / weights[key]
    return out


def align_year(rows: Sequence[RawIndicatorRow], year: int) -> list[RawIndicatorRow]:
    """Keep rows dated within calendar ``year`` (inclusive), preserving order."""
    kept = []
    for row in rows:
        if row.date is None:
            raise InputError(f"row for {row.region_name!r} carries no date")
        if row.date.year == year:
            kept.append(row)
    return kept


def build_region_table(
    population: Mapping[str, PopulationRow],
    poverty: Mapping[str, float],
    health: Mapping[str, float],
    age: Mapping[str, float],
    cases: Mapping[str, float],
    impute: bool = False,
) -> JoinResult:
    """Inner-join the five indicator maps on region key.

    Keys missing from any source are excluded and reported as
    ``EXCLUDED <key> missing <column>``. With ``impute=True`` a missing
    rwi/facilities/age60_share/total_cases value is replaced by that column's
    mean instead; population and area are never imputed.
    """
    columns = {"rwi": poverty, "facilities": health, "age60_share": age, "total_cases": cases}
    all_keys = set(population)
    for source in columns.values():
        all_keys |= set(source)

    means = {}
    if impute:
        for name, source in columns.items():
            if source:
                means[name] = sum(source.values()) / len(source)

    records, exclusions = [], []
    for key in sorted(all_keys):
        missing = []
        if key not in population:
            missing.append("population")
        values = {}
        for name, source in columns.items():
            if key in source:
                values[name] = float(source[key])
            elif impute and name in means:
                logger.warning("imputed %s for %s with column mean", name, key)
                values[name] = means[name]
            else:
                missing.append(name)
        if missing:
            exclusions.append(f"EXCLUDED {key} missing {','.join(missing)}")
            continue
        pop = population[key]
        density = pop.population / pop.area_km2
        if pop.density is not None and abs(pop.density - density) > 1e-9 * density:
            logger.warning(
                "%s: supplied density %g differs from population/area %g; recomputed",
                key, pop.density, density,
            )
        records.append(
            RegionRecord(
                key=key,
                population=float(pop.population),
                area_km2=float(pop.area_km2),
                density=density,
                **values,
            )
        )
    if not records:
        raise EmptyJoin("no region appears in all indicator sources")
    return JoinResult(records, exclusions)


# ---------------------------------------------------------------------------
# file readers

SCHEMAS = {
    "cases": (("region", "date", "new_cases"), ()),
    "population": (("region", "population", "area_km2"), ("density",)),
    "poverty": (("region", "rwi"), ("population",)),
    "health": (("region", "facilities"), ()),
    "age": (("region", "age60_share"), ()),
}

_COUNT_COLUMNS = {"new_cases", "facilities", "population"}


def _parse_value(column, text, path, lineno):
    if text is None or text.strip() == "":
        raise ParseError(f"empty value in column {column!r}", path, lineno)
    if column == "date":
        try:
            return dt.date.fromisoformat(text.strip())
        except ValueError:
            raise ParseError(f"bad date {text!r}", path, lineno) from None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: {text!r} is not a number", path, lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value", path, lineno)
    if column in _COUNT_COLUMNS and (value < 0 or value != int(value)):
        raise ParseError(f"column {column!r}: {text!r} is not a non-negative count", path, lineno)
    if column == "age60_share" and not 0.0 <= value <= 1.0:
        raise ParseError(f"age60_share {value} outside [0, 1]", path, lineno)
    if column == "area_km2" and value <= 0:
        raise ParseError("area_km2 must be positive", path, lineno)
    if column == "density" and value <= 0:
        raise ParseError("density must be positive", path, lineno)
    return value


@dataclass
class ParsedRow:
    region: str
    values: dict
    line: int


def read_indicator_file(path: str | Path, kind: str) -> list[ParsedRow]:
    """Parse one indicator CSV against its schema.

    Raises :class:`ParseError` naming the file and line on any malformed row.
    """
    required, optional = SCHEMAS[kind]
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    rows = []
    with fh:
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("missing header row", path, 1)
            header = [h.strip().lstrip("﻿").lower() for h in header]
            absent = [c for c in required if c not in header]
            if absent:
                raise ParseError(f"header lacks column(s) {', '.join(absent)}", path, 1)
            index = {c: header.index(c) for c in required + optional if c in header}
            for lineno, cells in enumerate(reader, start=2):
                if not cells or all(not c.strip() for c in cells):
                    continue
                if len(cells) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, found {len(cells)}", path, lineno
                    )
                region = cells[index["region"]]
                if not region.strip():
                    raise ParseError("empty region name", path, lineno)
                values = {}
                for column, i in index.items():
                    if column == "region":
                        continue
                    if column in optional and cells[i].strip() == "":
                        continue
                    values[column] = _parse_value(column, cells[i], path, lineno)
                rows.append(ParsedRow(region, values, lineno))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(str(exc), path, getattr(reader, "line_num", None)) from None
    return rows


def read_subunit_map(path: str | Path) -> dict[str, str]:
    """``subunit,region`` CSV -> {normalized sub-unit: raw region name}."""
    path = Path(path)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"subunit", "region"} <= set(reader.fieldnames):
            raise ParseError("header must contain 'subunit,region'", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row["subunit"] or not row["region"]:
                raise ParseError("empty subunit or region", path, lineno)
            out[normalize_name(row["subunit"])] = row["region"]
    return out


# ---------------------------------------------------------------------------
# whole-directory ingestion


@dataclass
class IngestResult:
    records: list[RegionRecord]
    exclusions: list[str]
    daily_cases: dict[str, list[tuple[dt.date, float]]] = field(default_factory=dict)


def _state_level(rows, column, namer, path, subunits, rules, sub_populations):
    """Resolve one column of parsed rows to {region key: value}."""
    direct: dict[str, float] = {}
    sub_rows = []
    sub_weights = {}
    for row in rows:
        if column not in row.values:
            continue
        name = normalize_name(row.region)
        if subunits and name in subunits:
            sub_rows.append(RawIndicatorRow(row.region, row.values[column]))
            if "population" in row.values:
                sub_weights[name] = row.values["population"]
            continue
        key = namer(row.region)
        if key in direct:
            raise ParseError(f"duplicate region {key!r}", path, row.line)
        direct[key] = row.values[column]
    if sub_rows:
        mapping = {s: namer(r) for s, r in subunits.items()}
        rule = rules.get(column, SUM)
        weights = {**sub_populations, **sub_weights} if rule == WEIGHTED_MEAN else None
        for key, value in aggregate_subunits(sub_rows, mapping, rule, weights).items():
            if key in direct:
                raise ParseError(f"region {key!r} given both directly and via sub-units", path)
            direct[key] = value
    return direct


def ingest(
    paths: Mapping[str, str | Path],
    year: int = 2020,
    strict: bool = True,
    alias_table: Mapping[str, str] | None = None,
    subunit_map: Mapping[str, str] | None = None,
    rules: Mapping[str, str] | None = None,
    impute: bool = False,
) -> IngestResult:
    """Read the five indicator files and return the harmonized region table.

    ``paths`` maps each of ``cases, population, poverty, health, age`` to a
    file. Case rows outside ``year`` are dropped before totals are formed.
    """
    missing = [k for k in INDICATOR_FILES if k not in paths]
    if missing:
        raise InputError(f"no path given for: {', '.join(missing)}")
    rules = {**DEFAULT_RULES, **(rules or {})}
    namer = RegionNamer(alias_table, strict=strict)
    subunits = {normalize_name(k): v for k, v in (subunit_map or {}).items()}

    parsed = {kind: read_indicator_file(paths[kind], kind) for kind in INDICATOR_FILES}

    sub_populations = {}
    if subunits:
        for row in parsed["population"]:
            name = normalize_name(row.region)
            if name in subunits:
                sub_populations[name] = row.values["population"]

    def level(kind, column):
        return _state_level(parsed[kind], column, namer, Path(paths[kind]),
                            subunits, rules, sub_populations)

    pops = level("population", "population")
    areas = level("population", "area_km2")
    densities = level("population", "density") if not subunits else {}
    population = {
        k: PopulationRow(pops[k], areas[k], densities.get(k))
        for k in pops if k in areas
    }

    # cases: filter to the year, then resolve names and sum per (region, date)
    case_rows = [
        RawIndicatorRow(r.region, r.values["new_cases"], r.values["date"])
        for r in parsed["cases"]
    ]
    case_rows = align_year(case_rows, year)
    daily: dict[str, dict[dt.date, float]] = defaultdict(lambda: defaultdict(float))
    for row in case_rows:
        name = normalize_name(row.region_name)
        if subunits and name in subunits:
            key = namer(subunits[name])
        else:
            key = namer(row.region_name)
        daily[key][row.date] += row.value
    totals = {k: sum(v.values()) for k, v in daily.items()}

    result = build_region_table(
        population,
        level("poverty", "rwi"),
        level("health", "facilities"),
        level("age", "age60_share"),
        totals,
        impute=impute,
    )
    kept = {r.key for r in result.records}
    daily_sorted = {
        k: sorted(daily[k].items()) for k in sorted(daily) if k in kept
    }
    return IngestResult(result.records, result.exclusions, daily_sorted)


REGION_COLUMNS = ("region",) + RegionRecord.FIELDS


def write_regions_csv(records: Sequence[RegionRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REGION_COLUMNS)
        for rec in records:
            writer.writerow([rec.key] + [f"{getattr(rec, f):.12g}" for f in RegionRecord.FIELDS])
