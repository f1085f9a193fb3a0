"""Turn raw indicator columns into normalized risk factors.

Every factor lives in [0, 1] and is oriented so that a larger value means a
larger contribution to risk. Maps are keyed by canonical region name.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    NonFiniteInput,
    NonPositiveDensity,
    OutOfRangeShare,
    TooFewRegions,
    ZeroPopulation,
)

logger = logging.getLogger(__name__)

PER_100K = 100_000.0

TERCILE_CLASSES = ("low", "medium", "high")

# Single switch for the healthcare direction: True scores access deficit.
INVERT_HEALTHCARE_ACCESS = True


def min_max_normalize(values: Mapping[str, float]) -> dict[str, float]:
    """Rescale to [0, 1] with (v - min) / (max - min).

    A constant input (max == min) maps to all zeros.
    """
    if not values:
        raise ValueError("min_max_normalize needs at least one value")
    for key, v in values.items():
        if not math.isfinite(v):
            raise NonFiniteInput(f"non-finite value for {key!r}")
    lo = min(values.values())
    hi = max(values.values())
    span = hi - lo
    if span == 0:
        return {k: 0.0 for k in values}
    out = {}
    for k, v in values.items():
        x = (v - lo) / span
        out[k] = min(1.0, max(0.0, x))
    return out


def _inverted(values):
    norm = min_max_normalize(values)
    if all(v == 0.0 for v in norm.values()) and len(norm) > 1:
        logger.warning("constant input to an inverted factor; every region scores 1")
    return {k: 1.0 - v for k, v in norm.items()}


def poverty_factor(rwi: Mapping[str, float]) -> dict[str, float]:
    """Poverty as the inverted, normalized relative wealth index."""
    return _inverted(rwi)


def access_per_100k(
    facilities: Mapping[str, float], population: Mapping[str, float]
) -> dict[str, float]:
    out = {}
    for key, count in facilities.items():
        pop = population.get(key)
        if pop is None or not pop > 0:
            raise ZeroPopulation(f"population for {key!r} must be positive")
        out[key] = count / pop * PER_100K
    return out


def healthcare_factor(
    facilities: Mapping[str, float], population: Mapping[str, float]
) -> dict[str, float]:
    """Facility deficit: 1 - minmax(facilities per 100k persons).

    Set ``INVERT_HEALTHCARE_ACCESS = False`` to score raw access instead.
    """
    access = access_per_100k(facilities, population)
    if INVERT_HEALTHCARE_ACCESS:
        return _inverted(access)
    return min_max_normalize(access)


def age_factor(age60_share: Mapping[str, float]) -> dict[str, float]:
    for key, share in age60_share.items():
        if not 0.0 <= share <= 1.0:
            raise OutOfRangeShare(f"age60_share for {key!r} is {share}, outside [0, 1]")
    return min_max_normalize(age60_share)


def density_factor(density: Mapping[str, float]) -> dict[str, float]:
    for key, d in density.items():
        if not d > 0:
            raise NonPositiveDensity(f"density for {key!r} must be positive")
    return min_max_normalize(density)


def cases_per_100k(cases: float, population: float) -> float:
    """Case count per 100,000 persons."""
    if not population > 0:
        raise ZeroPopulation("population must be positive")
    return cases / population * PER_100K


def normalize_case_rates(rates: Mapping[str, float]) -> dict[str, float]:
    return min_max_normalize(rates)


def split_thirds(order: Sequence[str]) -> dict[str, str]:
    """Assign low/medium/high to an ascending ordering.

    Boundaries sit at floor(n/3) and floor(2n/3), so n=37 gives 12/12/13.
    """
    n = len(order)
    if n < 3:
        raise TooFewRegions(f"need at least 3 regions, got {n}")
    first, second = n // 3, (2 * n) // 3
    out = {}
    for i, key in enumerate(order):
        out[key] = "low" if i < first else "medium" if i < second else "high"
    return out


def ascending_order(values: Mapping[str, float]) -> list[str]:
    """Keys sorted by value, ties broken by key name."""
    return sorted(values, key=lambda k: (values[k], k))


def density_terciles(density: Mapping[str, float]) -> dict[str, str]:
    return split_thirds(ascending_order(density))


@dataclass(frozen=True)
class FactorRow:
    density_score: float
    poverty_score: float
    healthcare_score: float
    age_score: float
    cases_per_100k: float
    cases_norm: float


FACTOR_COLUMNS = ("density_score", "poverty_score", "healthcare_score", "age_score")


@dataclass(frozen=True)
class FactorTable:
    """Normalized factors for each region, keyed by canonical name."""

    rows: dict[str, FactorRow]

    @property
    def keys(self) -> list[str]:
        return sorted(self.rows)

    def column(self, name: str) -> dict[str, float]:
        return {k: getattr(self.rows[k], name) for k in self.keys}

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_columns(cls, **columns: Mapping[str, float]) -> "FactorTable":
        """Build from one mapping per FactorRow field.

        ``cases_per_100k`` may be omitted, in which case it is set to
        ``cases_norm``; the score only needs the normalized rate.
        """
        if "cases_per_100k" not in columns:
            columns["cases_per_100k"] = columns["cases_norm"]
        keys = set(columns["cases_norm"])
        for name, col in columns.items():
            keys &= set(col)
        return cls({k: FactorRow(**{n: float(c[k]) for n, c in columns.items()}) for k in sorted(keys)})


def build_factor_table(records) -> FactorTable:
    """Compute every factor from a sequence of :class:`RegionRecord`."""
    pop = {r.key: r.population for r in records}
    density = density_factor({r.key: r.density for r in records})
    poverty = poverty_factor({r.key: r.rwi for r in records})
    health = healthcare_factor({r.key: r.facilities for r in records}, pop)
    age = age_factor({r.key: r.age60_share for r in records})
    rates = {r.key: cases_per_100k(r.total_cases, r.population) for r in records}
    norm = normalize_case_rates(rates)
    return FactorTable({
        k: FactorRow(density[k], poverty[k], health[k], age[k], rates[k], norm[k])
        for k in sorted(pop)
    })


DUMP_COLUMNS = ("region",) + FACTOR_COLUMNS + ("cases_per_100k", "cases_norm")


def write_factors_csv(table: FactorTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DUMP_COLUMNS)
        for key in table.keys:
            row = table.rows[key]
            writer.writerow([key] + [f"{getattr(row, c):.12g}" for c in DUMP_COLUMNS[1:]])
