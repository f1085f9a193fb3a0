"""Composite risk score, percentile classes and rankings."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

from .errors import MissingFactor, WeightSumViolation
from .indicators import FACTOR_COLUMNS, FactorTable, ascending_order, split_thirds

logger = logging.getLogger(__name__)

WEIGHT_NAMES = ("alpha", "beta", "gamma", "delta")
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Factor weights: density, poverty, healthcare, age. Must sum to 1."""

    alpha: float = 0.2
    beta: float = 0.4
    gamma: float = 0.3
    delta: float = 0.1

    def __post_init__(self):
        for name in WEIGHT_NAMES:
            w = getattr(self, name)
            if not (math.isfinite(w) and 0.0 <= w <= 1.0):
                raise WeightSumViolation(f"weight {name}={w} outside [0, 1]")
        total = self.alpha + self.beta + self.gamma + self.delta
        if abs(total - 1.0) > WEIGHT_TOL:
            raise WeightSumViolation(f"weights sum to {total!r}, expected 1.0")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    @classmethod
    def from_sequence(cls, values) -> "WeightVector":
        values = [float(v) for v in values]
        if len(values) != 4:
            raise WeightSumViolation(f"expected 4 weights, got {len(values)}")
        return cls(*values)

    def vary(self, name: str, value: float) -> "WeightVector":
        """Set one weight and rescale the other three proportionally.

        >>> WeightVector().vary("beta", 0.5).as_tuple()  # doctest: +ELLIPSIS
        (0.1666..., 0.5, 0.25, 0.0833...)
        """
        if name not in WEIGHT_NAMES:
            raise KeyError(name)
        others = [n for n in WEIGHT_NAMES if n != name]
        rest = sum(getattr(self, n) for n in others)
        target = 1.0 - value
        if rest == 0:
            scaled = {n: target / 3 for n in others}
        else:
            scaled = {n: getattr(self, n) * target / rest for n in others}
        return replace(self, **{name: value}, **scaled)

    def __str__(self):
        return " ".join(f"{w:g}" for w in self.as_tuple())


DEFAULT_WEIGHTS = WeightVector()


@dataclass(frozen=True)
class ScoreResult:
    key: str
    structural: float
    score: float
    risk_class: str | None = None
    rank: int | None = None


def _factor_value(factors, key, name):
    row = factors.rows[key] if isinstance(factors, FactorTable) else factors[key]
    try:
        value = getattr(row, name) if not isinstance(row, Mapping) else row[name]
    except (AttributeError, KeyError):
        raise MissingFactor(f"{key!r} lacks {name}") from None
    if value is None or not math.isfinite(value):
        raise MissingFactor(f"{key!r} has no finite {name}")
    return float(value)


def composite_score(factors, weights: WeightVector = DEFAULT_WEIGHTS) -> dict[str, ScoreResult]:
    """Weighted structural sum times the normalized case rate.

    ``factors`` is a :class:`FactorTable` or a mapping of region key to a
    mapping with the four factor scores and ``cases_norm``.
    """
    if not isinstance(weights, WeightVector):
        weights = WeightVector.from_sequence(weights)
    keys = factors.keys if isinstance(factors, FactorTable) else sorted(factors)
    out = {}
    for key in keys:
        d, p, h, a = (_factor_value(factors, key, c) for c in FACTOR_COLUMNS)
        norm = _factor_value(factors, key, "cases_norm")
        structural = weights.alpha * d + weights.beta * p + weights.gamma * h + weights.delta * a
        out[key] = ScoreResult(key, structural, structural * norm)
    return out


def classify_percentile(scores: Mapping[str, float]) -> dict[str, str]:
    """low/medium/high by ascending score rank, ties broken by name."""
    return split_thirds(ascending_order(scores))


def rank_regions(scores: Mapping[str, float]) -> dict[str, int]:
    """1 = highest score; equal scores are ordered by name."""
    order = sorted(scores, key=lambda k: (-scores[k], k))
    return {key: i for i, key in enumerate(order, start=1)}


def score_regions(factors, weights: WeightVector = DEFAULT_WEIGHTS) -> list[ScoreResult]:
    """Score, classify and rank; returned in rank order."""
    raw = composite_score(factors, weights)
    scores = {k: r.score for k, r in raw.items()}
    classes = classify_percentile(scores) if len(scores) >= 3 else {}
    ranks = rank_regions(scores)
    results = [
        replace(r, risk_class=classes.get(k), rank=ranks[k]) for k, r in raw.items()
    ]
    return sorted(results, key=lambda r: r.rank)


@dataclass(frozen=True)
class NationalSummary:
    mean_score: float
    max_score: float
    max_region: str
    case_share: dict[str, float]
    total_cases: float


def national_summary(scores: Mapping[str, float], cases: Mapping[str, float]) -> NationalSummary:
    """Mean and maximum score plus each region's share of all cases.

    When the case total is zero every share is reported as 0.
    """
    if not scores:
        raise ValueError("national_summary needs at least one region")
    mean = sum(scores.values()) / len(scores)
    top = min(scores, key=lambda k: (-scores[k], k))
    total = float(sum(cases.values()))
    if total > 0:
        shares = {k: cases[k] / total for k in sorted(cases)}
    else:
        logger.warning("national case total is zero; case shares reported as 0")
        shares = {k: 0.0 for k in sorted(cases)}
    return NationalSummary(mean, scores[top], top, shares, total)


SCORE_COLUMNS = ("region", "structural", "score", "risk_class", "rank", "case_share")


def write_scores_csv(
    results,
    summary: NationalSummary,
    weights: WeightVector,
    path: str | Path,
    display_scale: float = 1.0,
) -> None:
    """Write the score table in rank order, weights echoed in a header comment."""
    columns = list(SCORE_COLUMNS)
    if display_scale != 1.0:
        columns.append("display_score")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# weights: {weights}\n")
        if display_scale != 1.0:
            fh.write(f"# display_scale: {display_scale:g} (non-normative presentation only)\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in sorted(results, key=lambda r: r.rank):
            row = [
                r.key,
                f"{r.structural:.12g}",
                f"{r.score:.12g}",
                r.risk_class or "",
                r.rank,
                f"{summary.case_share.get(r.key, 0.0):.12g}",
            ]
            if display_scale != 1.0:
                row.append(f"{r.score * display_scale:.12g}")
            writer.writerow(row)
