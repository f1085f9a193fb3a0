"""statevuln: composite COVID-19 vulnerability scoring for sub-national regions.

Modules
-------
ingest       read indicator CSVs, canonicalize region names, aggregate sub-units
indicators   min-max factors, case rates per 100k, density terciles
scoring      weighted composite score, percentile classes, rankings
stats        Spearman, OLS, VIF, weight sensitivity, log-case model
temporal     weekly aggregation, rolling means, density-group curves
geo          GeoJSON boundaries, spherical areas, SVG choropleths
pipeline     end-to-end orchestration used by the ``statevuln`` CLI
"""
from .errors import VulnerabilityError
from .indicators import FactorTable, build_factor_table, min_max_normalize
from .ingest import RegionRecord, canonicalize_region_name
from .scoring import DEFAULT_WEIGHTS, WeightVector, composite_score, rank_regions, score_regions

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_WEIGHTS",
    "FactorTable",
    "RegionRecord",
    "VulnerabilityError",
    "WeightVector",
    "build_factor_table",
    "canonicalize_region_name",
    "composite_score",
    "min_max_normalize",
    "rank_regions",
    "score_regions",
]
