"""End-to-end pipeline: configuration, stage functions and output writers.

The CLI is a thin layer over this module; the demos call it directly.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from . import geo, indicators, ingest, scoring, stats, temporal
from .errors import InputError
from .scoring import WeightVector

logger = logging.getLogger(__name__)

OUTPUT_FILES = (
    "regions.csv",
    "factors.csv",
    "scores.csv",
    "stats.json",
    "sensitivity.json",
    "temporal.csv",
    "report.txt",
) + tuple(f"{v}.svg" for v in geo.MAP_VARIABLES)

BETA_VALUES = (0.3, 0.4, 0.5)


@dataclass
class PipelineConfig:
    inputs: dict[str, Path] = field(default_factory=dict)
    aliases: Path | None = None
    geojson: Path | None = None
    subunit_map: Path | None = None
    name_property: str = geo.DEFAULT_NAME_PROPERTY
    weights: WeightVector = scoring.DEFAULT_WEIGHTS
    year: int = 2020
    strict: bool = True
    impute: bool = False
    out: Path = Path("out")
    display_scale: float = 1.0

    def validate(self):
        missing = [k for k in ingest.INDICATOR_FILES if k not in self.inputs]
        if missing:
            raise InputError(f"no input path for: {', '.join(missing)}")
        if not 1000 <= int(self.year) <= 9999:
            raise InputError(f"year {self.year} is not a 4-digit year")
        if not (math.isfinite(self.display_scale) and self.display_scale > 0):
            raise InputError("display_scale must be a positive number")
        return self


def fixture_dir() -> Path:
    return Path(str(resources.files("statevuln").joinpath("data/fixture")))


def input_dir_paths(directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    return {k: directory / f"{k}.csv" for k in ingest.INDICATOR_FILES}


def fixture_config(**overrides) -> PipelineConfig:
    """Configuration pointing at the bundled synthetic fixture."""
    d = fixture_dir()
    cfg = PipelineConfig(inputs=input_dir_paths(d), geojson=d / "regions.geojson")
    return replace(cfg, **overrides)


def _weights_from(obj) -> WeightVector:
    if isinstance(obj, dict):
        return WeightVector(**{k: float(obj[k]) for k in scoring.WEIGHT_NAMES if k in obj})
    return WeightVector.from_sequence(obj)


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a JSON config. Relative paths resolve against the config's folder.

    Recognised keys: ``weights`` ({alpha, beta, gamma, delta}),
    ``display_scale``, ``year``, ``strict``, ``impute``, ``out``,
    ``name_property``, ``input_dir`` and ``inputs`` (cases, population,
    poverty, health, age, aliases, geojson, subunit_map).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a JSON object")
    root = path.parent
    cfg = base or PipelineConfig()

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else root / p

    changes: dict[str, Any] = {}
    inputs = dict(cfg.inputs)
    if "input_dir" in doc:
        inputs.update(input_dir_paths(resolve(doc["input_dir"])))
    for key, value in (doc.get("inputs") or {}).items():
        if key in ingest.INDICATOR_FILES:
            inputs[key] = resolve(value)
        elif key in ("aliases", "geojson", "subunit_map"):
            changes[key] = resolve(value) if value else None
        else:
            raise InputError(f"{path}: unknown input {key!r}")
    changes["inputs"] = inputs
    if "weights" in doc:
        changes["weights"] = _weights_from(doc["weights"])
    for key in ("display_scale", "year", "strict", "impute", "name_property"):
        if key in doc:
            changes[key] = doc[key]
    if "out" in doc:
        changes["out"] = resolve(doc["out"])
    return replace(cfg, **changes)


# ---------------------------------------------------------------------------
# stages


def run_ingest(cfg: PipelineConfig) -> ingest.IngestResult:
    cfg.validate()
    aliases = ingest.load_alias_table(cfg.aliases)
    subunits = ingest.read_subunit_map(cfg.subunit_map) if cfg.subunit_map else None
    return ingest.ingest(
        cfg.inputs,
        year=int(cfg.year),
        strict=cfg.strict,
        alias_table=aliases,
        subunit_map=subunits,
        impute=cfg.impute,
    )


@dataclass
class ScoreBundle:
    records: list
    factors: indicators.FactorTable
    results: list
    summary: scoring.NationalSummary


def run_scoring(records, weights: WeightVector) -> ScoreBundle:
    factors = indicators.build_factor_table(records)
    results = scoring.score_regions(factors, weights)
    summary = scoring.national_summary(
        {r.key: r.score for r in results}, {r.key: r.total_cases for r in records}
    )
    return ScoreBundle(records, factors, results, summary)


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw).to_dict()
    except InputError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def run_sensitivity(factors, weights: WeightVector) -> stats.SensitivityReport:
    variants = stats.beta_variants(weights, BETA_VALUES)
    return stats.sensitivity_analysis(factors, weights, variants, include_log_case=True)


def run_stats(bundle: ScoreBundle, weights: WeightVector, standardize_condition=False) -> dict:
    f = bundle.factors
    keys = f.keys
    columns = {c: [getattr(f.rows[k], c) for k in keys] for c in indicators.FACTOR_COLUMNS}
    corr_cols = dict(columns, cases_per_100k=[f.rows[k].cases_per_100k for k in keys])
    try:
        corr = stats.correlation_matrix(corr_cols).to_dict()
    except InputError as exc:
        corr = {"error": f"{type(exc).__name__}: {exc}"}
    try:
        vifs = {k: _json_number(v) for k, v in stats.vif_table(columns).items()}
    except InputError as exc:
        vifs = {"error": f"{type(exc).__name__}: {exc}"}
    regression = _safe(stats.case_model, f, standardize_condition=standardize_condition)
    if "error" not in regression:
        regression["outcome"] = "cases_norm"
    log_regression = _safe(stats.log_case_model, f, standardize_condition=standardize_condition)
    if "error" not in log_regression:
        log_regression["outcome"] = "minmax(ln(1 + cases_per_100k))"
    return {
        "n": len(f),
        "weights": dict(zip(scoring.WEIGHT_NAMES, weights.as_tuple())),
        "correlation": corr,
        "regression": regression,
        "log_case_regression": log_regression,
        "vif": vifs,
        "sensitivity": run_sensitivity(f, weights).to_dict(),
    }


@dataclass
class TemporalBundle:
    rows: list  # (series_id, raw, smoothed)
    peaks: list


def run_temporal(ingested: ingest.IngestResult, records) -> TemporalBundle:
    daily = {
        k: temporal.CaseSeries.from_pairs(k, pairs) for k, pairs in ingested.daily_cases.items()
    }
    national = temporal.national_series(daily)
    smoothed = temporal.rolling_average(national, 7)
    national_weekly = temporal.weekly_aggregate(national)
    national_weekly_smoothed = temporal.weekly_aggregate(smoothed)
    rows = [
        ("national_daily", national, smoothed),
        ("national_weekly", national_weekly, national_weekly_smoothed),
    ]
    if len(records) >= 3:
        terciles = indicators.density_terciles({r.key: r.density for r in records})
        pops = {r.key: r.population for r in records}
        groups = temporal.tercile_case_rate_series(daily, terciles, pops)
        for cls in indicators.TERCILE_CLASSES:
            if cls in groups:
                rows.append((f"{cls}_density_weekly_per_100k", groups[cls].raw, groups[cls].smoothed))
    peaks = temporal.local_maxima(national_weekly_smoothed)
    return TemporalBundle(rows, peaks)


def map_layers(bundle: ScoreBundle) -> dict[str, dict[str, float]]:
    f = bundle.factors
    return {
        "risk_score": {r.key: r.score for r in bundle.results},
        "density": f.column("density_score"),
        "poverty": f.column("poverty_score"),
        "healthcare": f.column("healthcare_score"),
        "age": f.column("age_score"),
    }


def run_maps(cfg: PipelineConfig, bundle: ScoreBundle, out_dir: Path) -> list[Path]:
    if cfg.geojson is None:
        raise InputError(
            "map output needs a GeoJSON boundary file: pass --geojson PATH "
            "or set inputs.geojson in the config"
        )
    namer = ingest.RegionNamer(ingest.load_alias_table(cfg.aliases), strict=cfg.strict)
    geoms = geo.load_regions(cfg.geojson, cfg.name_property, namer)
    return geo.write_maps(geoms, map_layers(bundle), out_dir)


# ---------------------------------------------------------------------------
# writers


def _json_number(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf"
    return x


def _sanitize(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_sanitize(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _table(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip())
    return lines


def _num(x, spec=".4f"):
    if x is None:
        return "n/a"
    if isinstance(x, str):
        return x
    return format(x, spec)


def _regression_lines(title, reg):
    lines = [title]
    if "error" in reg:
        return lines + [f"  not estimated: {reg['error']}"]
    rows = [
        (c["name"], _num(c["coefficient"]), _num(c["std_error"]), _num(c["t"], ".3f"), _num(c["p_value"], ".4f"))
        for c in reg["coefficients"]
    ]
    lines += _table(("term", "coef", "std err", "t", "p"), rows)
    lines.append(f"R^2 = {reg['r_squared']:.4f}   condition number = {reg['condition_number']:.4g}   n = {reg['n']}")
    return lines


def build_report(
    cfg: PipelineConfig,
    bundle: ScoreBundle,
    exclusions: list[str],
    stats_doc: dict,
    sens: stats.SensitivityReport,
    temporal_bundle: TemporalBundle | None,
) -> str:
    w = cfg.weights
    lines = [
        "Composite COVID-19 vulnerability report",
        "=======================================",
        f"weights: {w}  (density, poverty, healthcare, age)",
        f"year: {cfg.year}   regions scored: {len(bundle.results)}",
    ]
    lines += [f"  {e}" for e in exclusions] if exclusions else ["exclusions: none"]
    lines.append("")

    lines.append("Top 10 high-risk regions")
    rows = [
        (r.rank, r.key, f"{r.score:.4f}", f"{r.structural:.4f}", r.risk_class or "",
         f"{100 * bundle.summary.case_share.get(r.key, 0.0):.1f}%")
        for r in bundle.results[:10]
    ]
    lines += _table(("rank", "region", "score", "structural", "class", "case share"), rows)
    s = bundle.summary
    lines.append(
        f"mean score {s.mean_score:.4f}; highest {s.max_region} at {s.max_score:.4f}; "
        f"total cases {s.total_cases:.0f}"
    )
    if cfg.display_scale != 1.0:
        lines.append(
            f"display scale x{cfg.display_scale:g} (non-normative): highest "
            f"{s.max_score * cfg.display_scale:.2f}, mean {s.mean_score * cfg.display_scale:.2f}"
        )
    lines.append("")

    corr = stats_doc["correlation"]
    lines.append("Spearman correlations (rho)")
    if "error" in corr:
        lines.append(f"  not estimated: {corr['error']}")
    else:
        short = [v.replace("_score", "") for v in corr["variables"]]
        rows = [(name,) + tuple(_num(x, ".3f") for x in row) for name, row in zip(short, corr["rho"])]
        lines += _table(("",) + tuple(short), rows)
    lines.append("")

    lines += _regression_lines("OLS regression: cases_norm on the four factors", stats_doc["regression"])
    lines.append("")
    lines += _regression_lines("OLS regression: normalized log case rate on the four factors",
                               stats_doc["log_case_regression"])
    lines.append("")

    lines.append("Variance inflation factors")
    vifs = stats_doc["vif"]
    if "error" in vifs:
        lines.append(f"  not estimated: {vifs['error']}")
    else:
        lines += _table(("predictor", "VIF"), [(k, _num(v, ".3f")) for k, v in vifs.items()])
    lines.append("")

    if temporal_bundle is not None:
        peaks = ", ".join(d.isoformat() for d in temporal_bundle.peaks) or "none"
        lines.append(f"Local peaks of smoothed weekly national cases (informational): {peaks}")
        lines.append("")

    lines.append("Weight sensitivity (poverty weight varied, others rescaled)")
    rows = [
        (v.label, " ".join(f"{x:.4f}" for x in v.weights.as_tuple()),
         f"{v.rank_correlation:.4f}", f"{v.top_k_overlap}/{sens.k}")
        for v in sens.variants
    ]
    if sens.log_case_variant is not None:
        v = sens.log_case_variant
        rows.append((v.label, " ".join(f"{x:.4f}" for x in v.weights.as_tuple()),
                     f"{v.rank_correlation:.4f}", f"{v.top_k_overlap}/{sens.k}"))
    lines += _table(("variant", "weights", "rank corr", "top-k overlap"), rows)
    betas = ",".join(f"{v.weights.beta:g}" for v in sens.variants)
    lines.append(f"rankings stable under β ∈ {{{betas}}}: {'yes' if sens.stable else 'no'}")
    return "\n".join(lines) + "\n"


def run_all(cfg: PipelineConfig, out_dir: Path | None = None) -> dict:
    """Run every stage and write the full output tree. Returns a status dict."""
    out_dir = Path(out_dir or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingested = run_ingest(cfg)
    ingest.write_regions_csv(ingested.records, out_dir / "regions.csv")
    bundle = run_scoring(ingested.records, cfg.weights)
    indicators.write_factors_csv(bundle.factors, out_dir / "factors.csv")
    scoring.write_scores_csv(bundle.results, bundle.summary, cfg.weights,
                             out_dir / "scores.csv", cfg.display_scale)
    stats_doc = run_stats(bundle, cfg.weights)
    write_json(stats_doc, out_dir / "stats.json")
    sens = run_sensitivity(bundle.factors, cfg.weights)
    write_json(sens.to_dict(), out_dir / "sensitivity.json")
    tb = run_temporal(ingested, ingested.records)
    temporal.write_temporal_csv(tb.rows, out_dir / "temporal.csv")
    maps = []
    if cfg.geojson is not None:
        maps = run_maps(cfg, bundle, out_dir)
    else:
        logger.warning("no GeoJSON configured; maps skipped")
    report = build_report(cfg, bundle, ingested.exclusions, stats_doc, sens, tb)
    (out_dir / "report.txt").write_text(report, encoding="utf-8")
    if ingested.exclusions:
        (out_dir / "exclusions.txt").write_text("\n".join(ingested.exclusions) + "\n", encoding="utf-8")
    return {
        "exclusions": ingested.exclusions,
        "maps": maps,
        "bundle": bundle,
        "report": report,
    }
