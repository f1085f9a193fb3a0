"""Command-line entry point: ``statevuln <command> [options]``.

Exit codes: 0 success, 1 error, 2 success with warnings (strict-mode
exclusions, skipped maps).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import indicators, ingest, pipeline, scoring, temporal
from .errors import VulnerabilityError
from .scoring import WeightVector

EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2


class _Formatter(logging.Formatter):
    def __init__(self, color):
        super().__init__()
        self.color = color

    def format(self, record):
        level = record.levelname.lower()
        prefix = f"{level}:"
        if self.color and record.levelno >= logging.WARNING:
            prefix = f"\033[33m{prefix}\033[0m"
        return f"{prefix} {record.getMessage()}"


def _setup_logging(verbose=False):
    color = sys.stderr.isatty() and "NO_COLOR" not in os.environ
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter(color))
    root = logging.getLogger("statevuln")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if verbose else logging.WARNING)
    root.propagate = False


def _common(parser):
    g = parser.add_argument_group("inputs")
    g.add_argument("--config", type=Path, help="JSON config file")
    g.add_argument("--fixture", action="store_true", help="use the bundled synthetic 8-region fixture")
    g.add_argument("--input-dir", type=Path, help="folder holding cases/population/poverty/health/age.csv")
    for kind in ingest.INDICATOR_FILES:
        g.add_argument(f"--{kind}", type=Path, metavar="CSV", help=f"{kind}.csv path")
    g.add_argument("--aliases", type=Path, metavar="CSV", help="alias,canonical table")
    g.add_argument("--subunit-map", type=Path, metavar="CSV", help="subunit,region table")
    g.add_argument("--geojson", type=Path, help="region boundaries (GeoJSON)")
    g.add_argument("--name-property", help="GeoJSON property holding the region name")
    o = parser.add_argument_group("options")
    o.add_argument("--weights", help="alpha,beta,gamma,delta (must sum to 1)")
    o.add_argument("--year", type=int)
    mode = o.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=None)
    mode.add_argument("--lenient", dest="strict", action="store_false")
    o.add_argument("--impute", action="store_true", default=None,
                   help="fill missing indicator values with the column mean")
    o.add_argument("--display-scale", type=float, help="non-normative multiplier for displayed scores")
    o.add_argument("--out", type=Path, help="output directory")
    o.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statevuln",
        description="State-level composite COVID-19 vulnerability scoring toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "harmonize the indicator files into regions.csv",
        "score": "compute composite scores into scores.csv",
        "stats": "correlation, regression, VIF and sensitivity into stats.json",
        "sensitivity": "weight sensitivity into sensitivity.json",
        "temporal": "weekly and smoothed case series into temporal.csv",
        "map": "five choropleth SVGs",
        "report": "human-readable report.txt",
        "run-all": "every step above",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "score":
            p.add_argument("--dump-factors", action="store_true", help="also write factors.csv")
        if name == "stats":
            p.add_argument("--standardized-condition", action="store_true",
                           help="condition number on unit-length columns")
    return parser


def config_from_args(args) -> pipeline.PipelineConfig:
    cfg = pipeline.fixture_config() if args.fixture else pipeline.PipelineConfig()
    if args.config:
        cfg = pipeline.load_config(args.config, cfg)
    changes = {}
    inputs = dict(cfg.inputs)
    if args.input_dir:
        inputs.update(pipeline.input_dir_paths(args.input_dir))
    for kind in ingest.INDICATOR_FILES:
        if getattr(args, kind):
            inputs[kind] = getattr(args, kind)
    changes["inputs"] = inputs
    for name in ("aliases", "subunit_map", "geojson", "name_property", "year",
                 "strict", "impute", "display_scale", "out"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.weights:
        try:
            parts = [float(x) for x in args.weights.split(",")]
        except ValueError:
            raise scoring.WeightSumViolation(f"cannot parse --weights {args.weights!r}") from None
        changes["weights"] = WeightVector.from_sequence(parts)
    return replace(cfg, **changes).validate()


def _summary_lines(bundle):
    s = bundle.summary
    top = bundle.results[0]
    return [
        f"regions: {len(bundle.results)}",
        f"rank 1: {top.key} (score {top.score:.4f}, case share {100 * s.case_share.get(top.key, 0):.1f}%)",
        f"mean score: {s.mean_score:.4f}",
    ]


def _run(args) -> int:
    cfg = config_from_args(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    cmd = args.command

    if cmd == "run-all":
        result = pipeline.run_all(cfg, out)
        if cfg.strict and result["exclusions"]:
            status = EXIT_WARN
        if not result["maps"]:
            status = EXIT_WARN
        for line in _summary_lines(result["bundle"]):
            print(line)
        return status

    if cmd == "map" and cfg.geojson is None:
        raise VulnerabilityError(
            "map needs a GeoJSON boundary file: pass --geojson PATH or set inputs.geojson in the config"
        )

    ingested = pipeline.run_ingest(cfg)
    if ingested.exclusions:
        (out / "exclusions.txt").write_text("\n".join(ingested.exclusions) + "\n", encoding="utf-8")
        if cfg.strict:
            status = EXIT_WARN

    if cmd == "ingest":
        ingest.write_regions_csv(ingested.records, out / "regions.csv")
        print(f"regions: {len(ingested.records)}; excluded: {len(ingested.exclusions)}")
        return status

    bundle = pipeline.run_scoring(ingested.records, cfg.weights)
    if cmd == "score":
        scoring.write_scores_csv(bundle.results, bundle.summary, cfg.weights,
                                 out / "scores.csv", cfg.display_scale)
        if args.dump_factors:
            indicators.write_factors_csv(bundle.factors, out / "factors.csv")
        for line in _summary_lines(bundle):
            print(line)
    elif cmd == "stats":
        doc = pipeline.run_stats(bundle, cfg.weights, args.standardized_condition)
        pipeline.write_json(doc, out / "stats.json")
    elif cmd == "sensitivity":
        sens = pipeline.run_sensitivity(bundle.factors, cfg.weights)
        pipeline.write_json(sens.to_dict(), out / "sensitivity.json")
        print(f"rankings stable: {'yes' if sens.stable else 'no'}")
    elif cmd == "temporal":
        tb = pipeline.run_temporal(ingested, ingested.records)
        temporal.write_temporal_csv(tb.rows, out / "temporal.csv")
    elif cmd == "map":
        for path in pipeline.run_maps(cfg, bundle, out):
            print(path)
    elif cmd == "report":
        doc = pipeline.run_stats(bundle, cfg.weights)
        sens = pipeline.run_sensitivity(bundle.factors, cfg.weights)
        tb = pipeline.run_temporal(ingested, ingested.records)
        report = pipeline.build_report(cfg, bundle, ingested.exclusions, doc, sens, tb)
        (out / "report.txt").write_text(report, encoding="utf-8")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return _run(args)
    except VulnerabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {str(name) + ': ' if name else ''}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
