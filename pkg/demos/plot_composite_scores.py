"""
Composite vulnerability scores on the bundled fixture
=====================================================

Load the eight synthetic regions, turn the raw indicators into [0, 1]
factors and combine them into one score per region.
"""

from statevuln import indicators, pipeline, scoring

# The fixture spells the same region several ways ("FCT", "Abuja",
# "Federal Capital Territory"); ingest folds them onto one key.
ingested = pipeline.run_ingest(pipeline.fixture_config())
for rec in ingested.records:
    print(f"{rec.key:8s} pop={rec.population:>12,.0f} density={rec.density:8.1f} cases={rec.total_cases:>7,.0f}")

###############################################################################
# Each factor is min-max scaled. Wealth and facility access are flipped so
# that a higher value always means more vulnerable.
table = indicators.build_factor_table(ingested.records)
for key in table.keys:
    row = table.rows[key]
    print(key, [round(getattr(row, c), 3) for c in indicators.FACTOR_COLUMNS], round(row.cases_norm, 3))

###############################################################################
# The structural score is the weighted sum of the four factors; the final
# score multiplies it by the normalized case rate.
weights = scoring.DEFAULT_WEIGHTS
results = scoring.score_regions(table, weights)
print(f"\nweights (density, poverty, healthcare, age): {weights}")
for r in results:
    print(f"{r.rank}. {r.key:8s} score={r.score:.4f} structural={r.structural:.4f} class={r.risk_class}")

###############################################################################
# Case shares use the raw totals, not the normalized rate.
summary = scoring.national_summary({r.key: r.score for r in results},
                                   {rec.key: rec.total_cases for rec in ingested.records})
print(f"\n{summary.max_region} holds {100 * summary.case_share[summary.max_region]:.1f}% of all cases")

###############################################################################
# A different weighting is one constructor call away. Weights that do not
# sum to 1 are rejected.
equal = scoring.WeightVector(0.25, 0.25, 0.25, 0.25)
print([r.key for r in scoring.score_regions(table, equal)])
