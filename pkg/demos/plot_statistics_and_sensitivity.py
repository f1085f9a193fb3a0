"""
Correlation, regression and weight sensitivity
==============================================

How do the factors relate to the case rate, how collinear are they, and
does the ranking survive a change in the poverty weight?
"""

import numpy as np

from statevuln import indicators, pipeline, scoring, stats

ingested = pipeline.run_ingest(pipeline.fixture_config())
table = indicators.build_factor_table(ingested.records)
keys = table.keys

###############################################################################
# Spearman correlation of each factor with the case rate. With only eight
# regions the p-value comes from enumerating all 8! orderings.
rate = [table.rows[k].cases_per_100k for k in keys]
for c in indicators.FACTOR_COLUMNS:
    res = stats.spearman([getattr(table.rows[k], c) for k in keys], rate)
    print(f"{c:18s} rho={res.rho:+.3f} p={res.p_value:.3f}")

###############################################################################
# Ordinary least squares of the normalized case rate on the four factors.
# Eight points and five coefficients leave three degrees of freedom, so
# treat the standard errors with suspicion.
fit = stats.case_model(table)
for name, b, se in zip(fit.names, fit.coefficients, fit.std_errors):
    print(f"{name:18s} {b:+.3f} ({se:.3f})")
print(f"R^2={fit.r_squared:.3f}  condition number={fit.condition_number:.1f}")

# the log variant damps the influence of one very high case rate
print("log model:", np.round(stats.log_case_model(table).coefficients, 3))

###############################################################################
# Variance inflation factors flag collinear predictors.
print(stats.vif_table({c: [getattr(table.rows[k], c) for k in keys] for c in indicators.FACTOR_COLUMNS}))

###############################################################################
# Re-rank with beta in {0.3, 0.4, 0.5}, rescaling the other weights so the
# total stays 1. The fixture is deliberately not dominance-ordered, so the
# ranking does move a little at beta = 0.5.
report = stats.sensitivity_analysis(table, scoring.DEFAULT_WEIGHTS, include_log_case=True)
for v in report.variants + (report.log_case_variant,):
    print(f"{v.label:10s} rank corr={v.rank_correlation:.4f} top-{report.k} overlap={v.top_k_overlap}")
print("stable:", report.stable)
