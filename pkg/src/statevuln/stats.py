"""Statistical validation of the composite score.

Spearman correlation, least-squares regression with diagnostics, variance
inflation factors, weight sensitivity and the log-case alternative model.
Nothing here draws random numbers: small-sample p-values enumerate every
permutation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy import stats as sps

from .errors import (
    ConstantInput,
    LengthMismatch,
    NonFiniteInput,
    RankDeficient,
    TooFewObservations,
)
from .indicators import FACTOR_COLUMNS, FactorTable, min_max_normalize
from .scoring import DEFAULT_WEIGHTS, WeightVector, composite_score, rank_regions

EXACT_MAX_N = 8
PERFECT_COLLINEARITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spearman


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int


def _check_pair(x, y, min_n=3):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise LengthMismatch(f"vectors have shapes {x.shape} and {y.shape}")
    if x.size < min_n:
        raise TooFewObservations(f"need at least {min_n} observations, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("correlation input contains non-finite values")
    return x, y


def _pearson(a, b):
    ac = a - a.mean()
    bc = b - b.mean()
    return float(np.clip(ac @ bc / math.sqrt((ac @ ac) * (bc @ bc)), -1.0, 1.0))


def _exact_p(rx, ry, rho):
    """Two-sided permutation p-value over all n! orderings of ``ry``."""
    xc = rx - rx.mean()
    yc = ry - ry.mean()
    denom = math.sqrt((xc @ xc) * (yc @ yc))
    perms = np.array(list(itertools.permutations(yc)))
    null = perms @ xc / denom
    hits = np.count_nonzero(np.abs(null) >= abs(rho) - 1e-12)
    return hits / len(perms)


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman's rho with average ranks for ties.

    The p-value is exact (permutation enumeration) for n <= 8 and uses the
    t approximation with n - 2 degrees of freedom above that.
    """
    x, y = _check_pair(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantInput("spearman is undefined for a constant vector")
    rx = sps.rankdata(x)
    ry = sps.rankdata(y)
    rho = _pearson(rx, ry)
    n = x.size
    if n <= EXACT_MAX_N:
        p = _exact_p(rx, ry, rho)
    elif abs(rho) >= 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(2.0 * sps.t.sf(abs(t), n - 2))
    return CorrelationResult(rho, min(1.0, max(0.0, p)), n)


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    rho: np.ndarray
    p_value: np.ndarray

    def to_dict(self):
        return {
            "variables": list(self.names),
            "rho": _nan_to_none(self.rho.tolist()),
            "p_value": _nan_to_none(self.p_value.tolist()),
        }


def correlation_matrix(columns: Mapping[str, Sequence[float]]) -> CorrelationMatrix:
    """Pairwise Spearman correlations. Undefined pairs (constant input) are NaN."""
    names = tuple(columns)
    k = len(names)
    rho = np.full((k, k), np.nan)
    p = np.full((k, k), np.nan)
    for i, j in itertools.combinations_with_replacement(range(k), 2):
        try:
            res = spearman(columns[names[i]], columns[names[j]])
        except ConstantInput:
            continue
        rho[i, j] = rho[j, i] = 1.0 if i == j else res.rho
        p[i, j] = p[j, i] = 0.0 if i == j else res.p_value
    return CorrelationMatrix(names, rho, p)


# ---------------------------------------------------------------------------
# OLS


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    condition_number: float
    n: int
    fitted: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def to_dict(self):
        return {
            "n": self.n,
            "r_squared": self.r_squared,
            "condition_number": self.condition_number,
            "coefficients": [
                {
                    "name": name,
                    "coefficient": float(c),
                    "std_error": _finite_or_none(s),
                    "t": _finite_or_none(t),
                    "p_value": _finite_or_none(p),
                }
                for name, c, s, t, p in zip(
                    self.names, self.coefficients, self.std_errors, self.t_values, self.p_values
                )
            ],
        }


def design_matrix(columns: Mapping[str, Sequence[float]]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Stack predictor columns behind a leading intercept column named 'const'."""
    names = ("const",) + tuple(columns)
    cols = [np.asarray(columns[c], dtype=float) for c in columns]
    n = len(cols[0]) if cols else 0
    X = np.column_stack([np.ones(n)] + cols)
    return X, names


def condition_number(X: np.ndarray, standardize: bool = False) -> float:
    """Ratio of extreme singular values; ``standardize`` scales columns to unit length first."""
    X = np.asarray(X, dtype=float)
    if standardize:
        norms = np.linalg.norm(X, axis=0)
        norms[norms == 0] = 1.0
        X = X / norms
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] == 0:
        return math.inf
    return float(s[0] / s[-1])


def ols_fit(
    y: Sequence[float],
    X: np.ndarray,
    names: Sequence[str] | None = None,
    standardize_condition: bool = False,
) -> RegressionResult:
    """Least squares via QR of the design matrix.

    ``X`` must already contain the intercept column (see :func:`design_matrix`).
    R^2 is 1 - SSR/SST, reported as 0 when ``y`` is constant.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"design {X.shape} does not match outcome {y.shape}")
    n, p = X.shape
    if n <= p:
        raise TooFewObservations(f"{n} observations for {p} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("regression input contains non-finite values")
    if names is None:
        names = tuple(f"x{i}" for i in range(p))
    names = tuple(names)

    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] <= s[0] * max(n, p) * np.finfo(float).eps:
        raise RankDeficient(f"design matrix is rank deficient (sigma_min={s[-1]:.3g})")

    Q, R = np.linalg.qr(X)
    beta = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ beta
    resid = y - fitted
    ssr = float(resid @ resid)
    centered = y - y.mean()
    sst = float(centered @ centered)
    r2 = 0.0 if sst == 0 else min(1.0, max(0.0, 1.0 - ssr / sst))

    dof = n - p
    sigma2 = ssr / dof
    r_inv = linalg.solve_triangular(R, np.eye(p))
    se = np.sqrt(sigma2 * np.sum(r_inv * r_inv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.nan)
    pvals = 2.0 * sps.t.sf(np.abs(t), dof)

    cond = condition_number(X, standardize_condition)
    return RegressionResult(names, beta, se, t, pvals, r2, cond, n, fitted, resid)


# ---------------------------------------------------------------------------
# VIF


def _aux_r_squared(target, others):
    design = np.column_stack([np.ones(len(target)), others])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    centered = target - target.mean()
    return 1.0 - float(resid @ resid) / float(centered @ centered)


def vif(X: np.ndarray, j: int) -> float:
    """Variance inflation factor of column ``j`` regressed on the others.

    ``X`` holds predictors only (no intercept; one is added internally).
    Perfect collinearity returns ``math.inf`` rather than failing.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise TooFewObservations("vif needs at least two predictor columns")
    if X.shape[0] < 3:
        raise TooFewObservations("vif needs at least three observations")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("vif input contains non-finite values")
    target = X[:, j]
    if np.ptp(target) == 0:
        raise ConstantInput(f"predictor {j} is constant")
    r2 = _aux_r_squared(target, np.delete(X, j, axis=1))
    if r2 >= 1.0 - PERFECT_COLLINEARITY_TOL:
        return math.inf
    return max(1.0, 1.0 / (1.0 - r2))


def vif_table(columns: Mapping[str, Sequence[float]]) -> dict[str, float | None]:
    """VIF per named predictor; constant predictors get ``None``."""
    names = list(columns)
    X = np.column_stack([np.asarray(columns[c], dtype=float) for c in names])
    out = {}
    for j, name in enumerate(names):
        try:
            out[name] = vif(X, j)
        except ConstantInput:
            out[name] = None
    return out


# ---------------------------------------------------------------------------
# sensitivity


def rank_correlation(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    """Spearman correlation of two tie-free rankings over the same keys."""
    if set(a) != set(b):
        raise LengthMismatch("rankings cover different regions")
    n = len(a)
    if n < 2:
        return 1.0
    d2 = sum((a[k] - b[k]) ** 2 for k in a)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def _top(ranks, k):
    return {key for key, r in ranks.items() if r <= k}


@dataclass(frozen=True)
class VariantResult:
    label: str
    weights: WeightVector
    ranking: tuple[str, ...]
    rank_correlation: float
    top_k_overlap: int

    def to_dict(self):
        return {
            "label": self.label,
            "weights": dict(zip(("alpha", "beta", "gamma", "delta"), self.weights.as_tuple())),
            "ranking": list(self.ranking),
            "rank_correlation": self.rank_correlation,
            "top_k_overlap": self.top_k_overlap,
        }


@dataclass(frozen=True)
class SensitivityReport:
    baseline: WeightVector
    baseline_ranking: tuple[str, ...]
    k: int
    variants: tuple[VariantResult, ...]
    log_case_variant: VariantResult | None = None

    @property
    def stable(self) -> bool:
        """True when every weight variant reproduces the baseline ranking."""
        return all(v.ranking == self.baseline_ranking for v in self.variants)

    def to_dict(self):
        out = {
            "baseline": dict(zip(("alpha", "beta", "gamma", "delta"), self.baseline.as_tuple())),
            "baseline_ranking": list(self.baseline_ranking),
            "k": self.k,
            "variants": [v.to_dict() for v in self.variants],
            "rankings_stable": self.stable,
        }
        if self.log_case_variant is not None:
            out["log_case_variant"] = self.log_case_variant.to_dict()
        return out


def beta_variants(baseline: WeightVector = DEFAULT_WEIGHTS, values=(0.3, 0.4, 0.5)):
    """Poverty-weight variants with the other weights rescaled to keep sum 1."""
    return [baseline.vary("beta", v) for v in values]


def _ordering(ranks):
    return tuple(sorted(ranks, key=ranks.get))


def _compare(label, weights, ranks, base_ranks, k):
    return VariantResult(
        label,
        weights,
        _ordering(ranks),
        rank_correlation(base_ranks, ranks),
        len(_top(ranks, k) & _top(base_ranks, k)),
    )


def sensitivity_analysis(
    factors: FactorTable,
    baseline: WeightVector = DEFAULT_WEIGHTS,
    variants: Sequence[WeightVector] | None = None,
    k: int = 10,
    include_log_case: bool = False,
) -> SensitivityReport:
    """Re-rank regions under each weight variant and compare to the baseline.

    ``k`` is capped at the number of regions for the top-k overlap.
    """
    if variants is None:
        variants = beta_variants(baseline)
    variants = [v if isinstance(v, WeightVector) else WeightVector.from_sequence(v) for v in variants]
    k = min(k, len(factors))
    base = composite_score(factors, baseline)
    base_ranks = rank_regions({key: r.score for key, r in base.items()})
    results = []
    for w in variants:
        scored = composite_score(factors, w)
        ranks = rank_regions({key: r.score for key, r in scored.items()})
        results.append(_compare(f"beta={w.beta:g}", w, ranks, base_ranks, k))

    log_variant = None
    if include_log_case:
        log_norm = log_case_outcome(factors)
        scores = {
            key: base[key].structural * log_norm[key] for key in base
        }
        log_variant = _compare("log_case", baseline, rank_regions(scores), base_ranks, k)
    return SensitivityReport(baseline, _ordering(base_ranks), k, tuple(results), log_variant)


# ---------------------------------------------------------------------------
# regression models on the factor table


def log_case_outcome(factors: FactorTable) -> dict[str, float]:
    """min-max normalized ln(1 + cases per 100k)."""
    rates = factors.column("cases_per_100k")
    for key, rate in rates.items():
        if rate < 0:
            raise ValueError(f"negative case rate for {key!r}")
    return min_max_normalize({k: math.log1p(v) for k, v in rates.items()})


def _factor_regression(factors: FactorTable, outcome: Mapping[str, float], **kw):
    keys = factors.keys
    X, names = design_matrix({c: [getattr(factors.rows[k], c) for k in keys]
                              for c in FACTOR_COLUMNS})
    y = [outcome[k] for k in keys]
    return ols_fit(y, X, names, **kw)


def case_model(factors: FactorTable, **kw) -> RegressionResult:
    """Normalized case rate regressed on the four factors."""
    return _factor_regression(factors, factors.column("cases_norm"), **kw)


def log_case_model(factors: FactorTable, **kw) -> RegressionResult:
    """Normalized log case rate regressed on the four factors."""
    return _factor_regression(factors, log_case_outcome(factors), **kw)


# ---------------------------------------------------------------------------
# JSON helpers


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _nan_to_none(rows):
    return [[None if (v is None or (isinstance(v, float) and math.isnan(v))) else v for v in row]
            for row in rows]
