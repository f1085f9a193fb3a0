import csv
import logging
from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from statevuln import indicators as ind
from statevuln.errors import (
    NonFiniteInput,
    NonPositiveDensity,
    OutOfRangeShare,
    TooFewRegions,
    ZeroPopulation,
)
from statevuln.ingest import RegionRecord


def frac_minmax(values):
    """Exact rational min-max used as an oracle."""
    fr = {k: Fraction(v) for k, v in values.items()}
    lo, hi = min(fr.values()), max(fr.values())
    if hi == lo:
        return {k: Fraction(0) for k in fr}
    return {k: (v - lo) / (hi - lo) for k, v in fr.items()}


def test_min_max_basic():
    assert ind.min_max_normalize({"a": 2, "b": 4, "c": 3}) == {"a": 0.0, "b": 1.0, "c": 0.5}


def test_min_max_constant_is_zero():
    assert ind.min_max_normalize({"a": 7.0, "b": 7.0}) == {"a": 0.0, "b": 0.0}


def test_min_max_rejects_nan():
    with pytest.raises(NonFiniteInput):
        ind.min_max_normalize({"a": float("nan"), "b": 1.0})


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.dictionaries(st.text(min_size=1, max_size=3), finite, min_size=1, max_size=20))
def test_min_max_bounds_and_oracle(values):
    out = ind.min_max_normalize(values)
    oracle = frac_minmax(values)
    for k in values:
        assert 0.0 <= out[k] <= 1.0
        assert out[k] == pytest.approx(float(oracle[k]), abs=1e-12)
    if len(set(values.values())) > 1:
        assert min(out.values()) == 0.0 and max(out.values()) == 1.0


@given(st.dictionaries(st.text(min_size=1, max_size=3), finite, min_size=2, max_size=20),
       st.floats(0.01, 100), st.floats(-100, 100))
def test_min_max_affine_invariant(values, scale, shift):
    spread = max(values.values()) - min(values.values())
    # a spread far below the shifted magnitude is lost to rounding
    assume(spread == 0 or spread * scale > 1e-6 * (abs(shift) + scale * max(map(abs, values.values()))))
    moved = {k: v * scale + shift for k, v in values.items()}
    a = ind.min_max_normalize(values)
    b = ind.min_max_normalize(moved)
    for k in values:
        assert a[k] == pytest.approx(b[k], abs=1e-6)


def test_poverty_example():
    out = ind.poverty_factor({"a": -0.8, "b": 0.0, "c": 1.2})
    assert out["a"] == 1.0 and out["c"] == 0.0
    assert out["b"] == pytest.approx(float(1 - Fraction(8, 20)), abs=1e-12)


def test_poverty_constant_scores_one(caplog):
    with caplog.at_level(logging.WARNING, logger="statevuln"):
        assert ind.poverty_factor({"a": 0.3, "b": 0.3}) == {"a": 1.0, "b": 1.0}
    assert "constant" in caplog.text


def test_healthcare_example():
    pop = {"a": 100_000, "b": 100_000, "c": 100_000}
    out = ind.healthcare_factor({"a": 1, "b": 2, "c": 5}, pop)
    assert out == {"a": 1.0, "b": 0.75, "c": 0.0}


def test_healthcare_zero_population():
    with pytest.raises(ZeroPopulation):
        ind.healthcare_factor({"a": 1}, {"a": 0})


def test_healthcare_direction_switch(monkeypatch):
    monkeypatch.setattr(ind, "INVERT_HEALTHCARE_ACCESS", False)
    pop = {"a": 100_000, "b": 100_000, "c": 100_000}
    assert ind.healthcare_factor({"a": 1, "b": 2, "c": 5}, pop)["b"] == 0.25


def test_age_and_density_validation():
    with pytest.raises(OutOfRangeShare):
        ind.age_factor({"a": 1.2})
    with pytest.raises(NonPositiveDensity):
        ind.density_factor({"a": 0.0, "b": 3.0})


def test_cases_per_100k_example():
    assert ind.cases_per_100k(98_366, 14_862_000) == pytest.approx(661.86, abs=0.01)
    assert ind.cases_per_100k(98_366, 14_862_000) == float(Fraction(98_366 * 100_000, 14_862_000))


def test_cases_per_100k_zero_population():
    with pytest.raises(ZeroPopulation):
        ind.cases_per_100k(1, 0)


@pytest.mark.parametrize("n, sizes", [(37, (12, 12, 13)), (3, (1, 1, 1)), (8, (2, 3, 3)), (10, (3, 3, 4))])
def test_split_thirds_sizes(n, sizes):
    classes = ind.split_thirds([f"r{i:03d}" for i in range(n)])
    counts = tuple(list(classes.values()).count(c) for c in ind.TERCILE_CLASSES)
    assert counts == sizes


def test_split_thirds_too_few():
    with pytest.raises(TooFewRegions):
        ind.split_thirds(["a", "b"])


@given(st.integers(3, 100))
def test_split_thirds_partition(n):
    order = [f"r{i}" for i in range(n)]
    classes = ind.split_thirds(order)
    assert set(classes) == set(order)
    assert set(classes.values()) <= set(ind.TERCILE_CLASSES)
    # classes are contiguous in the ascending order
    seq = [ind.TERCILE_CLASSES.index(classes[k]) for k in order]
    assert seq == sorted(seq)


def test_density_terciles_tie_break_by_name():
    out = ind.density_terciles({"b": 1.0, "a": 1.0, "c": 1.0})
    assert out == {"a": "low", "b": "medium", "c": "high"}


def _records():
    return [
        RegionRecord("x", 200_000, 100.0, 2000.0, -0.5, 4, 0.05, 300),
        RegionRecord("y", 100_000, 100.0, 1000.0, 0.0, 1, 0.02, 50),
        RegionRecord("z", 400_000, 50.0, 8000.0, 0.5, 20, 0.08, 100),
    ]


def test_build_factor_table_against_oracle():
    recs = _records()
    table = ind.build_factor_table(recs)
    assert table.keys == ["x", "y", "z"]
    density = frac_minmax({r.key: r.density for r in recs})
    poverty = {k: 1 - v for k, v in frac_minmax({r.key: r.rwi for r in recs}).items()}
    access = {r.key: Fraction(r.facilities) / Fraction(r.population) * 100_000 for r in recs}
    health = {k: 1 - v for k, v in frac_minmax(access).items()}
    age = frac_minmax({r.key: Fraction(r.age60_share) for r in recs})
    rates = {r.key: Fraction(r.total_cases) / Fraction(r.population) * 100_000 for r in recs}
    cnorm = frac_minmax(rates)
    for k in table.keys:
        row = table.rows[k]
        assert row.density_score == pytest.approx(float(density[k]), abs=1e-12)
        assert row.poverty_score == pytest.approx(float(poverty[k]), abs=1e-12)
        assert row.healthcare_score == pytest.approx(float(health[k]), abs=1e-12)
        assert row.age_score == pytest.approx(float(age[k]), abs=1e-12)
        assert row.cases_per_100k == pytest.approx(float(rates[k]), abs=1e-12)
        assert row.cases_norm == pytest.approx(float(cnorm[k]), abs=1e-12)


def test_write_factors_csv(tmp_path):
    path = tmp_path / "factors.csv"
    ind.write_factors_csv(ind.build_factor_table(_records()), path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(ind.DUMP_COLUMNS)
    assert [r[0] for r in rows[1:]] == ["x", "y", "z"]
