import math

import numpy as np
import pytest

from rxgeo._special import t_ppf
from rxgeo.stats import mean_ci, one_way_anova, pct_change, t_test_greater


# --- mean_ci -------------------------------------------------------------------

def test_mean_ci_constant_collapses():
    ci = mean_ci([5.0, 5.0, 5.0, 5.0])
    assert ci.mean == ci.lo == ci.hi == 5.0
    assert ci.n == 4


def test_mean_ci_linearity():
    values = [3.0, 7.0, 11.0, 2.0, 6.0]
    a = mean_ci(values)
    b = mean_ci([2 * v for v in values])
    assert b.mean == pytest.approx(2 * a.mean, abs=1e-12)
    assert b.lo == pytest.approx(2 * a.lo, abs=1e-12)
    assert b.hi == pytest.approx(2 * a.hi, abs=1e-12)


def test_mean_ci_matches_t_formula():
    rng = np.random.default_rng(20)
    x = rng.normal(10, 2, 17)
    ci = mean_ci(x, level=0.95)
    half = t_ppf(0.975, 16) * np.std(x, ddof=1) / math.sqrt(17)
    assert ci.lo == pytest.approx(float(np.mean(x) - half), abs=1e-12)
    assert ci.hi == pytest.approx(float(np.mean(x) + half), abs=1e-12)


def test_mean_ci_levels_and_widths():
    rng = np.random.default_rng(21)
    x = rng.normal(0, 1, 40)
    wide = mean_ci(x, level=0.95)
    narrow = mean_ci(x, level=0.90)
    assert (wide.hi - wide.lo) > (narrow.hi - narrow.lo)
    # width shrinks as n grows at fixed sample sd
    small = mean_ci([0.0, 1.0, 2.0, 3.0])
    big = mean_ci([0.0, 1.0, 2.0, 3.0] * 8)
    assert (big.hi - big.lo) < (small.hi - small.lo)


def test_mean_ci_coverage_monte_carlo():
    # 1000 seeded replications of n = 10000 draws from Normal(50, 9.29)
    rng = np.random.default_rng(22)
    n, reps = 10_000, 1000
    draws = rng.normal(50.0, 9.29, size=(reps, n))
    means = draws.mean(axis=1)
    sds = draws.std(axis=1, ddof=1)
    half = t_ppf(0.975, n - 1) * sds / math.sqrt(n)
    covered = np.mean((means - half <= 50.0) & (50.0 <= means + half))
    assert 0.93 <= covered <= 0.97
    # spot-check that the vectorized replication matches mean_ci
    ci = mean_ci(draws[0])
    assert ci.lo == pytest.approx(float(means[0] - half[0]), abs=1e-9)


def test_mean_ci_rejects_small_or_bad_input():
    with pytest.raises(ValueError):
        mean_ci([1.0])
    with pytest.raises(ValueError):
        mean_ci([1.0, float("nan")])
    with pytest.raises(ValueError):
        mean_ci([1.0, 2.0], level=1.5)


# --- one_way_anova ----------------------------------------------------------------

def test_anova_identical_groups_f_zero():
    res = one_way_anova([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    assert res.statistic == pytest.approx(0.0, abs=1e-12)


def test_anova_hand_computed_case():
    # {1,2,3} vs {4,5,6}: SSB = 13.5, SSW = 4, df (1,4), F = 13.5
    res = one_way_anova([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert res.statistic == pytest.approx(13.5, abs=1e-9)
    assert res.df == (1.0, 4.0)


def test_anova_constant_everything():
    res = one_way_anova([[2.0, 2.0], [2.0, 2.0, 2.0]])
    assert res.statistic == 0.0
    assert res.p_value == 1.0


def test_anova_two_groups_equals_t_squared():
    rng = np.random.default_rng(23)
    for _ in range(20):
        a = rng.normal(0, 1, int(rng.integers(5, 30)))
        b = rng.normal(0.5, 1, int(rng.integers(5, 30)))
        res = one_way_anova([a, b])
        # pooled two-sample t statistic
        na, nb = a.size, b.size
        sp2 = ((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / (na + nb - 2)
        t = (np.mean(a) - np.mean(b)) / math.sqrt(sp2 * (1 / na + 1 / nb))
        assert res.statistic == pytest.approx(t * t, rel=1e-9, abs=1e-9)


def test_anova_p_decreases_with_separation():
    rng = np.random.default_rng(24)
    base = rng.normal(0, 1, 30)
    p_values = []
    for shift in (0.1, 0.5, 1.0, 2.0):
        res = one_way_anova([base, base + shift])
        p_values.append(res.p_value)
    assert all(b < a for a, b in zip(p_values, p_values[1:]))
    assert all(p >= 0 for p in p_values)


def test_anova_group_size_validation():
    with pytest.raises(ValueError):
        one_way_anova([[1.0, 2.0]])
    with pytest.raises(ValueError):
        one_way_anova([[1.0, 2.0], [3.0]])


# --- t_test_greater -----------------------------------------------------------------

def test_t_test_mean_equals_mu0():
    res = t_test_greater([4.0, 5.0, 6.0], 5.0)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.p_value == pytest.approx(0.5, abs=1e-12)


def test_t_test_zero_sd_conventions():
    assert t_test_greater([5.0, 5.0, 5.0], 5.0).p_value == 0.5
    assert t_test_greater([5.0, 5.0, 5.0], 4.0).p_value == 0.0
    assert t_test_greater([5.0, 5.0, 5.0], 6.0).p_value == 1.0


def test_t_test_negation_symmetry():
    rng = np.random.default_rng(25)
    x = rng.normal(3, 2, 25)
    p1 = t_test_greater(x, 2.0).p_value
    p2 = t_test_greater(-x, -2.0).p_value
    assert p1 + p2 == pytest.approx(1.0, abs=1e-10)


def test_t_test_detects_true_shift():
    rng = np.random.default_rng(26)
    x = rng.normal(96.5, 12.0, 90)
    assert t_test_greater(x, 90.0).p_value < 0.05
    assert t_test_greater(x, 110.0).p_value > 0.5


# --- pct_change ---------------------------------------------------------------------

def test_pct_change_headline_arithmetic():
    assert pct_change(53.68, 51.09) == pytest.approx(4.82, abs=0.01)


def test_pct_change_trivials():
    assert pct_change(7.0, 7.0) == 0.0
    assert pct_change(100.0, 50.0) == 50.0
    with pytest.raises(ValueError):
        pct_change(0.0, 1.0)
