import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rxgeo import arima
from rxgeo.arima import ArimaOrders, ArimaParams
from rxgeo.intervention import (CollinearityError, EventInput, event_regressor,
                                fit_arimax, its_analysis, its_batch,
                                significance_stars)
from rxgeo.series import ClassSeries, MonthKey, SeriesPoint


def make_series(values, family="opioid", code="overall",
                start=MonthKey(2014, 1), policy=MonthKey(2018, 5),
                counts=None):
    pts = []
    for i, v in enumerate(values):
        n = 100 if counts is None else counts[i]
        pts.append(SeriesPoint(MonthKey.from_index(start.index + i), float(v), n))
    return ClassSeries(family, code, pts, policy)


# --- event_regressor -----------------------------------------------------------

def test_event_regressor_shapes():
    assert np.array_equal(event_regressor("level_shift", 3, 6), [0, 0, 0, 1, 1, 1])
    assert np.array_equal(event_regressor("ramp", 3, 6), [0, 0, 0, 0, 1, 2])
    assert np.allclose(event_regressor("inverse_trend", 3, 6),
                       [0, 0, 0, 1, 0.5, 1 / 3])


def test_event_regressor_onset_bounds():
    with pytest.raises(ValueError):
        event_regressor("level_shift", 6, 6)
    with pytest.raises(ValueError):
        event_regressor("ramp", -1, 6)
    with pytest.raises(ValueError):
        event_regressor("sawtooth", 2, 6)


def test_event_regressor_deterministic():
    a = event_regressor("inverse_trend", 10, 50)
    b = event_regressor("inverse_trend", 10, 50)
    assert np.array_equal(a, b)


def test_event_input_onset_resolution():
    e = EventInput("level_shift", MonthKey(2018, 5))
    assert e.onset_index(MonthKey(2014, 1)) == 52
    assert EventInput("ramp", 7).onset_index(MonthKey(2014, 1)) == 7
    with pytest.raises(ValueError):
        EventInput("spike", 3)


# --- significance stars ----------------------------------------------------------

@pytest.mark.parametrize("p,stars", [
    (0.0005, "***"), (0.004, "**"), (0.04, "*"), (0.05, ""), (0.2, ""),
    (0.0009999, "***"), (0.001, "**"), (0.01, "*"),
])
def test_significance_stars_thresholds(p, stars):
    assert significance_stars(p) == stars


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
def test_significance_stars_consistent(p):
    s = significance_stars(p)
    assert s in ("", "*", "**", "***")
    assert (p < 0.05) == (len(s) >= 1)
    assert (p < 0.01) == (len(s) >= 2)
    assert (p < 0.001) == (len(s) == 3)


def test_significance_stars_domain():
    with pytest.raises(ValueError):
        significance_stars(1.5)


# --- fit_arimax -------------------------------------------------------------------

def test_arimax_recovers_level_shift():
    rng = np.random.default_rng(70)
    y = rng.normal(size=200)
    y[100:] += 5.0
    fx = fit_arimax(y, ArimaOrders(), [EventInput("level_shift", 100)])
    coef = fx.event_coefficients()[0]
    assert 4.0 <= coef.estimate <= 6.0
    assert coef.p_value < 0.001
    assert coef.stars == "***"


def test_arimax_null_effect_mostly_insignificant():
    hits = 0
    for seed in range(100):
        y = arima.simulate(ArimaOrders(p=1),
                           ArimaParams(c=0.0, phi=[0.5], sigma2=1.0),
                           200, seed=1200 + seed)
        fx = fit_arimax(y, ArimaOrders(p=1), [EventInput("level_shift", 100)])
        coef = fx.event_coefficients()[0]
        hits += (abs(coef.estimate) < 2 * coef.std_error)
    assert hits >= 90


def test_arimax_zero_variance_regressor_rejected():
    rng = np.random.default_rng(71)
    y = rng.normal(size=50)
    with pytest.raises(ValueError):
        # onset at n is outside the admissible range -> all-zero regressor
        fit_arimax(y, ArimaOrders(), [EventInput("level_shift", 50)])


def test_arimax_collinear_pair_named():
    rng = np.random.default_rng(72)
    y = rng.normal(size=60)
    events = [EventInput("level_shift", 30, name="a"),
              EventInput("level_shift", 30, name="b")]
    with pytest.raises(CollinearityError) as exc:
        fit_arimax(y, ArimaOrders(), events)
    assert "a" in str(exc.value) and "b" in str(exc.value)


def test_arimax_duplicate_names_rejected():
    rng = np.random.default_rng(73)
    y = rng.normal(size=60)
    with pytest.raises(CollinearityError):
        fit_arimax(y, ArimaOrders(), [EventInput("level_shift", 30),
                                      EventInput("level_shift", 40)])


def test_arimax_nested_model_property():
    # adding an event regressor never worsens the optimized CSS
    for seed in range(8):
        y = arima.simulate(ArimaOrders(p=1),
                           ArimaParams(c=2.0, phi=[0.6], sigma2=1.0),
                           150, seed=1300 + seed)
        base = arima.fit(y, ArimaOrders(p=1))
        fx = fit_arimax(y, ArimaOrders(p=1), [EventInput("level_shift", 75)])
        css_base = math.exp(base.log_css)
        assert fx.css <= css_base * (1 + 1e-9)


def test_arimax_differences_event_regressors_with_series():
    # with d=1 a level shift becomes a single pulse; its coefficient still
    # measures the level change in the original scale
    rng = np.random.default_rng(74)
    y = np.cumsum(rng.normal(size=200) * 0.1)
    y[120:] += 8.0
    fx = fit_arimax(y, ArimaOrders(d=1), [EventInput("level_shift", 120)])
    coef = fx.event_coefficients()[0]
    assert 7.0 <= coef.estimate <= 9.0
    assert fx.residuals.size == 199  # one observation lost to differencing


def test_arimax_bic_counts_event_coefficients():
    rng = np.random.default_rng(75)
    y = rng.normal(size=120)
    fx = fit_arimax(y, ArimaOrders(), [EventInput("level_shift", 60)])
    n = fx.n_effective
    k = 2  # constant + event
    expected = n * math.log(fx.params.sigma2) + k * math.log(n)
    assert fx.bic == pytest.approx(expected, rel=1e-12)


# --- its_analysis ------------------------------------------------------------------

def test_its_minimum_window_requirements():
    short_pre = make_series(np.arange(40.0), start=MonthKey(2017, 1))
    with pytest.raises(ValueError):
        its_analysis(short_pre)
    short_post = make_series(np.arange(56.0), start=MonthKey(2014, 1))
    with pytest.raises(ValueError):
        its_analysis(short_post)  # policy 2018-05 leaves only 4 post months


def test_its_no_change_zero_noise():
    s = make_series([50.0] * 95)
    res = its_analysis(s)
    assert res.pre_fit.degenerate
    assert np.allclose(res.post_forecast.point, 50.0)
    assert all(not m.outside_interval for m in res.mismatch)
    assert all(m.delta == 0.0 for m in res.mismatch)
    assert len(res.mismatch) == 43


def test_its_detects_negative_step():
    rng = np.random.default_rng(76)
    vals = 50.0 + rng.normal(0, 0.5, 95)
    vals[52:] -= 3.0
    res = its_analysis(make_series(vals))
    sig = res.significant_events()
    assert any(c.estimate < 0 for c in sig)
    assert sum(m.outside_interval for m in res.mismatch) > len(res.mismatch) / 2
    assert res.policy_month == MonthKey(2018, 5)


def test_its_step1_never_sees_post_data():
    rng = np.random.default_rng(77)
    vals = 50.0 + rng.normal(0, 1.0, 95)
    s1 = make_series(vals.copy())
    corrupted = vals.copy()
    corrupted[52:] = 1e6  # sentinel post-policy values
    s2 = make_series(corrupted)
    r1 = its_analysis(s1)
    r2 = its_analysis(s2)
    assert r1.pre_fit.orders == r2.pre_fit.orders
    assert np.array_equal(r1.pre_fit.params.vector(), r2.pre_fit.params.vector())


def test_its_mismatch_covers_post_months():
    rng = np.random.default_rng(78)
    res = its_analysis(make_series(50 + rng.normal(0, 1, 95)))
    months = [str(m.month) for m in res.mismatch]
    assert months[0] == "2018-05"
    assert months[-1] == "2021-11"
    assert len(months) == 43


# --- its_batch ---------------------------------------------------------------------

def test_its_batch_ordering_and_failures():
    rng = np.random.default_rng(79)
    good = 50 + rng.normal(0, 1, 95)
    series = [
        make_series(good, family="opioid", code="03"),
        make_series(good, family="opioid", code="overall"),
        make_series(np.arange(40.0), family="opioid", code="31",
                    start=MonthKey(2017, 1)),  # too short: recorded failure
        make_series(good, family="benzodiazepine", code="overall"),
    ]
    batch = its_batch(series)
    keys = [(r.drug_family, r.class_code) for r in batch.results]
    assert keys == [("benzodiazepine", "overall"), ("opioid", "overall"),
                    ("opioid", "03")]
    assert list(batch.failures) == ["opioid/31"]


def test_its_batch_34_series_structural():
    # 16 classes x 2 families + one overall per family, constant-valued so
    # each analysis is the fast degenerate path; exactly one result each
    series = []
    for fam in ("opioid", "benzodiazepine"):
        series.append(make_series([50.0] * 95, family=fam, code="overall"))
        for dist in range(4):
            for disp in range(4):
                code = f"{dist}{disp}"
                level = 40.0 + dist * 4 + disp
                series.append(make_series([level] * 95, family=fam, code=code))
    assert len(series) == 34
    batch = its_batch(series)
    assert not batch.failures
    assert len(batch.results) == 34
    keys = [(r.drug_family, r.class_code) for r in batch.results]
    assert len(set(keys)) == 34
    assert keys == sorted(keys, key=lambda k: (k[0], k[1] != "overall", k[1]))


def test_its_batch_flags_only_true_effect_classes():
    # generator ground truth: classes 03 and 30 carry a -10% effect while
    # 22 and 32 are null; the batch must flag the former and not the latter
    from rxgeo import geo, syngen
    from rxgeo.records import clean
    from rxgeo.series import aggregate_monthly

    base = {
        "03": (15.40, 5.15, 800.95, 302.02, 47.96),
        "30": (7.66, 3.15, 322.93, 230.59, 37.78),
        "22": (18.93, 6.97, 1110.24, 746.99, 91.71),
        "32": (20.06, 7.51, 1374.09, 1153.52, 96.50),
    }
    profiles = [
        syngen.ClassProfile(code, 0.25, *stats,
                            post_policy_multiplier=0.9 if code in ("03", "30")
                            else 1.0)
        for code, stats in base.items()
    ]
    cfg = syngen.ScenarioConfig(trend_slope=0.0, seasonal_amplitude=0.0,
                                noise_sd=0.005)
    cfg.families = {"opioid": syngen.FamilySettings(1.0, 1.0, profiles)}

    hits = 0
    n_seeds = 5
    for seed in range(n_seeds):
        records, _ = clean(syngen.generate(cfg, 40_000, seed=2000 + seed))
        classified = geo.classify_records(records)
        series = aggregate_monthly(classified, group_by="class")
        batch = its_batch(series)
        assert not batch.failures
        flagged = {r.class_code for r in batch.results if r.significant_events()}
        hits += ({"03", "30"} <= flagged) and not ({"22", "32"} & flagged)
    assert hits >= 4  # >= 80% of seeds


def test_its_batch_threads_match_serial():
    rng = np.random.default_rng(80)
    series = [make_series(50 + rng.normal(0, 1, 95), code=c)
              for c in ("overall", "00", "01")]
    serial = its_batch(series, threads=1)
    threaded = its_batch(series, threads=3)
    assert [(r.class_code, r.arimax.bic) for r in serial.results] == \
           [(r.class_code, r.arimax.bic) for r in threaded.results]
