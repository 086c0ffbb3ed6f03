"""Interrupted-time-series analysis with ARIMAX event inputs.

The procedure per series: fit an automatic ARIMA to the pre-policy window,
forecast the post window and record where actuals leave the prediction
band, then fit the full series jointly with level-shift / ramp / inverse-
trend event regressors and keep the events that stay significant under
backward elimination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import arima
from .arima import (ArimaFit, ArimaOrders, ArimaParams, FitError, Forecast,
                    _ar_ma_lag_coefs, _css_value, _fd_hessian, _pack, _unpack,
                    difference)
from ._optimize import nelder_mead
from .series import ClassSeries, MonthKey, split_pre_post

EVENT_KINDS = ("level_shift", "ramp", "inverse_trend")

MIN_PRE_MONTHS = 36
MIN_POST_MONTHS = 12


class CollinearityError(ValueError):
    """Event regressors are degenerate or (pairwise) collinear."""


@dataclass(frozen=True)
class EventInput:
    """An intervention regressor shape anchored at an onset month."""

    kind: str
    onset: MonthKey | int
    name: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}; "
                             f"expected one of {EVENT_KINDS}")

    @property
    def label(self) -> str:
        return self.name if self.name else self.kind

    def onset_index(self, start_month: MonthKey) -> int:
        if isinstance(self.onset, MonthKey):
            return self.onset.index - start_month.index
        return int(self.onset)


def event_regressor(kind: str, onset: int, n: int) -> np.ndarray:
    """
    Deterministic event-input series of length ``n``.

    level_shift: 0 before onset, 1 from onset on.
    ramp:        0 before onset, then t - onset.
    inverse_trend: 0 before onset, then 1 / (t - onset + 1).
    """
    if not 0 <= onset < n:
        raise ValueError(f"onset {onset} outside series range [0, {n})")
    t = np.arange(n, dtype=float)
    active = t >= onset
    if kind == "level_shift":
        return active.astype(float)
    if kind == "ramp":
        return np.where(active, t - onset, 0.0)
    if kind == "inverse_trend":
        out = np.zeros(n)
        out[active] = 1.0 / (t[active] - onset + 1.0)
        return out
    raise ValueError(f"unknown event kind {kind!r}")


def significance_stars(p: float) -> str:
    """Table-style significance stars for a p-value."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class ItsCoefficient:
    name: str
    estimate: float
    std_error: float
    p_value: float

    @property
    def stars(self) -> str:
        if math.isnan(self.p_value):
            return ""
        return significance_stars(self.p_value)


@dataclass
class ArimaxFit:
    """Regression-with-ARIMA-errors fit: events first, ARMA terms after."""

    orders: ArimaOrders
    params: ArimaParams
    betas: np.ndarray
    event_names: list[str]
    std_errors: np.ndarray  # aligned with [c, betas..., phi.., theta.., Phi.., Theta..]
    log_css: float
    bic: float
    residuals: np.ndarray
    n_effective: int

    def coefficients(self) -> list[ItsCoefficient]:
        names = (["const"] + list(self.event_names)
                 + [f"ar{i}" for i in range(1, self.orders.p + 1)]
                 + [f"ma{j}" for j in range(1, self.orders.q + 1)]
                 + [f"sar{self.orders.s * i}" for i in range(1, self.orders.P + 1)]
                 + [f"sma{self.orders.s * j}" for j in range(1, self.orders.Q + 1)])
        values = np.concatenate(([self.params.c], self.betas, self.params.phi,
                                 self.params.theta, self.params.Phi, self.params.Theta))
        out = []
        for name, est, se in zip(names, values, self.std_errors):
            out.append(ItsCoefficient(name, float(est), float(se),
                                      arima._coef_p_value(float(est), float(se))))
        return out

    def event_coefficients(self) -> list[ItsCoefficient]:
        return [c for c in self.coefficients() if c.name in self.event_names]

    @property
    def css(self) -> float:
        return math.exp(self.log_css) if math.isfinite(self.log_css) else 0.0


def _check_collinearity(x: np.ndarray, names: Sequence[str]) -> None:
    for j, name in enumerate(names):
        col = x[:, j]
        if float(np.ptp(col)) == 0.0:
            raise CollinearityError(f"event regressor {name!r} has zero variance "
                                    "after differencing")
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = x[:, i], x[:, j]
            da, db = a - a.mean(), b - b.mean()
            denom = math.sqrt(float(da @ da) * float(db @ db))
            if denom == 0.0:
                continue
            corr = abs(float(da @ db)) / denom
            if corr > 0.9999:
                raise CollinearityError(
                    f"event regressors {names[i]!r} and {names[j]!r} are collinear")


def fit_arimax(
    y: Sequence[float] | np.ndarray,
    orders: ArimaOrders,
    events: Sequence[EventInput],
    start_month: MonthKey = MonthKey(2014, 1),
    max_evals: int = 2000,
    base_fit: ArimaFit | None = None,
) -> ArimaxFit:
    """
    Joint CSS estimation of event-regression and ARMA coefficients.

    Event regressors are built in level space and then differenced exactly
    like the series, so the regression lives in one stationary frame.  The
    optimizer starts from the better of an OLS+Hannan-Rissanen point and
    the no-event base fit with zero betas, which makes the optimized CSS
    never exceed the base model's (nested-model property).
    """
    y = np.asarray(y, dtype=float)
    y, n_interp = arima.fill_missing(y)
    n = y.size
    names = [e.label for e in events]
    if len(set(names)) != len(names):
        raise CollinearityError(f"duplicate event names: {names}")
    x_level = np.column_stack([
        event_regressor(e.kind, e.onset_index(start_month), n) for e in events
    ]) if events else np.zeros((n, 0))

    z = difference(y, orders.d, orders.D, orders.s)
    if events:
        x = np.column_stack([
            difference(x_level[:, j], orders.d, orders.D, orders.s)
            for j in range(x_level.shape[1])
        ])
        _check_collinearity(x, names)
    else:
        x = np.zeros((z.size, 0))

    m_events = x.shape[1]
    o = orders

    def split_vec(vec: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        return float(vec[0]), vec[1:1 + m_events], vec[1 + m_events:]

    def objective(vec: np.ndarray) -> float:
        c, betas, u = split_vec(vec)
        p = _unpack(np.r_[c, u], o)
        a, m = _ar_ma_lag_coefs(o, p)
        return _css_value(z - x @ betas, o, c, a, m)

    # Start 1: OLS for betas, Hannan-Rissanen on the OLS residuals.
    design = np.column_stack([np.ones(z.size), x])
    beta_full = np.linalg.lstsq(design, z, rcond=None)[0]
    ols_resid = z - design @ beta_full
    hr = arima.hannan_rissanen_start(ols_resid + float(beta_full[0]), o)
    start1 = np.r_[hr.c, beta_full[1:], _pack(hr)[1:]]

    candidates = [start1]
    # Start 2: the nested no-event optimum with zero betas.
    if base_fit is None:
        try:
            base_fit = arima.fit(y, orders, max_evals=max_evals)
        except (FitError, ValueError):
            base_fit = None
    if base_fit is not None:
        candidates.append(np.r_[base_fit.params.c, np.zeros(m_events),
                                _pack(base_fit.params)[1:]])

    scored = sorted(candidates, key=objective)
    result = nelder_mead(objective, scored[0], max_evals=max_evals, rel_tol=1e-10)
    best_x, best_f = result.x, result.fun
    for cand in scored:
        f_cand = objective(cand)
        if f_cand < best_f:
            best_x, best_f = cand, f_cand

    c, betas, u = split_vec(best_x)
    params = _unpack(np.r_[c, u], o)
    a, m = _ar_ma_lag_coefs(o, params)
    w = z - x @ betas
    css = _css_value(w, o, c, a, m)
    n_eff = z.size
    sigma2 = css / n_eff
    params.sigma2 = sigma2
    ar_at_one = 1.0 - a.sum()
    mu = c / ar_at_one if ar_at_one != 0.0 else 0.0
    residuals = arima._residuals_from_lags(w - mu, a, m)

    k = 1 + m_events + o.p + o.q + o.P + o.Q
    bic = n_eff * math.log(sigma2) + k * math.log(n_eff) if sigma2 > 0 else -math.inf

    vec0 = np.concatenate(([c], betas, params.phi, params.theta,
                           params.Phi, params.Theta))

    def raw_objective(vec: np.ndarray) -> float:
        cc = float(vec[0])
        bb = vec[1:1 + m_events]
        i = 1 + m_events
        p = ArimaParams(c=cc, phi=vec[i:i + o.p],
                        theta=vec[i + o.p:i + o.p + o.q],
                        Phi=vec[i + o.p + o.q:i + o.p + o.q + o.P],
                        Theta=vec[i + o.p + o.q + o.P:])
        aa, mm = _ar_ma_lag_coefs(o, p)
        return _css_value(z - x @ bb, o, cc, aa, mm)

    if sigma2 > 0:
        hess = _fd_hessian(raw_objective, vec0)
        if np.all(np.isfinite(hess)):
            cov = 2.0 * sigma2 * np.linalg.pinv(hess)
            diag = np.diag(cov).copy()
            diag[diag < 0] = np.nan
            std_errors = np.sqrt(diag)
        else:
            std_errors = np.full(vec0.size, np.nan)
    else:
        std_errors = np.zeros(vec0.size)

    return ArimaxFit(orders=o, params=params, betas=np.asarray(betas, dtype=float),
                     event_names=list(names), std_errors=std_errors,
                     log_css=math.log(css) if css > 0 else -math.inf, bic=bic,
                     residuals=residuals, n_effective=n_eff)


class MismatchPoint(NamedTuple):
    month: MonthKey
    delta: float  # actual - predicted; NaN when the month had no records
    outside_interval: bool


@dataclass
class ItsResult:
    drug_family: str
    class_code: str
    policy_month: MonthKey
    pre_fit: ArimaFit
    post_forecast: Forecast
    arimax: ArimaxFit
    mismatch: list[MismatchPoint]
    dropped_events: list[str] = field(default_factory=list)

    def significant_events(self, alpha: float = 0.05) -> list[ItsCoefficient]:
        return [c for c in self.arimax.event_coefficients()
                if not math.isnan(c.p_value) and c.p_value < alpha]


def its_analysis(
    series: ClassSeries,
    policy_month: MonthKey | None = None,
    event_kinds: Sequence[str] = EVENT_KINDS,
    alpha: float = 0.05,
    announce_month: MonthKey | None = None,
    s: int = 12,
    auto_kwargs: dict | None = None,
) -> ItsResult:
    """
    Three-step interrupted-time-series analysis of one monthly series.

    1. Automatic ARIMA on the pre-policy window only.
    2. Forecast across the post window; record actual-minus-predicted and
       whether each month escapes the prediction interval.
    3. ARIMAX on the full series with the event inputs at the policy onset
       (plus, optionally, a second onset at ``announce_month``), dropping
       weak events one at a time (largest p first) and refitting.  The
       retention threshold is Bonferroni-corrected, ``alpha / #events
       initially included``, so the chance of keeping any spurious event on
       a null series stays near ``alpha`` overall; with a single event it
       reduces to plain ``alpha``.
    """
    if policy_month is None:
        policy_month = series.policy_month
    pre, post = split_pre_post(series, policy_month)
    if len(pre) < MIN_PRE_MONTHS:
        raise ValueError(f"need >= {MIN_PRE_MONTHS} pre-policy months, got {len(pre)}")
    if len(post) < MIN_POST_MONTHS:
        raise ValueError(f"need >= {MIN_POST_MONTHS} post-policy months, got {len(post)}")

    kwargs = auto_kwargs or {}
    pre_fit = arima.auto_fit(pre.values(), s=s, **kwargs)
    h = len(post)
    fc = arima.forecast(pre_fit, h)

    post_vals = post.values()
    mismatch = []
    for i, point in enumerate(post.points):
        actual = post_vals[i]
        if math.isnan(actual):
            mismatch.append(MismatchPoint(point.month, math.nan, False))
        else:
            outside = not (fc.lower[i] <= actual <= fc.upper[i])
            mismatch.append(MismatchPoint(point.month, actual - fc.point[i], outside))

    start_month = series.points[0].month
    events = [EventInput(kind, policy_month) for kind in event_kinds]
    if announce_month is not None:
        events += [EventInput(kind, announce_month, name=f"{kind}@announce")
                   for kind in event_kinds]

    y_full = series.values()
    orders = pre_fit.orders
    dropped: list[str] = []
    current = list(events)
    keep_level = alpha / max(len(events), 1)
    arimax_fit = fit_arimax(y_full, orders, current, start_month=start_month)
    while current:
        evs = arimax_fit.event_coefficients()
        weakest = max(evs, key=lambda cf: (cf.p_value if not math.isnan(cf.p_value)
                                           else 2.0))
        p_weakest = weakest.p_value if not math.isnan(weakest.p_value) else 2.0
        if p_weakest < keep_level:
            break
        dropped.append(weakest.name)
        current = [e for e in current if e.label != weakest.name]
        arimax_fit = fit_arimax(y_full, orders, current, start_month=start_month)

    return ItsResult(drug_family=series.drug_family, class_code=series.class_code,
                     policy_month=policy_month, pre_fit=pre_fit, post_forecast=fc,
                     arimax=arimax_fit, mismatch=mismatch, dropped_events=dropped)


@dataclass
class ItsBatchResult:
    results: list[ItsResult]
    failures: dict[str, str]  # "family/class" -> error message


def _series_sort_key(s: ClassSeries) -> tuple:
    return (s.drug_family, s.class_code != "overall", s.class_code)


def its_batch(
    all_series: Sequence[ClassSeries],
    policy_month: MonthKey | None = None,
    event_kinds: Sequence[str] = EVENT_KINDS,
    alpha: float = 0.05,
    announce_month: MonthKey | None = None,
    threads: int = 1,
    auto_kwargs: dict | None = None,
) -> ItsBatchResult:
    """
    Run :func:`its_analysis` over many series; per-series failures are
    recorded and the batch continues.  Output order is deterministic:
    by family, overall series first, then class codes ascending.
    """
    ordered = sorted(all_series, key=_series_sort_key)

    def run(s: ClassSeries):
        return its_analysis(s, policy_month=policy_month, event_kinds=event_kinds,
                            alpha=alpha, announce_month=announce_month,
                            auto_kwargs=auto_kwargs)

    results: list[ItsResult] = []
    failures: dict[str, str] = {}
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(s, pool.submit(run, s)) for s in ordered]
        for s, fut in futures:
            try:
                results.append(fut.result())
            except Exception as exc:  # noqa: BLE001 - failures are data
                failures[f"{s.drug_family}/{s.class_code}"] = str(exc)
    else:
        for s in ordered:
            try:
                results.append(run(s))
            except Exception as exc:  # noqa: BLE001 - failures are data
                failures[f"{s.drug_family}/{s.class_code}"] = str(exc)
    return ItsBatchResult(results=results, failures=failures)
