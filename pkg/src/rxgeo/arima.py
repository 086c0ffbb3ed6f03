"""Seasonal ARIMA modeling with an automatic order-selection pipeline.

The model for the differenced series y'_t is

    y'_t = c + phi_1 y'_{t-1} + ... + phi_p y'_{t-p}
             + eps_t + theta_1 eps_{t-1} + ... + theta_q eps_{t-q}

with multiplicative seasonal AR/MA factors at lag ``s`` folded in by
polynomial multiplication.  Estimation minimizes the conditional sum of
squared one-step errors (CSS), with pre-sample errors and pre-sample
deviations from the process mean set to zero.  The automatic pipeline
mirrors classic Box-Jenkins practice: unit-root tests pick the differencing
orders, a Hannan-Rissanen / minimum-BIC grid picks tentative ARMA orders,
and an exhaustive search bounded by those tentative orders returns the
minimum-BIC fit.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._optimize import nelder_mead
from ._special import chi2_sf, normal_ppf, normal_sf
from .stats import TestResult

logger = logging.getLogger(__name__)

_PENALTY = 1e300
_PACF_CLIP = 0.999999


# ---------------------------------------------------------------------------
# Orders / parameters / fit containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArimaOrders:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 12

    def __post_init__(self):
        for name in ("p", "d", "q", "P", "D", "Q"):
            if getattr(self, name) < 0:
                raise ValueError(f"order {name} must be nonnegative")
        if self.P > 2 or self.Q > 2:
            raise ValueError("seasonal AR/MA orders are capped at 2")
        if self.d + self.D > 3:
            raise ValueError("total differencing d + D must be at most 3")
        if (self.P or self.D or self.Q) and self.s < 2:
            raise ValueError("seasonal terms require season length s >= 2")

    @property
    def n_coefficients(self) -> int:
        """Estimated coefficients including the constant."""
        return 1 + self.p + self.q + self.P + self.Q

    def label(self) -> str:
        base = f"ARIMA({self.p},{self.d},{self.q})"
        if self.P or self.D or self.Q:
            base += f"({self.P},{self.D},{self.Q}){self.s}"
        return base


@dataclass
class ArimaParams:
    c: float = 0.0
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma2: float = math.nan

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.Phi = np.atleast_1d(np.asarray(self.Phi, dtype=float))
        self.Theta = np.atleast_1d(np.asarray(self.Theta, dtype=float))

    def vector(self) -> np.ndarray:
        return np.concatenate(([self.c], self.phi, self.theta, self.Phi, self.Theta))

    @property
    def is_stationary(self) -> bool:
        return _poly_stable(self.phi) and _poly_stable(self.Phi)

    @property
    def is_invertible(self) -> bool:
        return _poly_stable(-self.theta) and _poly_stable(-self.Theta)


class Coefficient(NamedTuple):
    name: str
    estimate: float
    std_error: float
    p_value: float


@dataclass
class ArimaFit:
    orders: ArimaOrders
    params: ArimaParams
    std_errors: np.ndarray  # aligned with params.vector()
    log_css: float
    bic: float
    residuals: np.ndarray
    n_effective: int
    y: np.ndarray  # series actually fitted (missing values interpolated)
    n_interpolated: int = 0
    degenerate: bool = False

    def coefficient_names(self) -> list[str]:
        o = self.orders
        return (["const"]
                + [f"ar{i}" for i in range(1, o.p + 1)]
                + [f"ma{j}" for j in range(1, o.q + 1)]
                + [f"sar{o.s * i}" for i in range(1, o.P + 1)]
                + [f"sma{o.s * j}" for j in range(1, o.Q + 1)])

    def coefficients(self) -> list[Coefficient]:
        out = []
        for name, est, se in zip(self.coefficient_names(), self.params.vector(),
                                 self.std_errors):
            out.append(Coefficient(name, float(est), float(se), _coef_p_value(est, se)))
        return out


@dataclass(frozen=True)
class Forecast:
    horizon: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


class FitError(RuntimeError):
    """Estimation failed; carries the best parameters seen so far."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TentativeOrders(NamedTuple):
    p: int
    q: int
    P: int
    Q: int


# ---------------------------------------------------------------------------
# Polynomial and transform helpers
# ---------------------------------------------------------------------------

def _poly_stable(coefs: np.ndarray) -> bool:
    """True when 1 - c_1 z - ... - c_k z^k has all roots outside the unit circle."""
    coefs = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    if coefs.size == 0:
        return True
    if not np.all(np.isfinite(coefs)):
        return False
    roots = np.roots(np.r_[-coefs[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


def _seasonal_expand(coefs: np.ndarray, s: int) -> np.ndarray:
    """Lift seasonal coefficients to plain-lag positions s, 2s, ..."""
    if coefs.size == 0:
        return np.zeros(0)
    out = np.zeros(s * coefs.size)
    out[s - 1:: s] = coefs
    return out


def _combine(nonseasonal: np.ndarray, seasonal: np.ndarray, s: int) -> np.ndarray:
    """
    Lag coefficients of the product (1 - a(B)) (1 - b(B^s)), returned with
    the sign convention of the defining equation (coefficient on each lag).
    """
    pa = np.r_[1.0, -np.asarray(nonseasonal, dtype=float)]
    pb = np.r_[1.0, -_seasonal_expand(np.asarray(seasonal, dtype=float), s)]
    prod = np.convolve(pa, pb)
    return -prod[1:]


def _ar_ma_lag_coefs(orders: ArimaOrders, params: ArimaParams) -> tuple[np.ndarray, np.ndarray]:
    """Full-lag AR coefficients a_k and MA coefficients m_j of the model."""
    a = _combine(params.phi, params.Phi, orders.s)
    m = -_combine(-params.theta, -params.Theta, orders.s)
    return a, m


def _pacf_to_coefs(r: np.ndarray) -> np.ndarray:
    """Durbin-Levinson: partial autocorrelations -> AR coefficients."""
    cur: list[float] = []
    for k, rk in enumerate(r, start=1):
        cur = [cur[i] - rk * cur[k - 2 - i] for i in range(k - 1)] + [float(rk)]
    return np.asarray(cur)


def _coefs_to_pacf(coefs: np.ndarray) -> np.ndarray | None:
    """Inverse Durbin-Levinson; None when the coefficients are not stationary."""
    cur = [float(v) for v in coefs]
    p = len(cur)
    r = [0.0] * p
    for k in range(p, 0, -1):
        rk = cur[k - 1]
        if not math.isfinite(rk) or abs(rk) >= 1.0:
            return None
        r[k - 1] = rk
        if k > 1:
            denom = 1.0 - rk * rk
            cur = [(cur[i] + rk * cur[k - 2 - i]) / denom for i in range(k - 1)]
    return np.asarray(r)


def _unconstrained_from_coefs(coefs: np.ndarray) -> np.ndarray:
    """Map (possibly non-stationary) coefficients to the unconstrained space."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size == 0:
        return coefs
    shrunk = coefs.copy()
    for _ in range(60):
        r = _coefs_to_pacf(shrunk)
        if r is not None and np.all(np.abs(r) < 0.98):
            return np.arctanh(np.clip(r, -0.97, 0.97))
        shrunk = shrunk * 0.9
    return np.zeros(coefs.size)


def _coefs_from_unconstrained(u: np.ndarray) -> np.ndarray:
    if u.size == 0:
        return u
    return _pacf_to_coefs(np.clip(np.tanh(u), -_PACF_CLIP, _PACF_CLIP))


def _coef_p_value(est: float, se: float) -> float:
    if not math.isfinite(se) or se < 0:
        return math.nan
    if se == 0.0:
        return 1.0 if est == 0.0 else 0.0
    return 2.0 * normal_sf(abs(est / se))


# ---------------------------------------------------------------------------
# Differencing
# ---------------------------------------------------------------------------

def difference(y: Sequence[float] | np.ndarray, d: int, D: int, s: int = 12) -> np.ndarray:
    """Apply d simple differences then D seasonal differences at lag s."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("series must be one-dimensional")
    need = d + D * s
    if y.size <= need:
        raise ValueError(f"series of length {y.size} too short to difference "
                         f"(needs > {need})")
    z = y
    for _ in range(d):
        z = z[1:] - z[:-1]
    for _ in range(D):
        z = z[s:] - z[:-s]
    return z


def _difference_chain(y: np.ndarray, d: int, D: int, s: int) -> tuple[list[np.ndarray], list[int]]:
    """All intermediate series plus the lag used at each step."""
    chain = [np.asarray(y, dtype=float)]
    lags: list[int] = []
    for _ in range(d):
        chain.append(chain[-1][1:] - chain[-1][:-1])
        lags.append(1)
    for _ in range(D):
        chain.append(chain[-1][s:] - chain[-1][:-s])
        lags.append(s)
    return chain, lags


def _integrate_extension(chain: list[np.ndarray], lags: list[int],
                         ext: np.ndarray) -> np.ndarray:
    """Carry an extension of the deepest differenced level back up to the
    original scale."""
    for parent, lag in zip(chain[-2::-1], lags[::-1]):
        buf = parent.tolist()
        for v in ext:
            buf.append(float(v) + buf[-lag])
        ext = np.asarray(buf[parent.size:])
    return ext


def fill_missing(y: Sequence[float] | np.ndarray) -> tuple[np.ndarray, int]:
    """Linearly interpolate interior NaNs; leading/trailing NaNs are errors."""
    y = np.asarray(y, dtype=float).copy()
    bad = ~np.isfinite(y)
    n_bad = int(bad.sum())
    if n_bad == 0:
        return y, 0
    if bad[0] or bad[-1]:
        raise ValueError("cannot interpolate missing values at the series edges")
    idx = np.arange(y.size)
    y[bad] = np.interp(idx[bad], idx[~bad], y[~bad])
    return y, n_bad


# ---------------------------------------------------------------------------
# Unit-root test and differencing selection
# ---------------------------------------------------------------------------

# Response-surface coefficients for the 5% Dickey-Fuller t critical value,
# constant-only regression: crit(n) = b0 + b1/n + b2/n^2 + b3/n^3.
# Source: MacKinnon (2010), "Critical Values for Cointegration Tests",
# Queen's Economics Department WP 1227, Table 2 (no trend, N=1).
_ADF_CRIT_5PCT = (-2.86154, -2.8903, -4.234, -40.040)


class AdfResult(NamedTuple):
    statistic: float
    reject_unit_root: bool


def adf_critical_value(n_obs: int, coefs: tuple = _ADF_CRIT_5PCT) -> float:
    b0, b1, b2, b3 = coefs
    return b0 + b1 / n_obs + b2 / n_obs**2 + b3 / n_obs**3


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    return beta, float(resid @ resid)


def adf_test(y: Sequence[float] | np.ndarray, max_lag: int | None = None) -> AdfResult:
    """
    Augmented Dickey-Fuller test with a constant.

    Regresses dy_t on [1, y_{t-1}, dy_{t-1} ... dy_{t-k}] with the lag count
    k <= max_lag chosen by AIC on a common sample, then refits at the chosen
    k on the maximal sample.  The unit root is rejected when the t statistic
    of the y_{t-1} coefficient falls below the embedded 5% critical value.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 20:
        raise ValueError(f"ADF test needs at least 20 observations, got {y.size}")
    if np.ptp(y) == 0.0:
        warnings.warn("ADF on a constant series is degenerate; not rejecting")
        return AdfResult(math.nan, False)

    n = y.size
    if max_lag is None:
        max_lag = int(math.ceil(12.0 * (n / 100.0) ** 0.25))
    max_lag = max(0, min(max_lag, n // 2 - 3))

    dy = np.diff(y)

    def design(k: int, start: int) -> tuple[np.ndarray, np.ndarray]:
        rows = np.arange(start, dy.size)
        cols = [np.ones(rows.size), y[rows]]
        for j in range(1, k + 1):
            cols.append(dy[rows - j])
        return np.column_stack(cols), dy[rows]

    best_k, best_aic = 0, math.inf
    for k in range(0, max_lag + 1):
        x, dep = design(k, max_lag)
        if x.shape[0] <= x.shape[1] + 1:
            break
        _, rss = _ols(x, dep)
        n_c = dep.size
        aic = n_c * math.log(max(rss / n_c, 1e-300)) + 2 * (k + 2)
        if aic < best_aic:
            best_aic, best_k = aic, k

    x, dep = design(best_k, best_k)
    beta, rss = _ols(x, dep)
    n_c, n_cols = x.shape
    if n_c <= n_cols:
        warnings.warn("ADF regression is degenerate; not rejecting")
        return AdfResult(math.nan, False)
    sigma2 = rss / (n_c - n_cols)
    xtx_inv = np.linalg.pinv(x.T @ x)
    se = math.sqrt(max(sigma2 * xtx_inv[1, 1], 0.0))
    if se == 0.0 or not math.isfinite(se):
        warnings.warn("ADF regression is degenerate; not rejecting")
        return AdfResult(math.nan, False)
    stat = float(beta[1] / se)
    return AdfResult(stat, stat < adf_critical_value(n_c))


def _acf_at_lag(x: np.ndarray, lag: int) -> float:
    x = np.asarray(x, dtype=float)
    if x.size <= lag:
        return 0.0
    v = x - x.mean()
    denom = float(v @ v)
    if denom == 0.0:
        return 0.0
    return float(v[lag:] @ v[:-lag]) / denom


def select_differencing(
    y: Sequence[float] | np.ndarray,
    s: int = 12,
    seasonal_threshold: float = 0.64,
    d_max: int = 2,
) -> tuple[int, int]:
    """
    Pick (d, D) for a monthly series.

    D in {0, 1} comes first, from a seasonal-strength check: D = 1 when the
    lag-s autocorrelation of the first-differenced series exceeds the
    threshold.  (Differencing first immunizes the check against ordinary
    unit roots, whose slowly decaying raw autocorrelations would otherwise
    masquerade as seasonality.)  Then d is the smallest order in 0..d_max
    whose differenced series rejects the ADF unit root; d_max if none does.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 3 * s:
        raise ValueError(f"need at least {3 * s} observations, got {y.size}")

    dy = np.diff(y)
    D = 1 if _acf_at_lag(dy, s) > seasonal_threshold else 0
    work = difference(y, 0, D, s) if D else y

    for d in range(0, d_max + 1):
        zd = difference(work, d, 0, s) if d else work
        if zd.size < 20:
            break
        if adf_test(zd).reject_unit_root:
            return d, D
    return d_max, D


# ---------------------------------------------------------------------------
# Hannan-Rissanen regressions and tentative orders
# ---------------------------------------------------------------------------

def _long_ar_residuals(v: np.ndarray, order: int) -> np.ndarray:
    """Residuals of a long AR fit; entries before ``order`` are NaN."""
    n = v.size
    rows = np.arange(order, n)
    x = np.column_stack([v[rows - j] for j in range(1, order + 1)])
    beta, _ = _ols(x, v[rows])
    e = np.full(n, np.nan)
    e[rows] = v[rows] - x @ beta
    return e


def _regression_bic(v: np.ndarray, e: np.ndarray, rows: np.ndarray,
                    v_lags: Sequence[int], e_lags: Sequence[int]) -> float:
    cols = [v[rows - j] for j in v_lags] + [e[rows - j] for j in e_lags]
    if cols:
        _, rss = _ols(np.column_stack(cols), v[rows])
    else:
        rss = float(v[rows] @ v[rows])
    n_c = rows.size
    k = len(cols)
    return n_c * math.log(max(rss / n_c, 1e-300)) + k * math.log(n_c)


def minic_bic_table(z: Sequence[float] | np.ndarray, p_max: int = 5,
                    q_max: int = 5) -> np.ndarray:
    """
    The (p_max+1) x (q_max+1) grid of regression BICs behind the tentative
    nonseasonal order choice, on the common sample used for selection.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    v = z - z.mean()
    long_order = max(1, min(math.ceil(min(n / 10.0, 20.0)), n // 2 - 2))
    e = _long_ar_residuals(v, long_order)
    rows = np.arange(max(long_order + q_max, p_max), n)
    table = np.empty((p_max + 1, q_max + 1))
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            table[p, q] = _regression_bic(v, e, rows, range(1, p + 1),
                                          range(1, q + 1))
    return table


def tentative_orders(
    z: Sequence[float] | np.ndarray,
    s: int = 12,
    p_max: int = 5,
    q_max: int = 5,
) -> TentativeOrders:
    """
    Minimum-BIC tentative ARMA orders for a stationary (differenced) series.

    A long AR fit supplies residual proxies; every (p, q) cell is then a
    least-squares regression on lagged values and lagged proxies, scored by
    BIC over a common sample.  Seasonal orders are picked the same way from
    lag-s terms, capped at 2.  Infeasibly short series shrink the grid with
    a warning.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if n < 20:
        raise ValueError(f"need at least 20 observations, got {n}")
    v = z - z.mean()
    if np.ptp(v) == 0.0:
        return TentativeOrders(0, 0, 0, 0)

    long_order = max(1, min(math.ceil(min(n / 10.0, 20.0)), n // 2 - 2))
    e = _long_ar_residuals(v, long_order)

    while p_max + q_max > 0:
        start = max(long_order + q_max, p_max)
        if n - start >= max(12, 2 * (p_max + q_max)):
            break
        warnings.warn("series too short for the full order grid; shrinking")
        p_max = max(p_max - 1, 0)
        q_max = max(q_max - 1, 0)
    start = max(long_order + q_max, p_max)
    rows = np.arange(start, n)

    best = (math.inf, 0, 0)
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            bic = _regression_bic(v, e, rows, range(1, p + 1),
                                  range(1, q + 1))
            if bic < best[0] - 1e-12:
                best = (bic, p, q)
    p_star, q_star = best[1], best[2]

    P_cap = 2
    while P_cap > 0 and n - (long_order + P_cap * s) < 12:
        P_cap -= 1
    if P_cap == 0:
        if n >= 3 * s:
            warnings.warn("series too short for seasonal order detection")
        return TentativeOrders(p_star, q_star, 0, 0)

    start_s = long_order + P_cap * s
    rows_s = np.arange(start_s, n)
    best_s = (math.inf, 0, 0)
    for P in range(P_cap + 1):
        for Q in range(P_cap + 1):
            bic = _regression_bic(v, e, rows_s, [s * i for i in range(1, P + 1)],
                                  [s * j for j in range(1, Q + 1)])
            if bic < best_s[0] - 1e-12:
                best_s = (bic, P, Q)
    return TentativeOrders(p_star, q_star, best_s[1], best_s[2])


def hannan_rissanen_start(z: np.ndarray, orders: ArimaOrders) -> ArimaParams:
    """Least-squares starting values for CSS optimization."""
    v = z - z.mean()
    n = v.size
    o = orders
    lags_v = list(range(1, o.p + 1)) + [o.s * i for i in range(1, o.P + 1)]
    lags_e = list(range(1, o.q + 1)) + [o.s * j for j in range(1, o.Q + 1)]
    max_lag = max(lags_v + lags_e, default=0)

    phi = np.zeros(o.p)
    theta = np.zeros(o.q)
    Phi = np.zeros(o.P)
    Theta = np.zeros(o.Q)
    if max_lag:
        long_order = max(1, min(math.ceil(min(n / 10.0, 20.0)), n // 2 - 2))
        e = _long_ar_residuals(v, long_order)
        start = max(long_order + max(lags_e, default=0), max(lags_v, default=0))
        rows = np.arange(start, n)
        if rows.size > len(lags_v) + len(lags_e) + 2:
            cols = [v[rows - j] for j in lags_v] + [e[rows - j] for j in lags_e]
            beta, _ = _ols(np.column_stack(cols), v[rows])
            k = 0
            phi = beta[k:k + o.p]; k += o.p
            Phi = beta[k:k + o.P]; k += o.P
            theta = beta[k:k + o.q]; k += o.q
            Theta = beta[k:k + o.Q]
    mu = float(np.mean(z))
    c = mu * float((1.0 - phi.sum()) * (1.0 - Phi.sum()))
    return ArimaParams(c=c, phi=phi, theta=theta, Phi=Phi, Theta=Theta)


# ---------------------------------------------------------------------------
# CSS objective
# ---------------------------------------------------------------------------

def _residuals_from_lags(v: np.ndarray, a: np.ndarray, m: np.ndarray) -> np.ndarray:
    """One-step errors of the deviation series under full-lag coefficients."""
    base = v.copy()
    for k in range(1, a.size + 1):
        ak = a[k - 1]
        if ak != 0.0:
            base[k:] -= ak * v[:-k]
    m_trim = np.trim_zeros(m, "b")
    if m_trim.size == 0:
        return base
    q = m_trim.size
    mlist = m_trim.tolist()
    blist = base.tolist()
    eps: list[float] = []
    for t in range(base.size):
        acc = blist[t]
        jmax = t if t < q else q
        for j in range(1, jmax + 1):
            mj = mlist[j - 1]
            if mj != 0.0:
                acc -= mj * eps[t - j]
        eps.append(acc)
    return np.asarray(eps)


def _css_value(z: np.ndarray, orders: ArimaOrders, c: float,
               a: np.ndarray, m: np.ndarray) -> float:
    ar_at_one = 1.0 - a.sum()
    if abs(ar_at_one) < 1e-10:
        return _PENALTY
    mu = c / ar_at_one
    eps = _residuals_from_lags(z - mu, a, m)
    css = float(eps @ eps)
    if not math.isfinite(css):
        return _PENALTY
    return css


def css_objective(z: Sequence[float] | np.ndarray, orders: ArimaOrders,
                  params: ArimaParams) -> float:
    """
    Conditional sum of squared one-step errors of ``params`` on the
    differenced series ``z``.  Non-stationary or non-invertible parameters
    return a large penalty value (the optimizer's rejection signal).
    """
    z = np.asarray(z, dtype=float)
    if params.phi.size != orders.p or params.theta.size != orders.q \
            or params.Phi.size != orders.P or params.Theta.size != orders.Q:
        raise ValueError("parameter lengths do not match the orders")
    if not (params.is_stationary and params.is_invertible):
        return _PENALTY
    a, m = _ar_ma_lag_coefs(orders, params)
    return _css_value(z, orders, params.c, a, m)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

def _pack(params: ArimaParams) -> np.ndarray:
    return np.concatenate((
        [params.c],
        _unconstrained_from_coefs(params.phi),
        _unconstrained_from_coefs(-params.theta),
        _unconstrained_from_coefs(params.Phi),
        _unconstrained_from_coefs(-params.Theta),
    ))


def _unpack(x: np.ndarray, orders: ArimaOrders) -> ArimaParams:
    o = orders
    k = 1
    phi = _coefs_from_unconstrained(x[k:k + o.p]); k += o.p
    theta = -_coefs_from_unconstrained(x[k:k + o.q]); k += o.q
    Phi = _coefs_from_unconstrained(x[k:k + o.P]); k += o.P
    Theta = -_coefs_from_unconstrained(x[k:k + o.Q])
    return ArimaParams(c=float(x[0]), phi=phi, theta=theta, Phi=Phi, Theta=Theta)


def _fd_hessian(func, x0: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central finite-difference Hessian."""
    k = x0.size
    h = rel_step * np.maximum(1.0, np.abs(x0))
    hess = np.empty((k, k))
    f0 = func(x0)

    def at(*pairs) -> float:
        x = x0.copy()
        for i, sign in pairs:
            x[i] += sign * h[i]
        return func(x)

    for i in range(k):
        hess[i, i] = (at((i, 1)) - 2.0 * f0 + at((i, -1))) / h[i] ** 2
        for j in range(i + 1, k):
            val = (at((i, 1), (j, 1)) - at((i, 1), (j, -1))
                   - at((i, -1), (j, 1)) + at((i, -1), (j, -1))) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def _coefficient_std_errors(z: np.ndarray, orders: ArimaOrders,
                            params: ArimaParams, sigma2: float) -> np.ndarray:
    """
    Asymptotic standard errors from the finite-difference Hessian of the
    CSS objective in raw coefficient space: cov = 2 sigma2 H^{-1}.
    """
    vec0 = params.vector()
    o = orders

    def raw_objective(vec: np.ndarray) -> float:
        k = 1
        p = ArimaParams(c=float(vec[0]),
                        phi=vec[k:k + o.p], theta=vec[k + o.p:k + o.p + o.q],
                        Phi=vec[k + o.p + o.q:k + o.p + o.q + o.P],
                        Theta=vec[k + o.p + o.q + o.P:])
        a, m = _ar_ma_lag_coefs(o, p)
        return _css_value(z, o, p.c, a, m)

    if sigma2 <= 0.0:
        return np.zeros(vec0.size)
    hess = _fd_hessian(raw_objective, vec0)
    if not np.all(np.isfinite(hess)):
        return np.full(vec0.size, np.nan)
    cov = 2.0 * sigma2 * np.linalg.pinv(hess)
    diag = np.diag(cov).copy()
    diag[diag < 0] = np.nan
    return np.sqrt(diag)


def _degenerate_fit(y: np.ndarray, orders: ArimaOrders, n_interp: int) -> ArimaFit:
    z = difference(y, orders.d, orders.D, orders.s) if (orders.d or orders.D) else y
    params = ArimaParams(c=float(z[0]), phi=np.zeros(orders.p),
                         theta=np.zeros(orders.q), Phi=np.zeros(orders.P),
                         Theta=np.zeros(orders.Q), sigma2=0.0)
    k = orders.n_coefficients
    return ArimaFit(orders=orders, params=params,
                    std_errors=np.zeros(k), log_css=-math.inf, bic=-math.inf,
                    residuals=np.zeros(z.size), n_effective=z.size, y=y,
                    n_interpolated=n_interp, degenerate=True)


def fit(y: Sequence[float] | np.ndarray, orders: ArimaOrders,
        max_evals: int = 2000) -> ArimaFit:
    """
    Estimate a seasonal ARIMA by CSS minimization.

    Parameters
    ----------
    y : array_like, 1d
        The undifferenced series.  Interior missing values are linearly
        interpolated (the count is recorded on the returned fit).
    orders : ArimaOrders
        Model orders; differencing happens internally.
    max_evals : int
        Evaluation budget of the simplex search.

    Returns
    -------
    ArimaFit
        Estimated coefficients with standard errors from the finite-
        difference Hessian of the objective, residuals, sigma2 = CSS/n and
        the BIC.

    Notes
    -----
    Starting values come from Hannan-Rissanen least squares; coefficients
    are optimized through a partial-autocorrelation transform, so every
    point the optimizer visits is stationary and invertible.
    """
    y = np.asarray(y, dtype=float)
    total_orders = orders.p + orders.q + orders.P + orders.Q + orders.d + orders.D * orders.s
    if y.size < 10 + total_orders:
        raise ValueError(f"series of length {y.size} too short for {orders.label()}")
    y, n_interp = fill_missing(y)
    if n_interp:
        logger.info("interpolated %d missing values before fitting", n_interp)

    z = difference(y, orders.d, orders.D, orders.s)
    if np.ptp(z) == 0.0:
        return _degenerate_fit(y, orders, n_interp)

    start = hannan_rissanen_start(z, orders)
    x0 = _pack(start)

    def objective(x: np.ndarray) -> float:
        p = _unpack(x, orders)
        a, m = _ar_ma_lag_coefs(orders, p)
        return _css_value(z, orders, p.c, a, m)

    result = nelder_mead(objective, x0, max_evals=max_evals, rel_tol=1e-10)
    if not result.converged:
        raise FitError(
            f"CSS optimization did not converge for {orders.label()}",
            diagnostics={"best_objective": result.fun, "n_evals": result.n_evals,
                         "best_params": _unpack(result.x, orders)})

    params = _unpack(result.x, orders)
    if not (params.is_stationary and params.is_invertible):
        raise FitError(f"optimum for {orders.label()} fails the root check")

    a, m = _ar_ma_lag_coefs(orders, params)
    css = _css_value(z, orders, params.c, a, m)
    n_eff = z.size
    sigma2 = css / n_eff
    params.sigma2 = sigma2
    mu = params.c / (1.0 - a.sum())
    residuals = _residuals_from_lags(z - mu, a, m)

    k = orders.n_coefficients
    bic = (n_eff * math.log(sigma2) + k * math.log(n_eff)
           if sigma2 > 0.0 else -math.inf)
    std_errors = _coefficient_std_errors(z, orders, params, sigma2)
    return ArimaFit(orders=orders, params=params, std_errors=std_errors,
                    log_css=math.log(css) if css > 0.0 else -math.inf,
                    bic=bic, residuals=residuals, n_effective=n_eff, y=y,
                    n_interpolated=n_interp)


def auto_fit(
    y: Sequence[float] | np.ndarray,
    s: int = 12,
    p_max: int = 5,
    q_max: int = 5,
    seasonal_threshold: float = 0.64,
    max_evals: int = 2000,
) -> ArimaFit:
    """
    Automatic pipeline: differencing selection, tentative orders, then an
    exhaustive minimum-BIC search bounded above by the tentative orders.
    Failed grid cells are skipped; the best feasible model is returned.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 3 * s:
        raise ValueError(f"need at least {3 * s} observations, got {y.size}")
    y, n_interp = fill_missing(y)
    if np.ptp(y) == 0.0:
        return _degenerate_fit(y, ArimaOrders(0, 0, 0, 0, 0, 0, s), n_interp)

    d, D = select_differencing(y, s=s, seasonal_threshold=seasonal_threshold)
    z = difference(y, d, D, s)
    tentative = tentative_orders(z, s=s, p_max=p_max, q_max=q_max)

    best: ArimaFit | None = None
    failures: list[tuple[ArimaOrders, str]] = []
    for p in range(tentative.p + 1):
        for q in range(tentative.q + 1):
            for P in range(tentative.P + 1):
                for Q in range(tentative.Q + 1):
                    orders = ArimaOrders(p, d, q, P, D, Q, s)
                    try:
                        cand = fit(y, orders, max_evals=max_evals)
                    except (FitError, ValueError) as exc:
                        failures.append((orders, str(exc)))
                        continue
                    if best is None or cand.bic < best.bic - 1e-12:
                        best = cand
    if best is None:
        raise FitError(f"all {len(failures)} candidate models failed",
                       diagnostics={"failures": failures})
    return best


# ---------------------------------------------------------------------------
# Forecasting and simulation
# ---------------------------------------------------------------------------

def _psi_weights(a_full: np.ndarray, m_full: np.ndarray, h: int) -> np.ndarray:
    psi = np.zeros(h)
    psi[0] = 1.0
    for j in range(1, h):
        val = m_full[j - 1] if j - 1 < m_full.size else 0.0
        kmax = min(j, a_full.size)
        for k in range(1, kmax + 1):
            val += a_full[k - 1] * psi[j - k]
        psi[j] = val
    return psi


def _full_ar_with_differencing(orders: ArimaOrders, params: ArimaParams) -> np.ndarray:
    """AR lag coefficients of phi(B) Phi(B^s) (1-B)^d (1-B^s)^D."""
    poly = np.r_[1.0, -_combine(params.phi, params.Phi, orders.s)]
    for _ in range(orders.d):
        poly = np.convolve(poly, [1.0, -1.0])
    seasonal = np.zeros(orders.s + 1)
    seasonal[0], seasonal[-1] = 1.0, -1.0
    for _ in range(orders.D):
        poly = np.convolve(poly, seasonal)
    return -poly[1:]


def forecast(fit_result: ArimaFit, h: int, level: float = 0.95) -> Forecast:
    """
    Iterated-expectation point forecasts with normal prediction intervals.

    The variance at horizon j is sigma2 * sum of the first j squared psi
    weights of the full (differenced) lag polynomial.
    """
    if h <= 0:
        raise ValueError(f"horizon must be positive, got {h}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    o = fit_result.orders
    params = fit_result.params

    chain, lags = _difference_chain(fit_result.y, o.d, o.D, o.s)
    z = chain[-1]
    a, m = _ar_ma_lag_coefs(o, params)
    ar_at_one = 1.0 - a.sum()
    mu = params.c / ar_at_one if ar_at_one != 0.0 else 0.0

    v = (z - mu).tolist()
    eps = fit_result.residuals.tolist()
    z_fc = np.empty(h)
    for j in range(h):
        acc = 0.0
        for k in range(1, a.size + 1):
            if a[k - 1] != 0.0 and len(v) - k >= 0:
                acc += a[k - 1] * v[len(v) - k]
        for l in range(1, m.size + 1):
            if m[l - 1] != 0.0 and len(eps) - l >= 0:
                acc += m[l - 1] * eps[len(eps) - l]
        v.append(acc)
        eps.append(0.0)
        z_fc[j] = mu + acc

    point = _integrate_extension(chain, lags, z_fc)

    a_full = _full_ar_with_differencing(o, params)
    psi = _psi_weights(a_full, m, h)
    var = params.sigma2 * np.cumsum(psi**2)
    zq = normal_ppf(1.0 - (1.0 - level) / 2.0)
    half = zq * np.sqrt(np.maximum(var, 0.0))
    return Forecast(horizon=h, point=point, lower=point - half,
                    upper=point + half, level=level)


def simulate(orders: ArimaOrders, params: ArimaParams, n: int, seed: int,
             burnin: int = 200) -> np.ndarray:
    """
    Draw a seeded realization of the model: ARMA recursion on Gaussian
    noise with a discarded burn-in, then d simple and D seasonal
    integrations.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if not (params.is_stationary and params.is_invertible):
        raise ValueError("simulation requires stationary/invertible parameters")
    if not math.isfinite(params.sigma2) or params.sigma2 < 0:
        raise ValueError("params.sigma2 must be set to a finite nonnegative value")
    sigma = math.sqrt(params.sigma2)
    a, m = _ar_ma_lag_coefs(orders, params)
    ar_at_one = 1.0 - a.sum()
    mu = params.c / ar_at_one

    rng = np.random.default_rng(seed)
    total = n + burnin
    eps = rng.normal(0.0, sigma, total)
    v = np.zeros(total)
    alist, mlist = a.tolist(), m.tolist()
    for t in range(total):
        acc = eps[t]
        for k in range(1, len(alist) + 1):
            if alist[k - 1] != 0.0 and t - k >= 0:
                acc += alist[k - 1] * v[t - k]
        for l in range(1, len(mlist) + 1):
            if mlist[l - 1] != 0.0 and t - l >= 0:
                acc += mlist[l - 1] * eps[t - l]
        v[t] = acc
    z = mu + v[burnin:]

    y = z
    for _ in range(orders.d):
        y = np.cumsum(y)
    for _ in range(orders.D):
        out = y.copy()
        for t in range(orders.s, n):
            out[t] += out[t - orders.s]
        y = out
    return y


def simulate_forecast_paths(fit_result: ArimaFit, h: int, n_paths: int,
                            seed: int) -> np.ndarray:
    """
    Conditional continuation paths from the end of the fitted series,
    shape (n_paths, h); used to check prediction-interval calibration.
    """
    if h <= 0 or n_paths <= 0:
        raise ValueError("h and n_paths must be positive")
    o = fit_result.orders
    params = fit_result.params
    chain, lags = _difference_chain(fit_result.y, o.d, o.D, o.s)
    z = chain[-1]
    a, m = _ar_ma_lag_coefs(o, params)
    mu = params.c / (1.0 - a.sum())

    rng = np.random.default_rng(seed)
    sigma = math.sqrt(max(params.sigma2, 0.0))
    hist = z.size
    v = np.tile(z - mu, (n_paths, 1))
    v = np.concatenate([v, np.zeros((n_paths, h))], axis=1)
    eps = np.tile(fit_result.residuals, (n_paths, 1))
    new_eps = rng.normal(0.0, sigma, (n_paths, h))
    eps = np.concatenate([eps, new_eps], axis=1)

    for j in range(h):
        t = hist + j
        acc = eps[:, t].copy()
        for k in range(1, a.size + 1):
            if a[k - 1] != 0.0:
                acc += a[k - 1] * v[:, t - k]
        for l in range(1, m.size + 1):
            if m[l - 1] != 0.0:
                acc += m[l - 1] * eps[:, t - l]
        v[:, t] = acc
    z_paths = mu + v[:, hist:]

    out = np.empty((n_paths, h))
    for i in range(n_paths):
        out[i] = _integrate_extension(chain, lags, z_paths[i])
    return out


def ljung_box(residuals: Sequence[float] | np.ndarray, lag: int = 12,
              n_params: int = 0) -> TestResult:
    """Ljung-Box whiteness test of residual autocorrelations up to ``lag``."""
    x = np.asarray(residuals, dtype=float)
    if x.size <= lag:
        raise ValueError(f"need more than {lag} residuals, got {x.size}")
    n = x.size
    q = 0.0
    for k in range(1, lag + 1):
        rk = _acf_at_lag(x, k)
        q += rk * rk / (n - k)
    q *= n * (n + 2.0)
    df = max(lag - n_params, 1)
    return TestResult(statistic=q, df=(float(df),), p_value=chi2_sf(q, df),
                      alternative="greater")
