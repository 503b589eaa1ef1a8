"""ARIMA(p,d,q) estimation, order selection and interval forecasting.

Model convention (on the d-times-differenced series z):

    z_t = c + phi_1 z_{t-1} + ... + phi_p z_{t-p}
            + e_t + theta_1 e_{t-1} + ... + theta_q e_{t-q}

Estimation minimizes the conditional sum of squared innovations, with
pre-sample observations set to the mean of the differenced series and
pre-sample innovations set to zero. The intercept is always estimated, so
d >= 1 models carry drift. Minimization uses a derivative-free simplex
search started both from zeros and from Yule-Walker AR guesses; parameter
vectors whose AR polynomial has a root within ``STATIONARITY_RADIUS`` of
the unit circle are penalized continuously rather than rejected, which
keeps the simplex well-behaved near the boundary.

Interval forecasts use the MA(infinity) weights of the integrated model:
the 95% half-width at step h is ``1.96 * sqrt(sigma2 * sum_{j<h} psi_j^2)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._backend import kernels
from .errors import DomainError, EstimationError
from .timeseries import AnnualSeries, difference, yule_walker_ar

MAX_P = 5
MAX_Q = 5
MAX_D = 2

#: AR roots closer to the unit circle than this are penalized.
STATIONARITY_RADIUS = 1.001

#: Order selection discards fits whose AR or MA polynomial has a root with
#: modulus below this: such fits are near-cancelling or near-unit-root
#: artifacts of the conditional-sum-of-squares surface, not better models.
ROOT_REJECT_RADIUS = 1.01

#: Difference again only while it cuts the sample variance below this
#: fraction of the previous level. For a stationary AR(1) the ratio is
#: 2(1-r1), so 0.30 keeps series with lag-1 autocorrelation below 0.85
#: undifferenced while still catching unit roots, whose ratio is ~2/n.
VARIANCE_STOP_RATIO = 0.30

#: Candidates within this AICc distance of the minimum are treated as
#: equivalent and resolved toward the most parsimonious order.
AICC_PARSIMONY_MARGIN = 4.0


@dataclass(frozen=True)
class ArimaOrder:
    """Model order (p, d, q); the all-zero order is not a model."""

    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("orders must be non-negative")
        if self.p > MAX_P or self.q > MAX_Q:
            raise ValueError(f"p and q are limited to {MAX_P}, got ({self.p}, {self.q})")
        if self.d > MAX_D:
            raise ValueError(f"d is limited to {MAX_D}, got {self.d}")
        if self.p + self.q == 0 and self.d == 0:
            raise ValueError("(0, 0, 0) is not a valid order")

    @property
    def n_params(self) -> int:
        """Free parameters of the CSS fit: intercept plus AR plus MA."""
        return 1 + self.p + self.q


@dataclass(frozen=True)
class ArimaFit:
    """Estimated coefficients and fit diagnostics."""

    order: ArimaOrder
    ar: np.ndarray = field(repr=False)
    ma: np.ndarray = field(repr=False)
    intercept: float
    sigma2: float
    n_obs: int
    css: float
    aicc: float

    def __post_init__(self):
        if self.ar.size != self.order.p or self.ma.size != self.order.q:
            raise ValueError("coefficient lengths must match the declared order")
        if not self.sigma2 > 0:
            raise DomainError(f"innovation variance must be positive, got {self.sigma2}")
        if not math.isfinite(self.aicc):
            raise DomainError("AICc must be finite")


@dataclass(frozen=True)
class ForecastPath:
    """Point forecasts with 95% bounds and the psi weights behind them."""

    horizon: int
    point: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if np.any(self.lower95 > self.point) or np.any(self.point > self.upper95):
            raise DomainError("forecast intervals must bracket the point forecast")


def _split_params(order: ArimaOrder, params) -> tuple[float, np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=np.float64)
    if params.size != order.n_params:
        raise ValueError(f"expected {order.n_params} parameters "
                         f"(c, {order.p} AR, {order.q} MA), got {params.size}")
    c = float(params[0])
    ar = params[1:1 + order.p].copy()
    ma = params[1 + order.p:].copy()
    return c, ar, ma


def css_objective(order: ArimaOrder, params, s: AnnualSeries) -> float:
    """Conditional sum of squared innovations for one parameter vector."""
    c, ar, ma = _split_params(order, params)
    z = difference(s, order.d).values
    if z.size <= order.p + order.q + 1:
        raise ValueError("series is too short after differencing for this order")
    e = kernels.css_innovations(z, c, ar, ma, float(z.mean()))
    return float(np.dot(e, e))


def _min_poly_root(coefs: np.ndarray) -> float:
    """Smallest root modulus of 1 - c_1 z - ... - c_k z^k."""
    if coefs.size == 0:
        return math.inf
    coeffs = np.concatenate((-coefs[::-1], [1.0]))
    while coeffs.size > 1 and coeffs[0] == 0.0:
        coeffs = coeffs[1:]
    if coeffs.size <= 1:
        return math.inf
    return float(np.min(np.abs(np.roots(coeffs))))


def _min_ar_root(ar: np.ndarray) -> float:
    return _min_poly_root(ar)


def _stationarity_penalty(ar: np.ndarray) -> float:
    root = _min_ar_root(ar)
    if root >= STATIONARITY_RADIUS:
        return 0.0
    return (STATIONARITY_RADIUS - root) / STATIONARITY_RADIUS


def fit(s: AnnualSeries, order: ArimaOrder) -> ArimaFit:
    """Estimate an ARIMA model by conditional sum of squares."""
    z = difference(s, order.d).values
    n_eff = z.size
    if n_eff < 10 + order.p + order.q:
        raise ValueError(f"need at least {10 + order.p + order.q} observations after "
                         f"differencing, got {n_eff}")
    pad = float(z.mean())

    def raw_css(params):
        c = params[0]
        ar = params[1:1 + order.p]
        ma = params[1 + order.p:]
        e = kernels.css_innovations(z, float(c), np.asarray(ar), np.asarray(ma), pad)
        val = float(np.dot(e, e))
        return val if math.isfinite(val) else 1e300

    def penalized(params):
        val = raw_css(params)
        pen = _stationarity_penalty(np.asarray(params[1:1 + order.p]))
        return val * (1.0 + 1e3 * pen)

    if order.p + order.q == 0:
        best_params = np.array([pad])
        converged = True
    else:
        starts = [np.concatenate(([pad], np.zeros(order.p + order.q)))]
        if order.p > 0:
            ar0 = yule_walker_ar(AnnualSeries(0, z), order.p)
            if _stationarity_penalty(ar0) > 0.0:
                ar0 = ar0 * 0.9 / max(1e-12, float(np.max(np.abs(ar0))))
            c0 = pad * (1.0 - float(np.sum(ar0)))
            starts.append(np.concatenate(([c0], ar0, np.zeros(order.q))))
        best_params = None
        best_val = math.inf
        converged = False
        for x0 in starts:
            res = minimize(penalized, x0, method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-10,
                                    "maxiter": 4000 * x0.size,
                                    "maxfev": 4000 * x0.size})
            if res.fun < best_val:
                best_val = float(res.fun)
                best_params = np.asarray(res.x)
                converged = bool(res.success)
            elif res.success and res.fun == best_val:
                converged = True

    css = raw_css(best_params)
    c, ar, ma = _split_params(order, best_params)
    sigma2 = css / n_eff
    if not sigma2 > 0.0:
        raise DomainError("innovations are exactly zero; the series is deterministic "
                          "at this order and the model is degenerate")
    k = order.n_params + 1  # + innovation variance
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
    aic = -2.0 * loglik + 2.0 * k
    aicc = aic + 2.0 * k * (k + 1) / (n_eff - k - 1) if n_eff - k - 1 > 0 else math.inf
    result = ArimaFit(order=order, ar=ar, ma=ma, intercept=c, sigma2=sigma2,
                      n_obs=len(s), css=css, aicc=aicc)
    if not converged:
        raise EstimationError(
            f"simplex search did not converge for order ({order.p},{order.d},{order.q})",
            best_fit=result)
    return result


def select_order(s: AnnualSeries, p_max: int, d_max: int, q_max: int,
                 aicc_margin: float = AICC_PARSIMONY_MARGIN) -> ArimaOrder:
    """Pick (p, d, q) by variance-stop differencing plus AICc.

    d is the smallest order at which differencing again no longer cuts the
    sample variance below ``VARIANCE_STOP_RATIO`` of its current level.
    With d fixed, all (p, q) on the grid are fit and the minimum-AICc
    candidate wins; candidates within ``aicc_margin`` of the minimum are
    resolved toward smaller p+q, then smaller p.
    """
    if not (0 <= p_max <= MAX_P and 0 <= q_max <= MAX_Q and 0 <= d_max <= MAX_D):
        raise ValueError(f"bounds must satisfy p,q <= {MAX_P} and d <= {MAX_D}")
    values = s.values
    if float(np.var(values)) == 0.0:
        raise DomainError("cannot select an order for a zero-variance series")

    d = 0
    while d < d_max:
        cur = np.diff(values, n=d) if d else values
        if cur.size < 3:
            break
        nxt = np.diff(cur)
        if float(np.var(nxt)) > VARIANCE_STOP_RATIO * float(np.var(cur)):
            break
        d += 1

    candidates = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            if p + q == 0 and d == 0:
                continue
            if len(s) - d < 10 + p + q:
                continue
            candidates.append(ArimaOrder(p, d, q))
    if not candidates:
        raise ValueError("series is too short for any candidate order")

    fits: list[ArimaFit] = []
    for order in candidates:
        try:
            candidate = fit(s, order)
        except EstimationError as err:
            if err.best_fit is None:
                continue
            candidate = err.best_fit
        except DomainError:
            continue
        # near-unit-circle or near-cancelling roots mark a degenerate CSS
        # optimum (classic ARMA overfit on short series), not a better model
        if (_min_poly_root(candidate.ar) < ROOT_REJECT_RADIUS
                or _min_poly_root(-candidate.ma) < ROOT_REJECT_RADIUS):
            continue
        fits.append(candidate)
    if not fits:
        raise EstimationError("no candidate order could be estimated", best_fit=None)

    best_aicc = min(f.aicc for f in fits)
    shortlist = [f for f in fits if f.aicc <= best_aicc + aicc_margin]
    winner = min(shortlist, key=lambda f: (f.order.p + f.order.q, f.order.p, f.order.q))
    return winner.order


def psi_weights(ar: np.ndarray, ma: np.ndarray, d: int, horizon: int) -> np.ndarray:
    """First ``horizon`` MA(infinity) weights of the integrated model."""
    p, q = ar.size, ma.size
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for k in range(1, horizon):
        acc = ma[k - 1] if k <= q else 0.0
        for i in range(1, min(k, p) + 1):
            acc += ar[i - 1] * psi[k - i]
        psi[k] = acc
    for _ in range(d):
        psi = np.cumsum(psi)
    return psi


def forecast(f: ArimaFit, s: AnnualSeries, horizon: int) -> ForecastPath:
    """Point and 95% interval forecasts ``horizon`` steps past the series end."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    order = f.order
    z = difference(s, order.d).values
    pad = float(z.mean())
    e_hist = kernels.css_innovations(z, f.intercept, f.ar, f.ma, pad)

    n = z.size
    z_ext = np.concatenate((z, np.zeros(horizon)))
    for h in range(1, horizon + 1):
        t = n + h - 1
        acc = f.intercept
        for i in range(1, order.p + 1):
            acc += f.ar[i - 1] * (z_ext[t - i] if t - i >= 0 else pad)
        for j in range(1, order.q + 1):
            lag = t - j
            if 0 <= lag < n:
                acc += f.ma[j - 1] * e_hist[lag]
        z_ext[t] = acc
    z_fore = z_ext[n:]

    # integrate back to the original scale, anchored at the series tail
    stages = [s.values]
    for _ in range(order.d - 1):
        stages.append(np.diff(stages[-1]))
    point = z_fore
    for stage in reversed(stages[:order.d]):
        point = stage[-1] + np.cumsum(point)

    psi = psi_weights(f.ar, f.ma, order.d, horizon)
    se = np.sqrt(f.sigma2 * np.cumsum(psi * psi))
    half = 1.96 * se
    return ForecastPath(horizon=horizon, point=point, lower95=point - half,
                        upper95=point + half, psi=psi)
