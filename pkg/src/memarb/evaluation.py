"""Scoring a portfolio: Portmanteau statistic, threshold trading, comparators."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DataError, DegenerateSeries, ParameterError, ThresholdTooHigh

DEFAULT_LAGS = 20
P_VALUE_FLOOR = 1e-15


# -- chi-square tail --------------------------------------------------------

_EPS = 1e-12
_TINY = 1e-300
_MAX_ITER = 10_000


def _lower_gamma_series(a, x):
    """Regularised lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a, x):
    """Regularised upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_pvalue(Q, L):
    """Upper tail probability of a chi-square with ``L`` degrees of freedom at ``Q``."""
    if L < 1:
        raise ParameterError("degrees of freedom must be at least 1")
    if Q < 0:
        raise ParameterError("statistic must be nonnegative")
    if Q == 0:
        return 1.0
    if math.isinf(Q):
        return 0.0
    a = 0.5 * L
    x = 0.5 * Q
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_cf(a, x)))


def format_p_value(p):
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return None
    return f"<{P_VALUE_FLOOR:g}" if p < P_VALUE_FLOOR else f"{p:.6g}"


# -- Portmanteau ------------------------------------------------------------


def autocorr(delta, k):
    """Sample autocorrelation at lag ``k`` (not mean-centred)."""
    d = np.asarray(delta, dtype=float)
    T = d.size
    if not 1 <= k < T:
        raise ParameterError(f"lag {k} needs 1 <= k < T={T}")
    denom = float(d @ d)
    if denom == 0.0:
        raise DegenerateSeries("series of changes is identically zero")
    return float(d[k:] @ d[:-k]) / denom


@dataclass
class MeanReversionReport:
    Q: float
    L: int
    p_value: float
    rho: np.ndarray

    def to_dict(self):
        return {
            "Q": self.Q,
            "L": self.L,
            "p_value": self.p_value,
            "p_value_display": format_p_value(self.p_value),
            "rho": [float(r) for r in self.rho],
        }


def portmanteau(delta, L=DEFAULT_LAGS):
    """Ljung-Box style statistic ``T (T + 2) sum_k rho(k)^2 / (T - k)`` and its p-value."""
    d = np.asarray(delta, dtype=float)
    T = d.size
    if L < 1 or T <= L:
        raise ParameterError(f"need T > L >= 1, got T={T}, L={L}")
    denom = float(d @ d)
    if denom == 0.0:
        raise DegenerateSeries("series of changes is identically zero")
    rho = np.array([float(d[k:] @ d[:-k]) / denom for k in range(1, L + 1)])
    lags = np.arange(1, L + 1)
    Q = float(T * (T + 2) * np.sum(rho ** 2 / (T - lags)))
    return MeanReversionReport(Q, int(L), chi2_pvalue(Q, L), rho)


def portfolio_values(weights, prices):
    """``v_t = x_t . y_t`` for a weight history (or a single fixed vector)."""
    Y = np.asarray(getattr(prices, "prices", prices), dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    W = np.asarray(weights, dtype=float)
    if W.ndim == 1:
        if W.size != Y.shape[1]:
            raise ContractViolation(f"{W.size} weights for {Y.shape[1]} assets")
        return Y @ W
    if W.shape != Y.shape:
        raise ContractViolation(f"weights {W.shape} and prices {Y.shape} differ")
    return np.einsum("ij,ij->i", W, Y)


def daily_changes(values):
    return np.diff(np.asarray(values, dtype=float))


# -- trading ----------------------------------------------------------------


@dataclass
class TradeLog:
    events: list = field(default_factory=list)
    revenue: float = 0.0
    open_position: dict = None

    def to_dict(self):
        return {
            "revenue": self.revenue,
            "trades": [
                {"round": r, "action": a, "price": p} for r, a, p in self.events
            ],
            "open_position": self.open_position,
        }


def threshold_backtest(values, lower=-1.0, upper=1.0):
    """Buy one unit when the value touches ``lower``, sell when it reaches ``upper``.

    Realised revenue counts completed round trips only. A position still open
    at the end is marked to the final value in ``open_position``.
    """
    if not upper > lower:
        raise ParameterError("upper threshold must exceed lower threshold")
    v = np.asarray(values, dtype=float)
    log = TradeLog()
    entry = None
    for t, price in enumerate(v):
        price = float(price)
        if entry is None and price <= lower:
            entry = (t, price)
            log.events.append((t, "buy", price))
        elif entry is not None and price >= upper:
            log.revenue += price - entry[1]
            log.events.append((t, "sell", price))
            entry = None
    if entry is not None:
        mark = float(v[-1])
        log.open_position = {
            "entry_round": entry[0],
            "entry_price": entry[1],
            "mark": mark,
            "unrealized": mark - entry[1],
        }
    return log


def benchmark_weights(prices, window=None):
    """Dollar-neutral pair: ``+1/pbar_A`` shares of A against ``-1/pbar_B`` of B.

    ``window`` is a slice (or index array) of rows used for the average
    prices; the full sample by default. The short leg is the one giving the
    in-window value the smaller absolute mean, with asset B shorted on ties.
    """
    Y = np.asarray(getattr(prices, "prices", prices), dtype=float)
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise ParameterError("the benchmark needs exactly two assets")
    calib = Y if window is None else Y[window]
    if calib.shape[0] == 0:
        raise DataError("empty calibration window")
    pbar = calib.mean(axis=0)
    if np.any(pbar <= 0):
        raise DataError("average prices must be positive")
    x = np.array([1.0 / pbar[0], -1.0 / pbar[1]])
    x /= np.linalg.norm(x)
    v = calib @ x
    if abs(np.mean(-v)) < abs(np.mean(v)) - 1e-12 * max(1.0, abs(np.mean(v))):
        x = -x
    return x


def threshold_portfolio_filter(x, tau):
    """Keep assets with ``|x_i| >= tau`` and renormalise to unit norm.

    Returns ``(indices, weights)``.
    """
    if tau < 0:
        raise ParameterError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    keep = np.nonzero(np.abs(x) >= tau)[0]
    if keep.size == 0 or not np.any(x[keep]):
        raise ThresholdTooHigh(f"no weight reaches the threshold {tau}")
    w = x[keep]
    return keep, w / np.linalg.norm(w)


def assess(values, L=DEFAULT_LAGS, lower=-1.0, upper=1.0):
    """Portmanteau and backtest for one value series.

    A degenerate (constant) series yields ``portmanteau=None`` and a warning
    string instead of raising.
    """
    out = {"portmanteau": None, "warnings": []}
    try:
        out["portmanteau"] = portmanteau(daily_changes(values), L)
    except DegenerateSeries as exc:
        out["warnings"].append(f"degenerate series: {exc}")
    out["backtest"] = threshold_backtest(values, lower, upper)
    return out


# -- Monte Carlo ------------------------------------------------------------


def monte_carlo_report(run_factory, n_runs=50, seed=0):
    """Run ``run_factory(seed_sequence)`` ``n_runs`` times and aggregate.

    Each call gets its own child ``SeedSequence`` spawned from ``seed`` and
    must return a mapping with at least ``p_value`` and ``revenue``. NaN
    p-values (degenerate runs) are skipped in the p-value statistics.
    """
    if n_runs < 1:
        raise ParameterError("n_runs must be at least 1")
    children = np.random.SeedSequence(seed).spawn(n_runs)
    runs = [run_factory(child) for child in children]
    p = np.array([np.nan if r["p_value"] is None else r["p_value"] for r in runs], dtype=float)
    rev = np.array([r["revenue"] for r in runs], dtype=float)
    finite = p[~np.isnan(p)]
    return {
        "n_runs": n_runs,
        "mean_p": float(finite.mean()) if finite.size else None,
        "std_p": float(finite.std()) if finite.size else None,
        "mean_revenue": float(rev.mean()),
        "std_revenue": float(rev.std()),
        "runs": runs,
    }
