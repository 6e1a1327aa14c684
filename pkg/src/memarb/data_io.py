"""Price ingestion, synthetic price generators and report files.

CSV input comes in two layouts, both UTF-8 with a header row:

* long: ``date,ticker,close``, one observation per row;
* wide: ``date,<TICKER>,<TICKER>,...``, one row per date.

Dates are ISO-8601. Rows are aligned on the dates common to every asset and
any date with a missing or empty cell is dropped; nothing is interpolated.
"""

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError


@dataclass
class PriceSeries:
    assets: tuple
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        self.assets = tuple(self.assets)
        self.dates = tuple(self.dates)
        self.prices = np.asarray(self.prices, dtype=float)
        T = len(self.dates)
        if self.prices.shape != (T, len(self.assets)):
            raise DataError(
                f"price matrix {self.prices.shape} does not match "
                f"{T} dates x {len(self.assets)} assets"
            )
        if T and not np.all(np.isfinite(self.prices)):
            raise DataError("prices must be finite")
        if T and np.any(self.prices <= 0):
            raise DataError("prices must be positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")

    @property
    def T(self):
        return self.prices.shape[0]

    @property
    def n(self):
        return self.prices.shape[1]

    def select(self, assets):
        idx = [self.assets.index(a) for a in assets]
        return PriceSeries([self.assets[i] for i in idx], self.dates, self.prices[:, idx])


# -- CSV input --------------------------------------------------------------


def _parse_date(text, lineno):
    try:
        return dt.date.fromisoformat(text.strip()).isoformat()
    except ValueError:
        raise DataError(f"line {lineno}: bad date {text!r}") from None


def _parse_price(text, lineno):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {lineno}: bad price {text!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise DataError(f"line {lineno}: price must be positive and finite, got {text!r}")
    return value


def _read_long(rows):
    table = {}
    for lineno, row in rows:
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
        date = _parse_date(row[0], lineno)
        ticker = row[1].strip()
        if not ticker:
            raise DataError(f"line {lineno}: empty ticker")
        if row[2].strip() == "":
            continue
        series = table.setdefault(ticker, {})
        if date in series:
            raise DataError(f"line {lineno}: duplicate observation for {ticker} on {date}")
        series[date] = _parse_price(row[2], lineno)
    # long files carry no column order, so assets are listed alphabetically
    assets = sorted(table)
    if not assets:
        raise DataError("no observations")
    common = set.intersection(*(set(table[a]) for a in assets))
    dates = sorted(common)
    prices = [[table[a][d] for a in assets] for d in dates]
    return assets, dates, prices


def _read_wide(header, rows):
    assets = [h.strip() for h in header[1:]]
    if not assets or any(not a for a in assets):
        raise DataError("line 1: empty ticker in header")
    if len(set(assets)) != len(assets):
        raise DataError("line 1: duplicate ticker in header")
    by_date = {}
    for lineno, row in rows:
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        date = _parse_date(row[0], lineno)
        if date in by_date:
            raise DataError(f"line {lineno}: duplicate date {date}")
        cells = row[1:]
        if any(c.strip() == "" for c in cells):
            by_date[date] = None
            continue
        by_date[date] = [_parse_price(c, lineno) for c in cells]
    dates = sorted(d for d, v in by_date.items() if v is not None)
    return assets, dates, [by_date[d] for d in dates]


def load_prices_csv(path):
    """Read a long- or wide-format price CSV into an aligned :class:`PriceSeries`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = [(i, r) for i, r in enumerate(reader, start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    _, header = rows[0]
    cols = [h.strip().lower() for h in header]
    if cols == ["date", "ticker", "close"]:
        assets, dates, prices = _read_long(rows[1:])
    elif cols and cols[0] == "date" and len(cols) >= 2:
        assets, dates, prices = _read_wide(header, rows[1:])
    else:
        raise DataError(f"{path}: line 1: header must start with 'date'")
    if not dates:
        raise DataError(f"{path}: no dates common to all assets")
    return PriceSeries(assets, dates, np.array(prices, dtype=float))


def write_prices_csv(series, path):
    """Write a wide-format CSV (17 significant digits, lossless)."""
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *series.assets])
        for d, row in zip(series.dates, series.prices):
            w.writerow([d, *(repr(float(v)) for v in row)])


# -- synthetic data ---------------------------------------------------------

SYNTHETIC_KINDS = ("white-noise", "ar1", "ou-pair", "cointegrated-pair")


@dataclass
class SyntheticSpec:
    """Parameters of a synthetic price history.

    ``kappa`` is the per-step mean-reversion speed of OU components,
    ``sigma`` the per-step log volatility of random walks and noise,
    ``sigma_z`` the stationary standard deviation of OU log-spreads.
    """

    kind: str = "cointegrated-pair"
    T: int = 2000
    n_assets: int = 2
    kappa: float = 0.1
    sigma: float = 0.01
    sigma_z: float = 0.015
    rho: float = 0.0
    phi: float = 0.6
    beta: float = 1.0
    level: float = 50.0
    drift: float = 0.0
    seed: int = 0
    start: str = "2008-01-02"

    def validate(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ParameterError(f"unknown synthetic kind {self.kind!r}")
        if self.T < 2:
            raise ParameterError("T must be at least 2")
        if self.n_assets < 1:
            raise ParameterError("n_assets must be at least 1")
        if self.kind in ("ou-pair", "cointegrated-pair") and self.n_assets != 2:
            raise ParameterError(f"{self.kind} generates exactly two assets")
        if self.sigma < 0 or self.sigma_z < 0:
            raise ParameterError("volatilities must be nonnegative")
        if not -1.0 < self.phi < 1.0:
            raise ParameterError("AR coefficient must lie in (-1, 1)")
        if not 0.0 < self.kappa <= 1.0:
            raise ParameterError("OU speed must lie in (0, 1]")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError("correlation must lie in [-1, 1]")
        if self.level <= 0 or self.beta <= 0:
            raise ParameterError("level and beta must be positive")


def _ou(rng, T, kappa, std, size=None):
    """Stationary discrete OU (AR(1) with coefficient 1 - kappa) started in equilibrium."""
    a = 1.0 - kappa
    shape = (T,) if size is None else (T, size)
    eps = rng.standard_normal(shape)
    z = np.empty(shape)
    z[0] = std * eps[0]
    innov = std * math.sqrt(1.0 - a * a)
    for t in range(1, T):
        z[t] = a * z[t - 1] + innov * eps[t]
    return z


def _business_days(start, T):
    days = np.busday_offset(np.datetime64(start), np.arange(T), roll="forward")
    return [str(d) for d in days]


def generate_synthetic(spec):
    """Generate a :class:`PriceSeries`; a pure function of ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    T, n = spec.T, spec.n_assets
    if spec.kind == "white-noise":
        logp = spec.sigma * rng.standard_normal((T, n))
    elif spec.kind == "ar1":
        eps = spec.sigma * rng.standard_normal((T, n))
        logp = np.empty((T, n))
        logp[0] = eps[0] / math.sqrt(1.0 - spec.phi ** 2)
        for t in range(1, T):
            logp[t] = spec.phi * logp[t - 1] + eps[t]
    elif spec.kind == "ou-pair":
        z = _ou(rng, T, spec.kappa, 1.0, size=2)
        z[:, 1] = spec.rho * z[:, 0] + math.sqrt(1.0 - spec.rho ** 2) * z[:, 1]
        logp = spec.sigma_z * z
    else:
        steps = (spec.drift - 0.5 * spec.sigma ** 2) + spec.sigma * rng.standard_normal(T)
        steps[0] = 0.0
        log_a = np.cumsum(steps)
        z = _ou(rng, T, spec.kappa, spec.sigma_z)
        logp = np.column_stack([log_a, math.log(spec.beta) + log_a + z])
    prices = spec.level * np.exp(logp)
    names = ["A", "B"] if n == 2 and "pair" in spec.kind else [f"S{i}" for i in range(n)]
    return PriceSeries(names, _business_days(spec.start, T), prices)


def fit_ar1(series):
    """Least-squares AR(1) coefficient (with intercept)."""
    s = np.asarray(series, dtype=float)
    X = np.column_stack([np.ones(s.size - 1), s[:-1]])
    coef, *_ = np.linalg.lstsq(X, s[1:], rcond=None)
    return float(coef[1])


# -- reports ----------------------------------------------------------------

REPORT_KEYS = ("meta", "weights", "losses", "regret", "portmanteau", "backtest", "aggregate")


@dataclass
class RunReport:
    """Serializable run summary; sections left as ``None`` are omitted."""

    meta: dict = field(default_factory=dict)
    weights: list = None
    losses: list = None
    regret: dict = None
    portmanteau: dict = None
    backtest: dict = None
    aggregate: dict = None
    values: list = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        out = {}
        for key in REPORT_KEYS + ("values", "warnings"):
            value = getattr(self, key)
            if value is None or (key == "warnings" and not value):
                continue
            out[key] = _plain(value)
        return out


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _open_for_write(path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc


def dumps_report(report):
    doc = report.to_dict() if hasattr(report, "to_dict") else _plain(report)
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def report_rows(report):
    """Per-round table (round, value, loss, weights) for CSV export."""
    doc = report.to_dict() if hasattr(report, "to_dict") else _plain(report)
    weights = doc.get("weights") or []
    values = doc.get("values") or []
    losses = doc.get("losses") or []
    T = max(len(weights), len(values))
    n = len(weights[0]) if weights else 0
    offset = T - len(losses)
    header = ["round", "value", "loss"] + [f"w{i}" for i in range(n)]
    rows = []
    for t in range(T):
        row = [t]
        row.append(repr(float(values[t])) if t < len(values) else "")
        row.append(repr(float(losses[t - offset])) if t >= offset and losses else "")
        row.extend(repr(float(w)) for w in (weights[t] if t < len(weights) else []))
        rows.append(row)
    return header, rows


def dumps_report_csv(report):
    header, rows = report_rows(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_report(report, path, format="json"):
    """Write a report as JSON (full document) or CSV (per-round table)."""
    if format == "json":
        text = dumps_report(report)
    elif format == "csv":
        text = dumps_report_csv(report)
    else:
        raise ParameterError(f"unknown report format {format!r}")
    with _open_for_write(path) as fh:
        fh.write(text)


def read_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc


def read_weight_history_csv(path):
    """Re-read the weight columns of a CSV report as a ``(T, n)`` array."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [i for i, h in enumerate(header) if h.startswith("w")]
        return np.array([[float(r[i]) for i in cols] for r in reader], dtype=float)
