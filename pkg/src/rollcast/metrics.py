"""Forecast scoring: MASE, weighted quantile loss, and cross-method aggregation.

Both metrics pool all channels of a dataset into a single numerator and
denominator, so a multivariate dataset is scored as one task. Metrics are
always computed on the original scale, after any transform has been inverted.
"""
from __future__ import annotations

from dataclasses import dataclass
from fnmatch import fnmatch

import numpy as np
from scipy.stats import rankdata

from .core import Frequency, RollcastError

DEFAULT_QUANTILE_LEVELS = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1))


class DegenerateDenominator(RollcastError):
    pass


class ZeroDenominator(RollcastError):
    pass


class MissingCell(RollcastError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    seasonality_m: int
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS

    def __post_init__(self):
        if self.seasonality_m < 1:
            raise ValueError("seasonality must be >= 1")
        levels = tuple(float(q) for q in self.quantile_levels)
        object.__setattr__(self, "quantile_levels", levels)
        if any(not 0.0 < q < 1.0 for q in levels) or any(
            a >= b for a, b in zip(levels, levels[1:])
        ):
            raise ValueError("quantile levels must be strictly increasing in (0, 1)")


# Season length per frequency code; overridable via MetricConfig.
_SEASONALITY = {"10S": 360, "5T": 288, "H": 24, "D": 7, "W": 1}


def seasonality_for(freq: Frequency) -> int:
    """Season length in steps for the MASE scaling term."""
    code = freq.code()
    if code in _SEASONALITY:
        return _SEASONALITY[code]
    step = freq.seconds
    if freq.unit == "seconds":
        return max(1, 3600 // step)  # hourly cycle
    if freq.unit == "minutes":
        return max(1, 86400 // step)  # daily cycle
    if freq.unit == "hours":
        return max(1, 24 // freq.multiple)
    if freq.unit == "days":
        return max(1, 7 // freq.multiple)
    return 1


def _as_matrix(values) -> np.ndarray:
    """Coerce to T x d; a 1-D input is a single channel."""
    arr = np.asarray(values, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def mase(
    actual: np.ndarray,
    forecast_mean: np.ndarray,
    history: np.ndarray,
    m: int,
) -> float:
    """Mean absolute error scaled by the in-sample seasonal-naive error.

    actual and forecast_mean are H x d; history is T x d with T > m. The
    numerator and denominator pool all channels. 1.0 means parity with the
    seasonal-naive forecast.
    """
    actual = _as_matrix(actual)
    forecast_mean = _as_matrix(forecast_mean)
    history = _as_matrix(history)
    if actual.shape != forecast_mean.shape:
        raise ValueError("actual and forecast shapes differ")
    t = history.shape[0]
    if t <= m:
        raise ValueError(f"history length {t} must exceed seasonality {m}")
    denom = np.abs(history[m:] - history[:-m]).mean()
    if denom == 0.0:
        raise DegenerateDenominator(f"history is {m}-periodic constant")
    return float(np.abs(actual - forecast_mean).mean() / denom)


def wql(
    actual: np.ndarray,
    quantile_forecasts: np.ndarray,
    levels: tuple[float, ...],
) -> float:
    """Weighted quantile (pinball) loss, normalized by total absolute actuals.

    quantile_forecasts has shape (L, H, d) aligned with levels.
    """
    actual = _as_matrix(actual)
    quants = np.asarray(quantile_forecasts, dtype=np.float64)
    levels_arr = np.asarray(levels, dtype=np.float64)
    if quants.shape != (len(levels_arr),) + actual.shape:
        raise ValueError(
            f"quantile forecasts have shape {quants.shape}, expected "
            f"{(len(levels_arr),) + actual.shape}"
        )
    scale = np.abs(actual).sum()
    if scale == 0.0:
        raise ZeroDenominator("actuals are all zero")
    err = actual[None, :, :] - quants
    q = levels_arr[:, None, None]
    pinball = q * np.maximum(err, 0.0) + (1.0 - q) * np.maximum(-err, 0.0)
    return float(2.0 * pinball.sum() / (len(levels_arr) * scale))


@dataclass(frozen=True)
class MethodSummary:
    method: str
    mean_mase: float
    mean_wql: float
    rank_mase: float
    rank_wql: float
    num_datasets: int


@dataclass(frozen=True)
class AggregateSummary:
    rows: tuple[MethodSummary, ...]
    datasets: tuple[str, ...]
    pooling: str = "pooled-channels"

    def by_method(self, method: str) -> MethodSummary:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)


def aggregate(records, methods=None, exclude: tuple[str, ...] = ()) -> AggregateSummary:
    """Per-method mean MASE/WQL and 1-based average ranks over shared datasets.

    Ties share the mean of their ranks. exclude holds glob patterns of
    dataset_task names to drop (e.g. 'jena_weather*'). Raises MissingCell if
    a method lacks a dataset that another method covers.
    """
    table: dict[tuple[str, str], tuple[float, float]] = {}
    method_names: list[str] = []
    for rec in records:
        if methods is not None and rec.method not in methods:
            continue
        if any(fnmatch(rec.dataset_task, pat) for pat in exclude):
            continue
        key = (rec.dataset_task, rec.method)
        if key in table:
            raise ValueError(f"duplicate record for {key}")
        table[key] = (rec.mase, rec.wql)
        if rec.method not in method_names:
            method_names.append(rec.method)
    if methods is not None:
        method_names = list(methods)
    datasets = sorted({ds for ds, _ in table})
    if not datasets or not method_names:
        return AggregateSummary(rows=(), datasets=())
    for ds in datasets:
        for method in method_names:
            if (ds, method) not in table:
                raise MissingCell(f"method {method!r} has no record for {ds!r}")
    mase_mat = np.array([[table[(ds, m)][0] for m in method_names] for ds in datasets])
    wql_mat = np.array([[table[(ds, m)][1] for m in method_names] for ds in datasets])
    rank_mase = np.vstack([rankdata(row, method="average") for row in mase_mat])
    rank_wql = np.vstack([rankdata(row, method="average") for row in wql_mat])
    rows = tuple(
        MethodSummary(
            method=method,
            mean_mase=float(mase_mat[:, j].mean()),
            mean_wql=float(wql_mat[:, j].mean()),
            rank_mase=float(rank_mase[:, j].mean()),
            rank_wql=float(rank_wql[:, j].mean()),
            num_datasets=len(datasets),
        )
        for j, method in enumerate(method_names)
    )
    return AggregateSummary(rows=rows, datasets=tuple(datasets))
