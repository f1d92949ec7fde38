"""Serialize a d-channel series into single-target tabular regression rows.

A T x d series becomes T*d rows of (temporal features, channel indicator,
value) in time-major order, expanding the table by a factor of d. Backend
predictions over the horizon query block are scattered back into a
QuantileForecast by the inverse mapping.

The channel indicator is an integer category occupying the last feature
column; its position is fixed for a whole run and is never permuted or
ensembled here (backends may ensemble internally).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ForecastTask,
    MultivariateSeries,
    QuantileForecast,
    RollcastError,
)
from .featurize import FeatureSpec, feature_matrix


class LengthMismatch(RollcastError):
    pass


class ContextTooSmall(RollcastError):
    pass


@dataclass(frozen=True)
class RolledRow:
    """One serialized observation; target is None for query (horizon) rows."""

    features: np.ndarray
    channel_indicator: int
    target: float | None


@dataclass(frozen=True)
class BackendPrediction:
    """Raw backend output, one entry per query row.

    mean has shape (n,); quantiles has shape (L, n) aligned with the
    quantile levels the backend was asked for.
    """

    mean: np.ndarray
    quantiles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "quantiles", np.asarray(self.quantiles, dtype=np.float64))


@dataclass(frozen=True)
class RolledTable:
    """Context and query rows of one tabular regression problem.

    Rows are time-major: all channels of step 0, then step 1, and so on.
    The indicator column sits last in the materialized feature matrix and is
    the only categorical column.
    """

    context_rows: tuple[RolledRow, ...]
    query_rows: tuple[RolledRow, ...]
    feature_names: tuple[str, ...]
    num_channels: int
    row_order: str = "time_major"

    @property
    def categorical_columns(self) -> frozenset[int]:
        return frozenset({len(self.feature_names) - 1})

    def _matrix(self, rows: tuple[RolledRow, ...]) -> np.ndarray:
        feats = np.stack([r.features for r in rows])
        indicator = np.array([r.channel_indicator for r in rows], dtype=np.float64)
        return np.column_stack([feats, indicator])

    def context_matrix(self) -> np.ndarray:
        return self._matrix(self.context_rows)

    def context_targets(self) -> np.ndarray:
        return np.array([r.target for r in self.context_rows], dtype=np.float64)

    def query_matrix(self) -> np.ndarray:
        return self._matrix(self.query_rows)


def roll(series: MultivariateSeries, spec: FeatureSpec) -> list[RolledRow]:
    """Serialize a validated series into T*d context rows, time-major."""
    origin = int(series.timestamps[0])
    feats = feature_matrix(series.timestamps, origin, series.frequency, spec)
    rows: list[RolledRow] = []
    for t in range(series.num_steps):
        for c in range(series.num_channels):
            rows.append(
                RolledRow(
                    features=feats[t],
                    channel_indicator=c,
                    target=float(series.values[t, c]),
                )
            )
    return rows


def truncate_history(series: MultivariateSeries, context_limit: int | None) -> MultivariateSeries:
    """Keep the most recent complete time steps so that rolled rows <= context_limit.

    Never drops individual channels: every retained step contributes d rows.
    """
    if context_limit is None:
        return series
    steps = context_limit // series.num_channels
    if steps < 2:
        raise ContextTooSmall(
            f"context limit {context_limit} leaves {steps} time steps "
            f"for {series.num_channels} channels"
        )
    return series.tail(steps)


def _query_rows(
    task: ForecastTask,
    history: MultivariateSeries,
    spec: FeatureSpec,
    channels: range,
) -> list[RolledRow]:
    origin = int(history.timestamps[0])
    feats = feature_matrix(task.horizon_timestamps(), origin, history.frequency, spec)
    rows: list[RolledRow] = []
    for h in range(task.horizon):
        for c in channels:
            rows.append(RolledRow(features=feats[h], channel_indicator=c, target=None))
    return rows


def build_task_tables(task: ForecastTask, spec: FeatureSpec) -> list[RolledTable]:
    """Context/query tables for a task.

    Joint and autoregressive modes produce a single table whose query block
    covers every (horizon step, channel) pair. Channel-independent mode
    produces d single-channel tables, reproducing the univariate baseline.
    Truncation (context_limit, counted in rolled rows) keeps the most recent
    floor(limit / d) complete time steps in every mode, so all modes see the
    same number of past steps per variate.
    """
    history = truncate_history(task.history, task.context_limit)
    names = spec.column_names + ("channel",)
    if task.mode == "channel_independent":
        tables = []
        for c in range(history.num_channels):
            sub = history.channel(c)
            tables.append(
                RolledTable(
                    context_rows=tuple(roll(sub, spec)),
                    query_rows=tuple(_query_rows(task, sub, spec, range(1))),
                    feature_names=names,
                    num_channels=1,
                )
            )
        return tables
    table = RolledTable(
        context_rows=tuple(roll(history, spec)),
        query_rows=tuple(_query_rows(task, history, spec, range(history.num_channels))),
        feature_names=names,
        num_channels=history.num_channels,
    )
    return [table]


def _sorted_quantiles(quantiles: np.ndarray) -> np.ndarray:
    """Resolve quantile crossing by per-cell sorting across levels."""
    return np.sort(quantiles, axis=0)


def unroll(pred, table: RolledTable, task: ForecastTask) -> QuantileForecast:
    """Scatter query-row predictions back into an H x d forecast.

    Inverse of the query-block construction: row i maps to horizon step
    i // d and channel i % d. Quantile crossing is resolved per cell.
    """
    h, d = task.horizon, table.num_channels
    n = h * d
    mean = np.asarray(pred.mean, dtype=np.float64)
    if mean.shape != (n,):
        raise LengthMismatch(f"expected {n} mean values, got {mean.shape}")
    quants = np.asarray(pred.quantiles, dtype=np.float64)
    levels = task.quantile_levels
    if quants.shape != (len(levels), n):
        raise LengthMismatch(
            f"expected quantiles of shape {(len(levels), n)}, got {quants.shape}"
        )
    return QuantileForecast(
        channels=task.history.channels[:d] if d > 1 else task.history.channels[:1],
        horizon_timestamps=task.horizon_timestamps(),
        mean=mean.reshape(h, d),
        quantile_levels=levels,
        quantiles=_sorted_quantiles(quants.reshape(len(levels), h, d)),
    )


def predict_joint(task: ForecastTask, backend, spec: FeatureSpec, seed: int = 0) -> QuantileForecast:
    """One fit-predict call over the full rolled table; all H*d cells at once."""
    (table,) = build_task_tables(
        ForecastTask(
            history=task.history,
            horizon=task.horizon,
            quantile_levels=task.quantile_levels,
            mode="joint",
            context_limit=task.context_limit,
        ),
        spec,
    )
    pred = backend.fit_predict(
        table.context_matrix(),
        table.context_targets(),
        table.query_matrix(),
        categorical_columns=table.categorical_columns,
        quantile_levels=task.quantile_levels,
        seed=seed,
    )
    return unroll(pred, table, task)


def predict_channel_independent(
    task: ForecastTask, backend, spec: FeatureSpec, seed: int = 0
) -> QuantileForecast:
    """One fit-predict call per channel on its single-channel table."""
    tables = build_task_tables(
        ForecastTask(
            history=task.history,
            horizon=task.horizon,
            quantile_levels=task.quantile_levels,
            mode="channel_independent",
            context_limit=task.context_limit,
        ),
        spec,
    )
    h, d = task.horizon, len(tables)
    levels = task.quantile_levels
    mean = np.empty((h, d))
    quants = np.empty((len(levels), h, d))
    for c, table in enumerate(tables):
        pred = backend.fit_predict(
            table.context_matrix(),
            table.context_targets(),
            table.query_matrix(),
            categorical_columns=table.categorical_columns,
            quantile_levels=levels,
            seed=seed,
        )
        m = np.asarray(pred.mean, dtype=np.float64)
        q = np.asarray(pred.quantiles, dtype=np.float64)
        if m.shape != (h,) or q.shape != (len(levels), h):
            raise LengthMismatch(f"channel {c}: backend returned wrong prediction shape")
        mean[:, c] = m
        quants[:, :, c] = q
    return QuantileForecast(
        channels=task.history.channels,
        horizon_timestamps=task.horizon_timestamps(),
        mean=mean,
        quantile_levels=levels,
        quantiles=_sorted_quantiles(quants),
    )


def predict_autoregressive(
    task: ForecastTask,
    backend,
    spec: FeatureSpec,
    channel_order: tuple[int, ...] | None = None,
    seed: int = 0,
) -> QuantileForecast:
    """Predict cells sequentially, conditioning later channels on earlier ones.

    Within a horizon step, channels are predicted in channel_order; after each
    prediction a pseudo-observation (features of that step, the channel
    indicator, the predicted mean) is appended to the context before the next
    channel. The appended rows carry current-step cross-channel information
    only: at the start of each step the context resets to the true history, so
    for d=1 this mode degenerates exactly to the joint prediction.
    """
    (table,) = build_task_tables(
        ForecastTask(
            history=task.history,
            horizon=task.horizon,
            quantile_levels=task.quantile_levels,
            mode="joint",
            context_limit=task.context_limit,
        ),
        spec,
    )
    d = table.num_channels
    order = tuple(channel_order) if channel_order is not None else tuple(range(d))
    if sorted(order) != list(range(d)):
        raise ValueError(f"channel_order must be a permutation of 0..{d - 1}")
    h = task.horizon
    levels = task.quantile_levels
    base_X = table.context_matrix()
    base_y = table.context_targets()
    query_X = table.query_matrix()
    mean = np.empty((h, d))
    quants = np.empty((len(levels), h, d))
    for step in range(h):
        step_X: list[np.ndarray] = []
        step_y: list[float] = []
        for c in order:
            row = query_X[step * d + c]
            ctx_X = np.vstack([base_X] + step_X) if step_X else base_X
            ctx_y = np.concatenate([base_y, step_y]) if step_y else base_y
            pred = backend.fit_predict(
                ctx_X,
                ctx_y,
                row[None, :],
                categorical_columns=table.categorical_columns,
                quantile_levels=levels,
                seed=seed,
            )
            m = float(np.asarray(pred.mean)[0])
            mean[step, c] = m
            quants[:, step, c] = np.asarray(pred.quantiles)[:, 0]
            step_X.append(row[None, :])
            step_y.append(m)
    return QuantileForecast(
        channels=task.history.channels,
        horizon_timestamps=task.horizon_timestamps(),
        mean=mean,
        quantile_levels=levels,
        quantiles=_sorted_quantiles(quants),
    )


def predict(task: ForecastTask, backend, spec: FeatureSpec, seed: int = 0) -> QuantileForecast:
    """Dispatch on task.mode."""
    if task.mode == "joint":
        return predict_joint(task, backend, spec, seed=seed)
    if task.mode == "channel_independent":
        return predict_channel_independent(task, backend, spec, seed=seed)
    return predict_autoregressive(task, backend, spec, seed=seed)
