"""Per-channel scale mitigation: z-score standardization and first differencing.

Each channel is transformed independently from its own history, and the exact
inverse is applied to predictions before any metric is computed. Statistics
must be fitted on the context actually shown to the backend (after any
truncation), so the inverse matches what the backend saw.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MultivariateSeries, QuantileForecast, RollcastError

KINDS = ("none", "zscore", "difference")

_ALIASES = {"diff": "difference", "std": "zscore"}


class SeriesTooShort(RollcastError):
    pass


class ChannelCountMismatch(RollcastError):
    pass


def normalize_kind(kind: str) -> str:
    k = _ALIASES.get(kind, kind)
    if k not in KINDS:
        raise ValueError(f"transform kind must be one of {KINDS}, got {kind!r}")
    return k


@dataclass(frozen=True)
class ChannelTransformState:
    """Per-channel parameters needed to invert predictions to the original scale."""

    kind: str
    mu: np.ndarray
    sigma: np.ndarray
    anchor: np.ndarray | None = None  # last history value per channel (difference only)

    @property
    def num_channels(self) -> int:
        return len(self.mu)


def fit_transform(series: MultivariateSeries, kind: str) -> tuple[MultivariateSeries, ChannelTransformState]:
    """Transform every channel independently and return the fitted state.

    zscore uses the population standard deviation (ddof 0); a degenerate
    channel (sigma 0, e.g. constant or single-step history) has sigma clamped
    to 1 so it transforms to zeros and inverts back to the constant.
    difference shortens all channels by one step and records the last history
    value as the anchor for cumulative reconstruction.
    """
    kind = normalize_kind(kind)
    d = series.num_channels
    if kind == "none":
        state = ChannelTransformState(kind="none", mu=np.zeros(d), sigma=np.ones(d))
        return series, state
    if kind == "zscore":
        mu = series.values.mean(axis=0)
        sigma = series.values.std(axis=0)
        sigma = np.where(sigma > 0.0, sigma, 1.0)
        out = MultivariateSeries(
            timestamps=series.timestamps,
            channels=series.channels,
            values=(series.values - mu) / sigma,
            frequency=series.frequency,
        )
        return out, ChannelTransformState(kind="zscore", mu=mu, sigma=sigma)
    if series.num_steps < 2:
        raise SeriesTooShort("differencing needs at least 2 time steps")
    out = MultivariateSeries(
        timestamps=series.timestamps[1:],
        channels=series.channels,
        values=np.diff(series.values, axis=0),
        frequency=series.frequency,
    )
    state = ChannelTransformState(
        kind="difference",
        mu=np.zeros(d),
        sigma=np.ones(d),
        anchor=series.values[-1].copy(),
    )
    return out, state


def inverse(forecast: QuantileForecast, state: ChannelTransformState) -> QuantileForecast:
    """Map a forecast on the transformed scale back to the original scale.

    zscore rescales mean and every quantile matrix elementwise. difference
    cumulates increments along the horizon from the recorded anchor, each
    quantile level independently (a known crudeness: multi-step bands widen).
    """
    if state.kind == "none":
        return forecast
    if forecast.mean.shape[1] != state.num_channels:
        raise ChannelCountMismatch(
            f"forecast has {forecast.mean.shape[1]} channels, state has {state.num_channels}"
        )
    if state.kind == "zscore":
        mean = forecast.mean * state.sigma + state.mu
        quants = forecast.quantiles * state.sigma + state.mu
    else:
        mean = state.anchor + np.cumsum(forecast.mean, axis=0)
        quants = state.anchor + np.cumsum(forecast.quantiles, axis=1)
    return QuantileForecast(
        channels=forecast.channels,
        horizon_timestamps=forecast.horizon_timestamps,
        mean=mean,
        quantile_levels=forecast.quantile_levels,
        quantiles=quants,
    )
