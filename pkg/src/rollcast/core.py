"""Shared domain types: timestamped multivariate series, forecast tasks and products.

All types are immutable after construction and safe to share across workers.
Timestamps are integer epoch seconds (UTC); sub-second frequencies are not
supported, which keeps grid-spacing checks exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("joint", "autoregressive", "channel_independent")

# Seconds since the Unix epoch, UTC.
TimeStamp = int


class RollcastError(Exception):
    """Base class for all rollcast errors."""


class EmptySeries(RollcastError):
    pass


class NonUniformSpacing(RollcastError):
    pass


class NonFiniteValue(RollcastError):
    def __init__(self, row: int, col: int):
        self.row = int(row)
        self.col = int(col)
        super().__init__(f"non-finite value at row {self.row}, column {self.col}")


_UNIT_SECONDS = {
    "seconds": 1,
    "minutes": 60,
    "hours": 3600,
    "days": 86400,
    "weeks": 604800,
}

_CODE_TO_UNIT = {
    "S": "seconds",
    "T": "minutes",
    "MIN": "minutes",
    "H": "hours",
    "D": "days",
    "W": "weeks",
}

_UNIT_TO_CODE = {
    "seconds": "S",
    "minutes": "T",
    "hours": "H",
    "days": "D",
    "weeks": "W",
}


@dataclass(frozen=True)
class Frequency:
    """Sampling frequency as (unit, multiple), e.g. (seconds, 10) for a 10S grid."""

    unit: str
    multiple: int = 1

    def __post_init__(self):
        if self.unit not in _UNIT_SECONDS:
            raise ValueError(f"unknown frequency unit {self.unit!r}")
        if self.multiple < 1:
            raise ValueError("frequency multiple must be >= 1")

    @property
    def seconds(self) -> int:
        """Grid step in seconds."""
        return _UNIT_SECONDS[self.unit] * self.multiple

    def code(self) -> str:
        """Compact code such as '10S', '5T', 'H', 'D', 'W'."""
        prefix = "" if self.multiple == 1 else str(self.multiple)
        return prefix + _UNIT_TO_CODE[self.unit]

    @classmethod
    def parse(cls, text: str) -> "Frequency":
        """Parse a compact code ('10S', '5T', 'H', 'W', 'min', ...)."""
        s = text.strip().upper()
        i = 0
        while i < len(s) and s[i].isdigit():
            i += 1
        multiple = int(s[:i]) if i else 1
        unit_code = s[i:]
        if unit_code not in _CODE_TO_UNIT:
            raise ValueError(f"cannot parse frequency {text!r}")
        return cls(_CODE_TO_UNIT[unit_code], multiple)


def _lock(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MultivariateSeries:
    """A d-channel series: strictly increasing uniform timestamps and a T x d value matrix."""

    timestamps: np.ndarray
    channels: tuple[str, ...]
    values: np.ndarray
    frequency: Frequency

    def __post_init__(self):
        ts = _lock(np.ascontiguousarray(self.timestamps, dtype=np.int64))
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("values must be a 2-D matrix (T x d)")
        vals = _lock(vals)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if vals.shape != (len(ts), len(self.channels)):
            raise ValueError(
                f"value matrix shape {vals.shape} does not match "
                f"{len(ts)} timestamps x {len(self.channels)} channels"
            )

    @property
    def num_steps(self) -> int:
        return len(self.timestamps)

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def channel(self, index: int) -> "MultivariateSeries":
        """Single-channel slice, preserving timestamps and frequency."""
        return MultivariateSeries(
            timestamps=self.timestamps,
            channels=(self.channels[index],),
            values=self.values[:, [index]],
            frequency=self.frequency,
        )

    def tail(self, steps: int) -> "MultivariateSeries":
        """The most recent `steps` complete time steps."""
        if steps >= self.num_steps:
            return self
        return MultivariateSeries(
            timestamps=self.timestamps[-steps:],
            channels=self.channels,
            values=self.values[-steps:],
            frequency=self.frequency,
        )


def validate_series(raw: MultivariateSeries) -> MultivariateSeries:
    """Check series invariants and return the series unchanged if they hold.

    Idempotent: a validated series passes again and is returned bit-identically.
    Raises EmptySeries, NonFiniteValue (with the first offending location in
    row-major order), or NonUniformSpacing.
    """
    if raw.num_steps < 1 or raw.num_channels < 1:
        raise EmptySeries(f"series has {raw.num_steps} steps, {raw.num_channels} channels")
    finite = np.isfinite(raw.values)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise NonFiniteValue(row, col)
    step = raw.frequency.seconds
    diffs = np.diff(raw.timestamps)
    bad = np.nonzero(diffs != step)[0]
    if bad.size:
        k = int(bad[0])
        raise NonUniformSpacing(
            f"spacing {int(diffs[k])}s between timestamps {k} and {k + 1}, "
            f"expected {step}s for frequency {raw.frequency.code()}"
        )
    return raw


@dataclass(frozen=True)
class ForecastTask:
    """One forecasting problem: history, horizon length, quantile levels and mode."""

    history: MultivariateSeries
    horizon: int
    quantile_levels: tuple[float, ...] = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1))
    mode: str = "joint"
    context_limit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "quantile_levels", tuple(float(q) for q in self.quantile_levels))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        levels = self.quantile_levels
        if any(not (0.0 < q < 1.0) for q in levels):
            raise ValueError("quantile levels must lie in (0, 1)")
        if any(a >= b for a, b in zip(levels, levels[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        if self.context_limit is not None and self.context_limit < 1:
            raise ValueError("context_limit must be positive")

    def horizon_timestamps(self) -> np.ndarray:
        last = int(self.history.timestamps[-1])
        step = self.history.frequency.seconds
        return np.arange(1, self.horizon + 1, dtype=np.int64) * step + last


@dataclass(frozen=True, eq=False)
class QuantileForecast:
    """Per-channel, per-step forecast: mean plus one H x d matrix per quantile level.

    Within every (step, channel) cell the quantile values are non-decreasing in
    the level; producers enforce this by per-cell sorting before construction.
    """

    channels: tuple[str, ...]
    horizon_timestamps: np.ndarray
    mean: np.ndarray
    quantile_levels: tuple[float, ...]
    quantiles: np.ndarray  # shape (L, H, d), aligned with quantile_levels

    def __post_init__(self):
        ts = _lock(np.ascontiguousarray(self.horizon_timestamps, dtype=np.int64))
        mean = _lock(np.ascontiguousarray(self.mean, dtype=np.float64))
        quants = _lock(np.ascontiguousarray(self.quantiles, dtype=np.float64))
        object.__setattr__(self, "horizon_timestamps", ts)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "quantiles", quants)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "quantile_levels", tuple(float(q) for q in self.quantile_levels))
        h, d = len(ts), len(self.channels)
        if mean.shape != (h, d):
            raise ValueError(f"mean has shape {mean.shape}, expected {(h, d)}")
        if quants.shape != (len(self.quantile_levels), h, d):
            raise ValueError(
                f"quantiles have shape {quants.shape}, expected "
                f"{(len(self.quantile_levels), h, d)}"
            )
        if not (np.isfinite(mean).all() and np.isfinite(quants).all()):
            raise ValueError("forecast contains non-finite values")
        if len(self.quantile_levels) > 1 and (np.diff(quants, axis=0) < 0).any():
            raise ValueError("quantile values must be non-decreasing in the level")

    def quantile(self, level: float) -> np.ndarray:
        """The H x d matrix for one quantile level."""
        idx = self.quantile_levels.index(float(level))
        return self.quantiles[idx]
