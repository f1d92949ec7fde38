"""Temporal feature generation for grid timestamps.

Each timestamp maps to a fixed-width vector: an optional running index
(column 0) followed by calendar components, either raw or sine/cosine
encoded. Calendar arithmetic is proleptic Gregorian in UTC with no leap
seconds, so vectors are reproducible across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import Frequency, RollcastError, TimeStamp

CALENDAR_COMPONENTS = (
    "second_of_minute",
    "minute_of_hour",
    "hour_of_day",
    "day_of_week",
    "day_of_year",
    "week_of_year",
)

# Component periods used by the sine/cosine encoding.
_PERIODS = {
    "second_of_minute": 60,
    "minute_of_hour": 60,
    "hour_of_day": 24,
    "day_of_week": 7,
    "day_of_year": 366,
    "week_of_year": 53,
}


class OffGridTimestamp(RollcastError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    """Which temporal features to emit, in a fixed column order."""

    use_running_index: bool = True
    calendar_components: tuple[str, ...] = ()
    encoding: str = "sine_cosine"

    def __post_init__(self):
        object.__setattr__(self, "calendar_components", tuple(self.calendar_components))
        unknown = [c for c in self.calendar_components if c not in CALENDAR_COMPONENTS]
        if unknown:
            raise ValueError(f"unknown calendar components: {unknown}")
        if self.encoding not in ("raw", "sine_cosine"):
            raise ValueError(f"encoding must be 'raw' or 'sine_cosine', got {self.encoding!r}")
        if not self.use_running_index and not self.calendar_components:
            raise ValueError("spec must include a running index or calendar components")

    @property
    def column_names(self) -> tuple[str, ...]:
        names: list[str] = []
        if self.use_running_index:
            names.append("running_index")
        for comp in self.calendar_components:
            if self.encoding == "sine_cosine":
                names.extend((f"{comp}_sin", f"{comp}_cos"))
            else:
                names.append(comp)
        return tuple(names)

    @property
    def width(self) -> int:
        return len(self.column_names)

    def to_dict(self) -> dict:
        return {
            "use_running_index": self.use_running_index,
            "calendar_components": list(self.calendar_components),
            "encoding": self.encoding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(
            use_running_index=bool(d.get("use_running_index", True)),
            calendar_components=tuple(d.get("calendar_components", ())),
            encoding=str(d.get("encoding", "sine_cosine")),
        )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    column_names: tuple[str, ...]


def default_spec_for(freq: Frequency) -> FeatureSpec:
    """Default feature set matched to the sampling granularity."""
    if freq.unit in ("seconds", "minutes"):
        components = ("minute_of_hour", "hour_of_day", "day_of_week")
    elif freq.unit == "hours":
        components = ("hour_of_day", "day_of_week", "day_of_year")
    elif freq.unit == "days":
        components = ("day_of_week", "day_of_year")
    else:  # weeks
        components = ("week_of_year",)
    return FeatureSpec(use_running_index=True, calendar_components=components)


def _component_values(timestamps: np.ndarray, component: str) -> np.ndarray:
    idx = pd.to_datetime(timestamps, unit="s", utc=True)
    if component == "second_of_minute":
        return idx.second.to_numpy(dtype=np.float64)
    if component == "minute_of_hour":
        return idx.minute.to_numpy(dtype=np.float64)
    if component == "hour_of_day":
        return idx.hour.to_numpy(dtype=np.float64)
    if component == "day_of_week":
        return idx.dayofweek.to_numpy(dtype=np.float64)
    if component == "day_of_year":
        return idx.dayofyear.to_numpy(dtype=np.float64)
    if component == "week_of_year":
        return idx.isocalendar().week.to_numpy(dtype=np.float64)
    raise ValueError(f"unknown component {component!r}")


def feature_matrix(
    timestamps: np.ndarray,
    origin: TimeStamp,
    freq: Frequency,
    spec: FeatureSpec,
) -> np.ndarray:
    """Feature vectors for an array of grid timestamps, one row per timestamp."""
    ts = np.ascontiguousarray(timestamps, dtype=np.int64)
    step = freq.seconds
    off = np.nonzero((ts - origin) % step)[0]
    if off.size:
        k = int(off[0])
        raise OffGridTimestamp(
            f"timestamp {int(ts[k])} is off the grid (origin {int(origin)}, step {step}s)"
        )
    cols: list[np.ndarray] = []
    if spec.use_running_index:
        cols.append(((ts - origin) // step).astype(np.float64))
    for comp in spec.calendar_components:
        vals = _component_values(ts, comp)
        if spec.encoding == "sine_cosine":
            phase = 2.0 * np.pi * vals / _PERIODS[comp]
            cols.append(np.sin(phase))
            cols.append(np.cos(phase))
        else:
            cols.append(vals)
    return np.column_stack(cols)


def featurize(ts: TimeStamp, origin: TimeStamp, freq: Frequency, spec: FeatureSpec) -> FeatureVector:
    """Feature vector for a single grid timestamp."""
    mat = feature_matrix(np.array([ts], dtype=np.int64), origin, freq, spec)
    return FeatureVector(values=mat[0], column_names=spec.column_names)
