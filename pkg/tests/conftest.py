from __future__ import annotations

import numpy as np
import pytest

from rollcast.core import Frequency, MultivariateSeries, validate_series


def make_series(
    values,
    freq: Frequency = Frequency("hours", 1),
    channels=None,
    start: int = 0,
) -> MultivariateSeries:
    vals = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if vals.shape[0] == 1 and np.asarray(values).ndim == 1:
        vals = vals.T
    t, d = vals.shape
    if channels is None:
        channels = tuple(f"ch{i}" for i in range(d))
    ts = start + np.arange(t, dtype=np.int64) * freq.seconds
    return validate_series(
        MultivariateSeries(timestamps=ts, channels=channels, values=vals, frequency=freq)
    )


def random_series(rng: np.random.Generator, t: int, d: int) -> MultivariateSeries:
    return make_series(rng.standard_normal((t, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
