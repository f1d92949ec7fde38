"""Multivariate time-series forecasting as scalar tabular regression.

A d-channel series is serialized ("rolled out") into a single-target table
with a categorical channel-indicator column, handed to a pluggable tabular
regressor, and the predictions are scattered back into per-channel quantile
forecasts. Includes per-channel scale mitigation, MASE/WQL scoring, synthetic
generators, and a benchmark CLI.
"""
from .core import (
    ForecastTask,
    Frequency,
    MultivariateSeries,
    QuantileForecast,
    RollcastError,
    TimeStamp,
    validate_series,
)
from .featurize import FeatureSpec, FeatureVector, default_spec_for, featurize
from .rollout import (
    BackendPrediction,
    RolledRow,
    RolledTable,
    build_task_tables,
    predict,
    predict_autoregressive,
    predict_channel_independent,
    predict_joint,
    roll,
    unroll,
)
from .transform import ChannelTransformState, fit_transform, inverse

__version__ = "0.1.0"

__all__ = [
    "BackendPrediction",
    "ChannelTransformState",
    "FeatureSpec",
    "FeatureVector",
    "ForecastTask",
    "Frequency",
    "MultivariateSeries",
    "QuantileForecast",
    "RollcastError",
    "RolledRow",
    "RolledTable",
    "TimeStamp",
    "build_task_tables",
    "default_spec_for",
    "featurize",
    "fit_transform",
    "inverse",
    "predict",
    "predict_autoregressive",
    "predict_channel_independent",
    "predict_joint",
    "roll",
    "unroll",
    "validate_series",
]
