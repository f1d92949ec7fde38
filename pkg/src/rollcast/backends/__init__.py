"""Pluggable tabular regressor backends.

Every backend satisfies one contract: a single stateless fit-predict over a
context table, returning a mean and the requested quantiles for every query
row. All conditioning data arrives in the context; nothing persists across
calls. Built-in desk-scale backends live in builtin/gp; the external client
bridges to a served model over a line protocol.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..core import RollcastError
from ..rollout import BackendPrediction


class ContextTooLarge(RollcastError):
    pass


class BackendUnavailable(RollcastError):
    pass


class MalformedResponse(RollcastError):
    pass


class BackendTimeout(RollcastError):
    pass


class RemoteModelError(RollcastError):
    """The served model reported an error for this request."""


class FactorizationFailure(RollcastError):
    pass


@dataclass(frozen=True)
class BackendCapabilities:
    supports_quantiles: bool = True
    max_context_rows: int | None = None
    deterministic_given_seed: bool = True


class RegressorBackend(ABC):
    """Single fit-predict with quantile outputs over a rolled table."""

    capabilities: BackendCapabilities = BackendCapabilities()
    version: str = "builtin"

    def fit_predict(
        self,
        train_X: np.ndarray,
        train_y: np.ndarray,
        test_X: np.ndarray,
        *,
        categorical_columns: frozenset[int] = frozenset(),
        quantile_levels: tuple[float, ...],
        seed: int = 0,
    ) -> BackendPrediction:
        train_X = np.asarray(train_X, dtype=np.float64)
        train_y = np.asarray(train_y, dtype=np.float64)
        test_X = np.asarray(test_X, dtype=np.float64)
        if train_X.shape[0] != train_y.shape[0]:
            raise ValueError("context features and targets disagree in length")
        if train_X.shape[0] < 2:
            raise ValueError("need at least 2 context rows")
        if train_X.shape[1] != test_X.shape[1]:
            raise ValueError(
                f"feature width mismatch: context {train_X.shape[1]}, query {test_X.shape[1]}"
            )
        cap = self.capabilities.max_context_rows
        if cap is not None and train_X.shape[0] > cap:
            raise ContextTooLarge(f"{train_X.shape[0]} context rows exceed limit {cap}")
        return self._fit_predict(
            train_X, train_y, test_X,
            categorical_columns=categorical_columns,
            quantile_levels=tuple(float(q) for q in quantile_levels),
            seed=seed,
        )

    @abstractmethod
    def _fit_predict(
        self,
        train_X: np.ndarray,
        train_y: np.ndarray,
        test_X: np.ndarray,
        *,
        categorical_columns: frozenset[int],
        quantile_levels: tuple[float, ...],
        seed: int,
    ) -> BackendPrediction:
        ...


def one_hot_expand(
    train_X: np.ndarray,
    test_X: np.ndarray,
    categorical_columns: frozenset[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Replace each categorical column with one indicator column per context category.

    Categories unseen in the context map to all-zero indicators.
    """
    if not categorical_columns:
        return train_X, test_X
    keep = [j for j in range(train_X.shape[1]) if j not in categorical_columns]
    train_cols = [train_X[:, keep]]
    test_cols = [test_X[:, keep]]
    for j in sorted(categorical_columns):
        cats = np.unique(train_X[:, j])
        train_cols.append((train_X[:, j][:, None] == cats[None, :]).astype(np.float64))
        test_cols.append((test_X[:, j][:, None] == cats[None, :]).astype(np.float64))
    return np.column_stack(train_cols), np.column_stack(test_cols)


def make_backend(spec: str, *, season_length: int = 1):
    """Instantiate a backend from a CLI spec string.

    Specs: 'seasonal-naive', 'knn', 'ridge', 'icm-gp' (with optional
    key=value options after a colon, e.g. 'icm-gp:corr=identity'), and
    'extern:<command or host:port>'.
    """
    from .builtin import KnnBackend, RidgeBackend, SeasonalNaiveBackend
    from .external import ExternalBackend
    from .gp import IcmGpBackend, IcmGpConfig

    if spec.startswith("extern:"):
        return ExternalBackend(spec[len("extern:"):])
    name, _, opts_text = spec.partition(":")
    opts: dict[str, str] = {}
    if opts_text:
        for item in opts_text.split(","):
            key, _, value = item.partition("=")
            opts[key.strip()] = value.strip()
    if name == "seasonal-naive":
        return SeasonalNaiveBackend(season_length=int(opts.get("m", season_length)))
    if name == "knn":
        k = opts.get("k")
        return KnnBackend(k=int(k) if k else None)
    if name == "ridge":
        return RidgeBackend(lam=float(opts.get("lam", 1e-3)))
    if name == "icm-gp":
        config = IcmGpConfig(
            time_lengthscale=float(opts.get("lengthscale", 10.0)),
            channel_correlation=opts.get("corr", "estimated_from_context"),
            noise_variance=float(opts.get("noise", 0.05)),
        )
        return IcmGpBackend(config)
    raise ValueError(f"unknown backend spec {spec!r}")
