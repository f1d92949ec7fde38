"""Exact Gaussian-process backend with a cross-channel coregionalization kernel.

K((f, c), (f', c')) = rbf(f, f') * B[c, c'] + noise * delta. The channel
covariance B is either identity (channels decouple into independent GPs) or
the shrunk empirical correlation of the per-channel context targets, which is
what lets information flow from one channel's context rows into another
channel's queries. Hyperparameters are fixed; targets are expected to be
standardized upstream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.spatial.distance import cdist
from scipy.stats import norm

from ..rollout import BackendPrediction
from . import (
    BackendCapabilities,
    ContextTooLarge,
    FactorizationFailure,
    RegressorBackend,
)

MAX_CONTEXT_ROWS = 2048  # dense solve budget


@dataclass(frozen=True)
class IcmGpConfig:
    time_lengthscale: float = 10.0  # in running-index units
    channel_correlation: str = "estimated_from_context"
    noise_variance: float = 0.05
    jitter: float = 1e-6

    def __post_init__(self):
        if self.time_lengthscale <= 0 or self.noise_variance <= 0 or self.jitter <= 0:
            raise ValueError("lengthscale, noise variance and jitter must be positive")
        if self.jitter > self.noise_variance:
            raise ValueError("jitter must not exceed the noise variance")
        if self.channel_correlation not in ("estimated_from_context", "identity"):
            raise ValueError(f"unknown channel_correlation {self.channel_correlation!r}")


def estimate_channel_correlation(targets: np.ndarray, indicators: np.ndarray, d: int) -> np.ndarray:
    """Shrunk empirical correlation of per-channel targets aligned by time step.

    Standardizes each channel's target sequence (population sigma, degenerate
    channels clamped), shrinks the correlation toward identity with weight
    0.1, and floors eigenvalues at 1e-6 to stay positive definite.
    """
    series = [targets[indicators == c] for c in range(d)]
    length = min(len(s) for s in series)
    if length < 2:
        return np.eye(d)
    mat = np.column_stack([s[:length] for s in series])
    mu = mat.mean(axis=0)
    sigma = mat.std(axis=0)
    sigma = np.where(sigma > 0.0, sigma, 1.0)
    z = (mat - mu) / sigma
    corr = z.T @ z / length
    np.fill_diagonal(corr, 1.0)
    b = 0.9 * corr + 0.1 * np.eye(d)
    eigvals, eigvecs = np.linalg.eigh(b)
    b = (eigvecs * np.maximum(eigvals, 1e-6)) @ eigvecs.T
    return 0.5 * (b + b.T)


def _rbf(a: np.ndarray, b: np.ndarray, lengthscale: float) -> np.ndarray:
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * lengthscale**2))


def icm_gp_fit_predict(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    config: IcmGpConfig,
    quantile_levels: tuple[float, ...],
    categorical_columns: frozenset[int] = frozenset(),
) -> BackendPrediction:
    """Exact GP posterior mean and Gaussian quantiles for every query row."""
    train_X = np.asarray(train_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    if len(train_X) > MAX_CONTEXT_ROWS:
        raise ContextTooLarge(f"{len(train_X)} context rows exceed {MAX_CONTEXT_ROWS}")
    cat = max(categorical_columns) if categorical_columns else train_X.shape[1] - 1
    numeric = [j for j in range(train_X.shape[1]) if j != cat]
    f_ctx = train_X[:, numeric]
    f_query = test_X[:, numeric]
    ind_ctx = np.round(train_X[:, cat]).astype(int)
    ind_query = np.round(test_X[:, cat]).astype(int)
    d = int(max(ind_ctx.max(), ind_query.max())) + 1

    if config.channel_correlation == "identity":
        b = np.eye(d)
    else:
        b = estimate_channel_correlation(train_y, ind_ctx, d)

    k_cc = _rbf(f_ctx, f_ctx, config.time_lengthscale) * b[np.ix_(ind_ctx, ind_ctx)]
    k_cc[np.diag_indices_from(k_cc)] += config.noise_variance
    k_qc = _rbf(f_query, f_ctx, config.time_lengthscale) * b[np.ix_(ind_query, ind_ctx)]

    factor = None
    for scale in (1.0, 10.0, 100.0):
        try:
            factor = cho_factor(k_cc + scale * config.jitter * np.eye(len(k_cc)), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if factor is None:
        raise FactorizationFailure("kernel matrix is not positive definite after jitter escalation")

    alpha = cho_solve(factor, train_y)
    mean = k_qc @ alpha
    v = solve_triangular(factor[0], k_qc.T, lower=True)
    prior = b[ind_query, ind_query] + config.noise_variance
    var = np.maximum(prior - (v**2).sum(axis=0), 1e-12)
    std = np.sqrt(var)
    offsets = norm.ppf(np.asarray(quantile_levels))
    quants = mean[None, :] + offsets[:, None] * std[None, :]
    return BackendPrediction(mean=mean, quantiles=quants)


class IcmGpBackend(RegressorBackend):
    """RegressorBackend wrapper around the exact coregionalized GP."""

    capabilities = BackendCapabilities(max_context_rows=MAX_CONTEXT_ROWS)
    version = "builtin:icm-gp"

    def __init__(self, config: IcmGpConfig | None = None):
        self.config = config or IcmGpConfig()

    def _fit_predict(self, train_X, train_y, test_X, *, categorical_columns, quantile_levels, seed):
        return icm_gp_fit_predict(
            train_X, train_y, test_X,
            config=self.config,
            quantile_levels=quantile_levels,
            categorical_columns=categorical_columns,
        )
