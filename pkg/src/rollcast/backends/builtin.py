"""Desk-scale built-in backends: seasonal-naive, k-NN quantiles, ridge.

All three are pure functions of (inputs, seed) and are invariant to appended
constant feature columns, which is what makes the d=1 mode degeneracy exact.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm

from ..rollout import BackendPrediction
from . import RegressorBackend, one_hot_expand


class SeasonalNaiveBackend(RegressorBackend):
    """Repeat the value one season back, per channel.

    Reads the running index from feature column 0 and the channel from the
    categorical indicator column; the default feature specs provide both.
    Queries beyond one season past the context recurse modularly into the
    last observed season. Every quantile level equals the mean.
    """

    version = "builtin:seasonal-naive"

    def __init__(self, season_length: int = 1):
        if season_length < 1:
            raise ValueError("season_length must be >= 1")
        self.season_length = season_length

    def _fit_predict(self, train_X, train_y, test_X, *, categorical_columns, quantile_levels, seed):
        cat = max(categorical_columns) if categorical_columns else train_X.shape[1] - 1
        m = self.season_length
        lookup: dict[tuple[int, int], float] = {}
        last_index: dict[int, int] = {}
        for x, y in zip(train_X, train_y):
            r, c = int(round(x[0])), int(round(x[cat]))
            lookup[(r, c)] = float(y)
            last_index[c] = max(last_index.get(c, r), r)
        mean = np.empty(len(test_X))
        for i, x in enumerate(test_X):
            r, c = int(round(x[0])), int(round(x[cat]))
            end = last_index.get(c)
            if end is None:  # unseen channel: global last value
                end = max(last_index.values())
                c = max(last_index, key=last_index.get)
            k = max(1, math.ceil((r - end) / m))
            idx = r - k * m
            mean[i] = lookup.get((idx, c), lookup[(end, c)])
        quants = np.tile(mean, (len(quantile_levels), 1))
        return BackendPrediction(mean=mean, quantiles=quants)


class KnnBackend(RegressorBackend):
    """k nearest neighbors with empirical neighbor quantiles.

    The categorical indicator is one-hot expanded before the Euclidean
    distance. k defaults to min(20, ceil(sqrt(context rows))). Ties in
    distance are broken by context row order, keeping results deterministic.
    """

    version = "builtin:knn"

    def __init__(self, k: int | None = None):
        self.k = k

    def _fit_predict(self, train_X, train_y, test_X, *, categorical_columns, quantile_levels, seed):
        ctx, query = one_hot_expand(train_X, test_X, categorical_columns)
        n = len(ctx)
        k = self.k if self.k is not None else min(20, math.ceil(math.sqrt(n)))
        k = min(k, n)
        levels = np.asarray(quantile_levels)
        mean = np.empty(len(query))
        quants = np.empty((len(levels), len(query)))
        for i, q in enumerate(query):
            dist = np.sqrt(((ctx - q) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            targets = train_y[nearest]
            mean[i] = targets.mean()
            quants[:, i] = np.quantile(targets, levels)
        return BackendPrediction(mean=mean, quantiles=quants)


class RidgeBackend(RegressorBackend):
    """Centered ridge regression with Gaussian residual quantiles.

    Centering absorbs constant columns exactly (they become zero columns and
    get zero weight), and lam=0 falls back to a least-squares solve, so
    exactly-linear targets are recovered to machine precision.
    """

    version = "builtin:ridge"

    def __init__(self, lam: float = 1e-3):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = lam

    def _fit_predict(self, train_X, train_y, test_X, *, categorical_columns, quantile_levels, seed):
        ctx, query = one_hot_expand(train_X, test_X, categorical_columns)
        x_mean = ctx.mean(axis=0)
        y_mean = train_y.mean()
        xc = ctx - x_mean
        yc = train_y - y_mean
        if self.lam == 0.0:
            w = np.linalg.lstsq(xc, yc, rcond=None)[0]
        else:
            gram = xc.T @ xc + self.lam * np.eye(xc.shape[1])
            w = np.linalg.solve(gram, xc.T @ yc)
        resid = yc - xc @ w
        sigma = float(np.sqrt((resid ** 2).mean()))
        # Per-row dot products keep joint and row-at-a-time calls bit-identical.
        mean = np.array([float((x - x_mean) @ w) + y_mean for x in query])
        offsets = norm.ppf(np.asarray(quantile_levels)) * sigma
        quants = mean[None, :] + offsets[:, None]
        return BackendPrediction(mean=mean, quantiles=quants)
