"""Model registry for the bridge.

Every entry exposes fit_predict(train_X, train_y, test_X, categorical_cols,
quantile_levels, seed) -> (mean, quantiles) with quantiles shaped
(levels, rows). A pre-trained tabular foundation model is used when its
package is importable; otherwise desk-scale scikit-learn regressors stand in.
Models without a native predictive distribution replicate their point
prediction across levels, with a logged warning.
"""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger("pfn_bridge")


def one_hot(train_X, test_X, categorical_cols):
    """Expand categorical columns to context-category indicators."""
    cats = sorted(set(int(c) for c in categorical_cols))
    if not cats:
        return train_X, test_X
    keep = [j for j in range(train_X.shape[1]) if j not in cats]
    tr, te = [train_X[:, keep]], [test_X[:, keep]]
    for j in cats:
        values = np.unique(train_X[:, j])
        tr.append((train_X[:, j][:, None] == values[None, :]).astype(float))
        te.append((test_X[:, j][:, None] == values[None, :]).astype(float))
    return np.column_stack(tr), np.column_stack(te)


class RandomForestModel:
    """Quantiles from the per-tree prediction distribution."""

    name = "random-forest"

    def __init__(self, n_estimators: int = 200):
        self.n_estimators = n_estimators

    @property
    def version(self) -> str:
        import sklearn

        return f"sklearn-{sklearn.__version__}"

    def fit_predict(self, train_X, train_y, test_X, categorical_cols, quantile_levels, seed):
        from sklearn.ensemble import RandomForestRegressor

        tr, te = one_hot(train_X, test_X, categorical_cols)
        model = RandomForestRegressor(n_estimators=self.n_estimators, random_state=seed)
        model.fit(tr, train_y)
        per_tree = np.stack([tree.predict(te) for tree in model.estimators_])
        mean = per_tree.mean(axis=0)
        quants = np.quantile(per_tree, quantile_levels, axis=0)
        return mean, quants


class RidgePointModel:
    """Point prediction replicated across quantile levels."""

    name = "ridge-point"

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha
        self._warned = False

    @property
    def version(self) -> str:
        import sklearn

        return f"sklearn-{sklearn.__version__}"

    def fit_predict(self, train_X, train_y, test_X, categorical_cols, quantile_levels, seed):
        from sklearn.linear_model import Ridge

        if not self._warned:
            log.warning("ridge-point has no predictive distribution; replicating the mean across quantiles")
            self._warned = True
        tr, te = one_hot(train_X, test_X, categorical_cols)
        model = Ridge(alpha=self.alpha)
        model.fit(tr, train_y)
        mean = model.predict(te)
        return mean, np.tile(mean, (len(quantile_levels), 1))


class TabPFNModel:
    """Pre-trained tabular foundation model, when the package is installed."""

    name = "tabpfn"

    def __init__(self, device: str = "cpu"):
        import tabpfn

        self._tabpfn = tabpfn
        self.device = device

    @property
    def version(self) -> str:
        return f"tabpfn-{getattr(self._tabpfn, '__version__', '?')}"

    def fit_predict(self, train_X, train_y, test_X, categorical_cols, quantile_levels, seed):
        model = self._tabpfn.TabPFNRegressor(device=self.device, random_state=seed)
        model.fit(train_X, train_y)
        out = model.predict(test_X, output_type="full")
        mean = np.asarray(out["mean"])
        criterion = out.get("criterion")
        logits = out.get("logits")
        if criterion is not None and logits is not None:
            quants = np.stack(
                [np.asarray(criterion.icdf(logits, q)) for q in quantile_levels]
            )
        else:
            log.warning("served model returned no distribution; replicating the mean")
            quants = np.tile(mean, (len(quantile_levels), 1))
        return mean, quants


def build_model(name: str, device: str = "cpu"):
    """Resolve a model name; 'auto' prefers the foundation model, else forest."""
    if name in ("auto", "tabpfn"):
        try:
            return TabPFNModel(device=device)
        except ImportError:
            if name == "tabpfn":
                raise
            log.warning("tabpfn not importable; falling back to random-forest")
            return RandomForestModel()
    if name in ("rf", "random-forest"):
        return RandomForestModel()
    if name in ("ridge", "ridge-point"):
        return RidgePointModel()
    raise ValueError(f"unknown model {name!r}")
