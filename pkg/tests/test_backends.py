import numpy as np
import pytest

from rollcast.backends import make_backend, one_hot_expand
from rollcast.backends.builtin import KnnBackend, RidgeBackend, SeasonalNaiveBackend
from rollcast.backends.gp import IcmGpBackend
from rollcast.core import ForecastTask, Frequency
from rollcast.featurize import default_spec_for
from rollcast.rollout import build_task_tables

from conftest import make_series

HOURLY = Frequency("hours", 1)
SPEC = default_spec_for(HOURLY)
LEVELS = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1))


def table_for(values, horizon=4, levels=LEVELS, **kwargs):
    s = make_series(values, **kwargs)
    task = ForecastTask(history=s, horizon=horizon, quantile_levels=levels)
    (table,) = build_task_tables(task, SPEC)
    return table


def run_backend(backend, table, levels=LEVELS, seed=0):
    return backend.fit_predict(
        table.context_matrix(),
        table.context_targets(),
        table.query_matrix(),
        categorical_columns=table.categorical_columns,
        quantile_levels=levels,
        seed=seed,
    )


class TestSeasonalNaive:
    def test_repeats_one_season_back(self):
        wave = np.sin(2 * np.pi * np.arange(96) / 24.0)
        table = table_for(wave, horizon=24)
        pred = run_backend(SeasonalNaiveBackend(season_length=24), table)
        np.testing.assert_array_equal(pred.mean, wave[-24:])
        for row in pred.quantiles:
            np.testing.assert_array_equal(row, pred.mean)

    def test_wraps_beyond_one_season(self):
        values = np.arange(6.0)  # season 3: last season is [3, 4, 5]
        table = table_for(values, horizon=5)
        pred = run_backend(SeasonalNaiveBackend(season_length=3), table)
        np.testing.assert_array_equal(pred.mean, [3.0, 4.0, 5.0, 3.0, 4.0])


class TestKnn:
    def test_exact_match_with_k1(self, rng):
        vals = rng.standard_normal((30, 2))
        table = table_for(vals, horizon=1)
        ctx = table.context_matrix()
        pred = KnnBackend(k=1).fit_predict(
            ctx,
            table.context_targets(),
            ctx[[5]],
            categorical_columns=table.categorical_columns,
            quantile_levels=LEVELS,
        )
        assert pred.mean[0] == table.context_targets()[5]

    def test_quantiles_are_empirical_neighbor_quantiles(self, rng):
        vals = rng.standard_normal(25)
        table = table_for(vals, horizon=1)
        pred = run_backend(KnnBackend(k=5), table)
        assert (np.diff(pred.quantiles[:, 0]) >= 0).all()

    def test_default_k_rule(self):
        backend = KnnBackend()
        table = table_for(np.arange(100.0), horizon=1)
        pred = run_backend(backend, table)  # smoke: k = min(20, ceil(sqrt(100))) = 10
        assert np.isfinite(pred.mean).all()


class TestRidge:
    def test_exact_on_four_row_hand_instance(self):
        # u = 2*t + eta on rows (t, eta) = (0,0),(0,1),(1,0),(1,1). Solving the
        # centered normal equations by hand: weights (2, -1/2, 1/2) on
        # (t, onehot0, onehot1) with intercept 3/2, so the queries at t=2
        # evaluate to exactly 4 and 5.
        train_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        train_y = np.array([0.0, 1.0, 2.0, 3.0])
        test_X = np.array([[2.0, 0.0], [2.0, 1.0]])
        pred = RidgeBackend(lam=0.0).fit_predict(
            train_X, train_y, test_X,
            categorical_columns=frozenset({1}),
            quantile_levels=(0.5,),
        )
        np.testing.assert_allclose(pred.mean, [4.0, 5.0], atol=1e-8)

    def test_exact_on_linear_targets(self):
        # Targets u = 2 * running_index + channel, solvable exactly with lam=0.
        t_idx = np.arange(12, dtype=np.float64)
        vals = np.column_stack([2 * t_idx + 0, 2 * t_idx + 1])
        table = table_for(vals, horizon=3)
        pred = run_backend(RidgeBackend(lam=0.0), table)
        expected = []
        for h in range(3):
            for c in range(2):
                expected.append(2 * (12 + h) + c)
        np.testing.assert_allclose(pred.mean, expected, atol=1e-8)

    def test_median_equals_mean(self, rng):
        table = table_for(rng.standard_normal(40), horizon=4)
        pred = run_backend(RidgeBackend(), table, levels=(0.1, 0.5, 0.9))
        np.testing.assert_array_equal(pred.quantiles[1], pred.mean)


class TestContractChecks:
    def test_width_mismatch_rejected(self):
        table = table_for(np.arange(10.0))
        with pytest.raises(ValueError):
            KnnBackend().fit_predict(
                table.context_matrix(),
                table.context_targets(),
                table.query_matrix()[:, :-1],
                quantile_levels=LEVELS,
            )

    def test_too_few_context_rows(self):
        with pytest.raises(ValueError):
            KnnBackend().fit_predict(
                np.ones((1, 2)), np.ones(1), np.ones((1, 2)), quantile_levels=LEVELS
            )


ALL_BACKENDS = [
    SeasonalNaiveBackend(season_length=24),
    KnnBackend(),
    RidgeBackend(),
    IcmGpBackend(),
]


class TestSharedInvariants:
    @pytest.mark.parametrize("backend", ALL_BACKENDS, ids=lambda b: b.version)
    def test_constant_column_invariance(self, backend, rng):
        vals = rng.standard_normal((40, 2))
        table = table_for(vals, horizon=3)
        ctx, query = table.context_matrix(), table.query_matrix()
        base = backend.fit_predict(
            ctx, table.context_targets(), query,
            categorical_columns=table.categorical_columns,
            quantile_levels=LEVELS,
        )
        # Insert a constant column just before the indicator.
        def widen(mat):
            return np.column_stack([mat[:, :-1], np.full(len(mat), 3.7), mat[:, -1]])

        cats = frozenset({ctx.shape[1]})  # indicator shifted right by one
        wide = backend.fit_predict(
            widen(ctx), table.context_targets(), widen(query),
            categorical_columns=cats,
            quantile_levels=LEVELS,
        )
        np.testing.assert_allclose(wide.mean, base.mean, atol=1e-9)
        np.testing.assert_allclose(wide.quantiles, base.quantiles, atol=1e-9)

    @pytest.mark.parametrize("backend", ALL_BACKENDS, ids=lambda b: b.version)
    def test_seeded_determinism(self, backend, rng):
        vals = rng.standard_normal((30, 2))
        table = table_for(vals, horizon=2)
        a = run_backend(backend, table, seed=11)
        b = run_backend(backend, table, seed=11)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.quantiles, b.quantiles)


class TestOneHot:
    def test_expansion_and_unseen_category(self):
        train = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
        test = np.array([[4.0, 2.0]])
        tr, te = one_hot_expand(train, test, frozenset({1}))
        assert tr.shape == (3, 3)
        np.testing.assert_array_equal(tr[:, 1:], [[1, 0], [0, 1], [1, 0]])
        np.testing.assert_array_equal(te[0, 1:], [0, 0])  # unseen category


class TestFactory:
    def test_specs(self):
        assert isinstance(make_backend("seasonal-naive", season_length=7), SeasonalNaiveBackend)
        assert make_backend("seasonal-naive:m=12").season_length == 12
        assert make_backend("knn:k=3").k == 3
        assert make_backend("ridge:lam=0.5").lam == 0.5
        gp = make_backend("icm-gp:corr=identity,lengthscale=5")
        assert gp.config.channel_correlation == "identity"
        assert gp.config.time_lengthscale == 5.0
        with pytest.raises(ValueError):
            make_backend("lightgbm")
