import numpy as np
import pytest

from rollcast.backends import ContextTooLarge
from rollcast.backends.gp import (
    IcmGpConfig,
    estimate_channel_correlation,
    icm_gp_fit_predict,
)
from rollcast.data import gen_shared_latent

LEVELS = (0.1, 0.5, 0.9)


def rolled_arrays(series):
    """Minimal (features, indicator) layout: running index then channel."""
    t, d = series.values.shape
    idx = np.repeat(np.arange(t, dtype=np.float64), d)
    ind = np.tile(np.arange(d, dtype=np.float64), t)
    x = np.column_stack([idx, ind])
    y = series.values.ravel()
    return x, y


class TestPosterior:
    def test_interpolation_limit_single_row(self):
        config = IcmGpConfig(noise_variance=1e-6, jitter=1e-8)
        train_X = np.array([[0.0, 0.0]])
        train_y = np.array([2.5])
        pred = icm_gp_fit_predict(
            train_X, train_y, train_X, config, LEVELS, categorical_columns=frozenset({1})
        )
        assert pred.mean[0] == pytest.approx(2.5, abs=1e-4)

    def test_median_equals_mean(self):
        rng = np.random.default_rng(0)
        x = np.column_stack([np.arange(20.0), np.zeros(20)])
        y = rng.standard_normal(20)
        pred = icm_gp_fit_predict(x, y, x[:3], IcmGpConfig(), LEVELS, frozenset({1}))
        np.testing.assert_array_equal(pred.quantiles[1], pred.mean)

    def test_identity_b_decouples_channels(self):
        # Block-diagonal kernel: channel-a predictions must match a GP run on
        # channel a's rows alone.
        series = gen_shared_latent(60, 0.05, 0.3, seed=4)
        x, y = rolled_arrays(series)
        config = IcmGpConfig(channel_correlation="identity")
        query = np.array([[60.0, 0.0], [61.0, 0.0]])
        joint = icm_gp_fit_predict(x, y, query, config, LEVELS, frozenset({1}))
        mask = x[:, 1] == 0.0
        alone = icm_gp_fit_predict(
            x[mask], y[mask], query, config, LEVELS, frozenset({1})
        )
        np.testing.assert_allclose(joint.mean, alone.mean, atol=1e-9)
        np.testing.assert_allclose(joint.quantiles, alone.quantiles, atol=1e-9)

    def test_correlated_channel_shrinks_posterior_std(self):
        # Shared-latent pair: estimating B from context must reduce the noisy
        # channel's predictive spread versus treating channels as independent.
        series = gen_shared_latent(50, 0.02, 0.5, seed=7)
        x, y = rolled_arrays(series)
        query = np.array([[50.0, 1.0], [51.0, 1.0], [52.0, 1.0]])
        est = icm_gp_fit_predict(
            x, y, query, IcmGpConfig(), LEVELS, frozenset({1})
        )
        ident = icm_gp_fit_predict(
            x, y, query, IcmGpConfig(channel_correlation="identity"), LEVELS, frozenset({1})
        )
        std_est = est.quantiles[2] - est.mean
        std_ident = ident.quantiles[2] - ident.mean
        assert (std_est < std_ident).all()

    def test_posterior_variance_below_prior(self):
        rng = np.random.default_rng(3)
        x = np.column_stack([np.arange(30.0), np.tile([0.0, 1.0], 15)])
        y = rng.standard_normal(30)
        config = IcmGpConfig()
        query = np.column_stack([np.linspace(-5, 40, 12), np.tile([0.0, 1.0], 6)])
        pred = icm_gp_fit_predict(x, y, query, config, LEVELS, frozenset({1}))
        from scipy.stats import norm

        std = (pred.quantiles[2] - pred.mean) / norm.ppf(0.9)
        ind = np.round(query[:, 1]).astype(int)
        b = estimate_channel_correlation(y, np.round(x[:, 1]).astype(int), 2)
        prior_var = b[ind, ind] + config.noise_variance
        assert (std**2 <= prior_var + 1e-9).all()

    def test_context_budget(self):
        x = np.zeros((2049, 2))
        with pytest.raises(ContextTooLarge):
            icm_gp_fit_predict(x, np.zeros(2049), x[:1], IcmGpConfig(), LEVELS)


class TestChannelCorrelation:
    def test_identity_for_uncorrelated(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(2000)
        ind = np.tile([0, 1], 1000)
        b = estimate_channel_correlation(y, ind, 2)
        assert abs(b[0, 1]) < 0.1

    def test_near_one_for_identical(self):
        base = np.sin(np.arange(100) / 5.0)
        y = np.repeat(base, 2)
        ind = np.tile([0, 1], 100)
        b = estimate_channel_correlation(y, ind, 2)
        assert b[0, 1] == pytest.approx(0.9, abs=1e-6)  # 0.9 shrinkage of corr 1.0

    def test_positive_definite_after_shrinkage(self):
        base = np.arange(50, dtype=np.float64)
        y = np.column_stack([base, base, base]).ravel()
        ind = np.tile([0, 1, 2], 50)
        b = estimate_channel_correlation(y, ind, 3)
        assert np.linalg.eigvalsh(b).min() >= 1e-7

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IcmGpConfig(time_lengthscale=-1.0)
        with pytest.raises(ValueError):
            IcmGpConfig(jitter=1.0, noise_variance=0.5)
        with pytest.raises(ValueError):
            IcmGpConfig(channel_correlation="learned")
