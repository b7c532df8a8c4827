"""Gaussian-process surrogate: fitting, posteriors, and look-ahead variances.

Posterior quantities are checked against slow, independent oracles: dense
matrix inversion for the function posterior, finite differences of the
posterior mean and of the posterior covariance function for the derivative
posterior, sample-path statistics for its spread, and a literal
refit-with-augmented-data model for every look-ahead identity.
"""

import numpy as np
import pytest

from dgsm_lab.gp import (
    Dataset,
    GlobalNodeCache,
    GpModel,
    NOISE_FLOOR,
    condition_on,
    fit,
    lookahead_global,
    lookahead_local,
    posterior_deriv,
    posterior_deriv_batch,
    posterior_f,
    posterior_f_batch,
)
from dgsm_lab.kernels import Hyperparams, kernel, kernel_matrix

from helpers import (
    build_model,
    dense_posterior_f,
    pathwise_grad_samples,
    sample_gp_dataset,
)


def _make_model(seed=0, d=3, t=25, ls=(0.4, 0.7, 0.25), s=2.0, nv=1e-3):
    X, Y = sample_gp_dataset(d, t, ls, s, nv, seed)
    return build_model(X, Y, ls, s, nv)


def _make_scaled_model(seed=5):
    """Model with nontrivial output standardization (y_mean, y_std != 0, 1)."""
    X, Y = sample_gp_dataset(2, 18, (0.35, 0.5), 1.2, 1e-3, seed)
    Y = 4.0 + 3.0 * Y
    data = Dataset.from_arrays(X, Y)
    hp = Hyperparams(lengthscales=np.array([0.35, 0.5]), outputscale=1.2,
                     noise_var=1e-3, mean_const=0.1)
    return GpModel.build(hp, data, y_mean=data.y_mean, y_std=data.y_std)


class _CovOracle:
    """Posterior covariance Cov(f(a), f(b)) by dense inversion."""

    def __init__(self, model):
        self.model = model
        hp, X = model.hp, model.data.X
        K = kernel_matrix(X, X, hp) + (hp.noise_var + model.jitter) * np.eye(len(X))
        self._Kinv = np.linalg.inv(K)

    def __call__(self, a, b):
        hp, X = self.model.hp, self.model.data.X
        ka = kernel_matrix(a[None, :], X, hp)[0]
        kb = kernel_matrix(b[None, :], X, hp)[0]
        return self.model.y_std**2 * (kernel(a, b, hp) - ka @ self._Kinv @ kb)

    def deriv_var(self, x, i, h=1e-4):
        """Var(df/dx_i) as a second difference of the covariance function."""
        e = np.zeros_like(x)
        e[i] = h
        return (self(x + e, x + e) - self(x + e, x - e)
                - self(x - e, x + e) + self(x - e, x - e)) / (4.0 * h * h)

    def cross(self, x, i, h=1e-4):
        """Cov(f(x), df/dx_i) as a first difference in the second slot."""
        e = np.zeros_like(x)
        e[i] = h
        return (self(x, x + e) - self(x, x - e)) / (2.0 * h)


class TestDataset:
    def test_standardization_stats(self):
        d = Dataset.from_arrays(np.zeros((3, 2)), [1.0, 2.0, 3.0])
        assert d.y_mean == pytest.approx(2.0)
        assert d.y_std == pytest.approx(np.std([1.0, 2.0, 3.0]))
        assert not d.degenerate
        assert d.t == 3 and d.dim == 2

    def test_constant_outputs_flagged_degenerate(self):
        d = Dataset.from_arrays(np.random.default_rng(0).uniform(size=(4, 1)),
                                [7.0, 7.0, 7.0, 7.0])
        assert d.degenerate and d.y_std == 1.0

    def test_row_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(np.zeros((3, 2)), [1.0, 2.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays([[0.5], [np.nan]], [1.0, 2.0])
        with pytest.raises(ValueError):
            Dataset.from_arrays([[0.5], [0.6]], [1.0, np.inf])

    def test_empty(self):
        d = Dataset.empty(3)
        assert d.t == 0 and d.dim == 3


class TestFit:
    def test_deterministic_per_seed(self):
        X, Y = sample_gp_dataset(2, 20, (0.4, 0.6), 1.0, 1e-2, seed=1)
        data = Dataset.from_arrays(X, Y)
        m1 = fit(data, seed=42)
        m2 = fit(data, seed=42)
        assert m1.hyperparams_raw() == m2.hyperparams_raw()
        np.testing.assert_array_equal(m1.chol, m2.chol)

    def test_recovers_lengthscales(self):
        """ARD lengthscales of a dense prior sample are recovered to within
        0.5 in log-space."""
        X, Y = sample_gp_dataset(2, 60, (0.3, 0.6), 1.5, 1e-4, seed=7)
        model = fit(Dataset.from_arrays(X, Y), seed=0)
        est = np.asarray(model.hyperparams_raw()["lengthscales"])
        np.testing.assert_allclose(np.log(est), np.log([0.3, 0.6]), atol=0.5)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit(Dataset.from_arrays([[0.5, 0.5]], [1.0]), seed=0)

    def test_degenerate_data(self):
        X = np.random.default_rng(3).uniform(size=(6, 2))
        model = fit(Dataset.from_arrays(X, np.full(6, 2.5)), seed=0)
        assert model.degenerate
        for x in np.random.default_rng(4).uniform(size=(5, 2)):
            fp = posterior_f(model, x)
            assert fp.mu == pytest.approx(2.5, abs=1e-6)
            assert np.isfinite(fp.var) and fp.var > 0

    def test_noise_floor(self):
        X, Y = sample_gp_dataset(1, 30, (0.3,), 1.0, 0.0, seed=2)
        model = fit(Dataset.from_arrays(X, Y), seed=0)
        assert model.hp.noise_var >= NOISE_FLOOR

    def test_warm_start_deterministic(self):
        X, Y = sample_gp_dataset(2, 20, (0.4, 0.6), 1.0, 1e-2, seed=9)
        data = Dataset.from_arrays(X, Y)
        base = fit(data, seed=1)
        w1 = fit(data, seed=2, warm_start=base.hp)
        w2 = fit(data, seed=2, warm_start=base.hp)
        assert w1.hyperparams_raw() == w2.hyperparams_raw()


class TestPosteriorF:
    def test_prior_model(self):
        hp = Hyperparams(lengthscales=np.array([0.5, 0.5]), outputscale=1.7,
                         noise_var=1e-2, mean_const=0.3)
        model = GpModel.build(hp, Dataset.empty(2), y_mean=2.0, y_std=3.0)
        fp = posterior_f(model, np.array([0.2, 0.8]))
        assert fp.mu == pytest.approx(2.0 + 3.0 * 0.3)
        assert fp.var == pytest.approx(9.0 * 1.7)

    def test_interpolates_with_tiny_noise(self):
        X, Y = sample_gp_dataset(2, 12, (0.5, 0.5), 1.0, 0.0, seed=11)
        model = build_model(X, Y, (0.5, 0.5), 1.0, 1e-10)
        for xi, yi in zip(X, Y):
            fp = posterior_f(model, xi)
            assert fp.mu == pytest.approx(yi, abs=1e-4)
            assert fp.var < 1e-4

    def test_matches_dense_solve(self):
        model = _make_scaled_model()
        rng = np.random.default_rng(0)
        for x in rng.uniform(size=(30, 2)):
            fp = posterior_f(model, x)
            mu, var = dense_posterior_f(model, x)
            assert fp.mu == pytest.approx(mu, rel=1e-8, abs=1e-10)
            assert fp.var == pytest.approx(var, rel=1e-8, abs=1e-10)

    def test_batch_matches_scalar(self):
        model = _make_model()
        Xc = np.random.default_rng(1).uniform(size=(9, 3))
        mu, var = posterior_f_batch(model, Xc)
        for j, x in enumerate(Xc):
            fp = posterior_f(model, x)
            assert mu[j] == pytest.approx(fp.mu)
            assert var[j] == pytest.approx(fp.var)

    def test_reverts_to_prior_far_from_data(self):
        X = np.full((5, 1), 0.1) + 0.01 * np.arange(5)[:, None]
        model = build_model(X, np.ones(5), (0.03,), 2.0, 1e-4, mean_const=0.25)
        fp = posterior_f(model, np.array([0.95]))
        assert fp.mu == pytest.approx(0.25, abs=1e-8)
        assert fp.var == pytest.approx(2.0, rel=1e-8)

    def test_bad_point_shape(self):
        model = _make_model()
        with pytest.raises(ValueError):
            posterior_f(model, np.array([0.5, 0.5]))


class TestPosteriorDeriv:
    def test_prior_model(self):
        hp = Hyperparams(lengthscales=np.array([0.5, 0.25]), outputscale=2.0,
                         noise_var=1e-2)
        model = GpModel.build(hp, Dataset.empty(2))
        dp = posterior_deriv(model, np.array([0.3, 0.7]))
        np.testing.assert_allclose(dp.mu_d, 0.0)
        np.testing.assert_allclose(dp.var_d, [2.0 / 0.25, 2.0 / 0.0625])
        np.testing.assert_allclose(dp.cross, 0.0)

    def test_mean_matches_fd_of_posterior_mean(self):
        model = _make_scaled_model()
        h = 1e-5
        for x in np.random.default_rng(2).uniform(0.05, 0.95, size=(50, 2)):
            dp = posterior_deriv(model, x)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                fd = (posterior_f(model, x + e).mu
                      - posterior_f(model, x - e).mu) / (2 * h)
                assert dp.mu_d[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)

    def test_var_and_cross_match_covariance_fd(self):
        model = _make_scaled_model()
        oracle = _CovOracle(model)
        for x in np.random.default_rng(3).uniform(0.05, 0.95, size=(10, 2)):
            dp = posterior_deriv(model, x)
            for i in range(2):
                assert dp.var_d[i] == pytest.approx(
                    oracle.deriv_var(x, i), rel=1e-4, abs=1e-6)
                assert dp.cross[i] == pytest.approx(
                    oracle.cross(x, i), rel=1e-3, abs=1e-6)

    def test_spread_matches_sample_paths(self):
        """Empirical variance of path-wise gradients agrees with var_d."""
        model = _make_model(seed=4)
        x = np.array([0.4, 0.55, 0.7])
        grads = pathwise_grad_samples(model, x, h=1e-4, n=4000, seed=8)
        dp = posterior_deriv(model, x)
        np.testing.assert_allclose(grads.var(axis=0, ddof=1), dp.var_d, rtol=0.05)
        se = np.sqrt(dp.var_d / 4000)
        np.testing.assert_array_less(np.abs(grads.mean(axis=0) - dp.mu_d), 4 * se)

    def test_cross_cauchy_schwarz(self):
        model = _make_model(seed=6)
        for x in np.random.default_rng(5).uniform(size=(200, 3)):
            dp = posterior_deriv(model, x)
            fvar = posterior_f(model, x).var
            np.testing.assert_array_less(np.abs(dp.cross),
                                         np.sqrt(dp.var_d * fvar) + 1e-9)

    def test_chunked_batch_matches_unchunked(self):
        model = _make_model(seed=7)
        Xc = np.random.default_rng(6).uniform(size=(20, 3))
        a = posterior_deriv_batch(model, Xc)
        b = posterior_deriv_batch(model, Xc, chunk=7)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)

    def test_mean_only_mode(self):
        model = _make_model()
        Xc = np.random.default_rng(7).uniform(size=(5, 3))
        mu_full, var_d, cross = posterior_deriv_batch(model, Xc)
        mu_only, no_var, no_cross = posterior_deriv_batch(model, Xc, need_var=False)
        np.testing.assert_array_equal(mu_only, mu_full)
        assert no_var is None and no_cross is None


class TestLookaheadLocal:
    def test_matches_refit_and_ignores_observed_value(self):
        """var_l at x equals the derivative variance after literally appending
        (x, y*) and refactoring, for either hypothetical y*."""
        model = _make_scaled_model(seed=12)
        for x in np.random.default_rng(9).uniform(size=(8, 2)):
            la = lookahead_local(model, x)
            for y_star in (-3.0, 11.0):
                refit = condition_on(model, x, y_star)
                np.testing.assert_allclose(la.var_l, posterior_deriv(refit, x).var_d,
                                           rtol=1e-6, atol=1e-10)

    def test_plugin_mean_is_current_mean(self):
        model = _make_model(seed=13)
        x = np.array([0.3, 0.6, 0.9])
        la = lookahead_local(model, x)
        np.testing.assert_array_equal(la.mu_plugin, posterior_deriv(model, x).mu_d)

    def test_bounded_by_current_variance(self):
        model = _make_model(seed=14)
        for x in np.random.default_rng(10).uniform(size=(50, 3)):
            la = lookahead_local(model, x)
            dp = posterior_deriv(model, x)
            assert np.all(la.var_l >= 0.0)
            assert np.all(la.var_l <= dp.var_d * (1 + 1e-12))

    def test_no_reduction_far_from_data(self):
        """Far from all observations the f/derivative cross-covariance at a
        point vanishes, so a hypothetical observation there teaches nothing
        about the local slope."""
        X = np.full((5, 1), 0.1) + 0.01 * np.arange(5)[:, None]
        model = build_model(X, np.sin(10 * X[:, 0]), (0.03,), 2.0, 1e-4)
        x = np.array([0.95])
        la = lookahead_local(model, x)
        dp = posterior_deriv(model, x)
        np.testing.assert_allclose(la.var_l, dp.var_d, rtol=1e-8)


class TestLookaheadGlobal:
    def test_matches_refit_and_ignores_observed_value(self):
        model = _make_scaled_model(seed=15)
        rng = np.random.default_rng(11)
        for _ in range(6):
            x_star, x_plus = rng.uniform(size=(2, 2))
            la = lookahead_global(model, x_star, x_plus)
            for y_star in (0.0, 99.0):
                refit = condition_on(model, x_star, y_star)
                np.testing.assert_allclose(la.var_l,
                                           posterior_deriv(refit, x_plus).var_d,
                                           rtol=1e-6, atol=1e-10)

    def test_reduces_to_local_at_same_site(self):
        model = _make_model(seed=16)
        x = np.array([0.25, 0.5, 0.75])
        g = lookahead_global(model, x, x)
        l = lookahead_local(model, x)
        np.testing.assert_allclose(g.var_l, l.var_l, rtol=1e-10, atol=1e-12)

    def test_prior_model(self):
        """With no data the cache's solve term is absent; the result must
        still match a literal refit of the prior."""
        hp = Hyperparams(lengthscales=np.array([0.4]), outputscale=1.5,
                         noise_var=1e-2)
        model = GpModel.build(hp, Dataset.empty(1))
        x_star, x_plus = np.array([0.3]), np.array([0.6])
        la = lookahead_global(model, x_star, x_plus)
        refit = condition_on(model, x_star, 0.7)
        np.testing.assert_allclose(la.var_l, posterior_deriv(refit, x_plus).var_d,
                                   rtol=1e-10)

    def test_node_cache_matches_pairwise_calls(self):
        model = _make_model(seed=17)
        rng = np.random.default_rng(12)
        nodes = rng.uniform(size=(6, 3))
        stars = rng.uniform(size=(4, 3))
        cache = GlobalNodeCache(model, nodes)
        got = cache.lookahead_var(stars)
        assert got.shape == (4, 6, 3)
        for a, x_star in enumerate(stars):
            for m, node in enumerate(nodes):
                la = lookahead_global(model, x_star, node)
                np.testing.assert_allclose(got[a, m], la.var_l,
                                           rtol=1e-10, atol=1e-12)

    def test_cache_bounds(self):
        model = _make_model(seed=18)
        rng = np.random.default_rng(13)
        cache = GlobalNodeCache(model, rng.uniform(size=(16, 3)))
        var_l = cache.lookahead_var(rng.uniform(size=(11, 3)))
        assert np.all(var_l >= 0.0)
        assert np.all(var_l <= cache.var_d[None, :, :] * (1 + 1e-12))


class TestConditionOn:
    def test_appends_and_pins_posterior(self):
        model = _make_model(seed=19, nv=1e-8)
        x_new = np.array([0.15, 0.85, 0.5])
        before = posterior_f(model, x_new)
        updated = condition_on(model, x_new, 3.3)
        assert updated.data.t == model.data.t + 1
        after = posterior_f(updated, x_new)
        assert after.mu == pytest.approx(3.3, abs=1e-3)
        assert after.var < before.var

    def test_hyperparams_unchanged(self):
        model = _make_model(seed=20)
        updated = condition_on(model, np.array([0.2, 0.4, 0.6]), 1.0)
        assert updated.hp == model.hp
        assert updated.y_mean == model.y_mean and updated.y_std == model.y_std

    def test_bad_point(self):
        model = _make_model()
        with pytest.raises(ValueError):
            condition_on(model, np.array([0.5]), 1.0)


class TestStructure:
    def test_cached_factor_reconstructs_gram(self):
        model = _make_model(seed=21)
        K = (kernel_matrix(model.data.X, model.data.X, model.hp)
             + (model.hp.noise_var + model.jitter) * np.eye(model.data.t))
        np.testing.assert_allclose(model.chol @ model.chol.T, K, rtol=1e-12,
                                   atol=1e-12)

    def test_posteriors_reuse_cached_factor(self, monkeypatch):
        """Every posterior/look-ahead path runs without a fresh factorization;
        only condition_on (which rebuilds the Gram matrix) needs one."""
        model = _make_model(seed=22)
        x = np.array([0.3, 0.5, 0.7])

        def boom(*args, **kwargs):
            raise AssertionError("unexpected refactorization")

        monkeypatch.setattr(np.linalg, "cholesky", boom)
        posterior_f(model, x)
        posterior_deriv(model, x)
        lookahead_local(model, x)
        lookahead_global(model, x, np.array([0.6, 0.6, 0.6]))
        GlobalNodeCache(model, np.array([[0.1, 0.2, 0.3]])).lookahead_var(x[None, :])
        with pytest.raises(AssertionError):
            condition_on(model, x, 1.0)

    def test_raw_hyperparameter_report(self):
        model = _make_scaled_model()
        raw = model.hyperparams_raw()
        assert raw["outputscale"] == pytest.approx(1.2 * model.y_std**2)
        assert raw["noise_var"] == pytest.approx(1e-3 * model.y_std**2)
        assert raw["mean_const"] == pytest.approx(model.y_mean + model.y_std * 0.1)
        assert raw["degenerate"] is False
