import dataclasses

import numpy as np
import pytest

from linkshrink.design import apply_feature_map, fit_feature_map
from linkshrink.errors import DataError
from linkshrink.importance import (
    global_importance,
    global_importance_from_result,
    importance_table,
    unit_effect_posterior,
    unit_effect_table,
)
from linkshrink.model import ModelSpec
from linkshrink.sampler import SamplerConfig, posterior_summary, run_sampler
from linkshrink.shapley import ShapleyQuery, shapley_posterior

from _support import random_dataset


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(40)
    n = 150
    data = random_dataset(
        rng, n, n_continuous=2, n_binary=1, categorical_levels=(3,), response=False
    )
    fmap = fit_feature_map(data)
    X = apply_feature_map(fmap, data)
    truth = rng.normal(size=1 + fmap.p_columns + fmap.q) * 0.4
    M = np.hstack([np.ones((n, 1)), X.X_main, X.X_int])
    y = M @ truth + rng.normal(size=n) * 0.3
    cfg = SamplerConfig(n_chains=2, n_warmup=150, n_keep=200, seed=41)
    draws = run_sampler(ModelSpec("bayint"), X, y, cfg)
    return draws, X, fmap


class TestUnitEffect:
    def test_zero_covariates_equal_beta_summary(self, fitted):
        # With every other covariate at 0 the interaction sum vanishes, so
        # the E_ij summary must reproduce the beta_j summary bit for bit.
        draws, X, fmap = fitted
        j = 0
        eff = unit_effect_posterior(draws, np.zeros((1, fmap.p_columns)), j)
        summary = posterior_summary(draws)
        col = fmap.columns_of_covariate(j)[0]
        name = "b_" + fmap.main_names[col]
        idx = summary.names.index(name)
        assert eff.mean[0] == summary.mean[idx]
        assert eff.lower[0] == summary.lower[idx]
        assert eff.upper[0] == summary.upper[idx]

    def test_binary_flip_moves_effect_by_two_beta(self, fitted):
        draws, X, fmap = fitted
        j = 0
        col_j = fmap.columns_of_covariate(j)[0]
        bin_cov = fmap.covariate_kinds.index("binary")
        col_k = fmap.columns_of_covariate(bin_cov)[0]
        rows, partners = fmap.pairs_touching(col_j)
        r = [int(r) for r, pt in zip(rows, partners) if pt == col_k][0]

        base = np.zeros((2, fmap.p_columns))
        base[0, col_k] = -1.0
        base[1, col_k] = 1.0
        eff = unit_effect_posterior(draws, base, j)
        diff_mean = eff.mean[1] - eff.mean[0]
        expect = 2.0 * draws.beta_int[:, r].mean() * draws.response_scale
        assert diff_mean == pytest.approx(expect, abs=1e-12)

    def test_interval_order(self, fitted):
        draws, X, fmap = fitted
        eff = unit_effect_posterior(draws, X.X_main[:6], 1, level=0.9)
        assert np.all(eff.lower <= eff.mean) and np.all(eff.mean <= eff.upper)

    def test_categorical_target_redirected(self, fitted):
        draws, X, fmap = fitted
        cat = fmap.covariate_kinds.index("categorical")
        with pytest.raises(DataError, match="attribution"):
            unit_effect_posterior(draws, X.X_main[:2], cat)

    def test_bad_inputs(self, fitted):
        draws, X, fmap = fitted
        with pytest.raises(DataError, match="out of range"):
            unit_effect_posterior(draws, X.X_main[:2], 99)
        with pytest.raises(DataError, match="columns"):
            unit_effect_posterior(draws, np.zeros((2, 3)), 0)
        with pytest.raises(DataError, match="level"):
            unit_effect_posterior(draws, X.X_main[:2], 0, level=0.0)

    def test_table_with_stratifier(self, fitted):
        draws, X, fmap = fitted
        eff = unit_effect_posterior(draws, X.X_main[:5], 0)
        header, cols = unit_effect_table(eff, "group", np.array(list("abcde")))
        assert header[-1] == "group"
        assert len(cols[-1]) == 5
        with pytest.raises(DataError, match="stratifier"):
            unit_effect_table(eff, "group", np.array(["a"]))


class TestGlobalImportance:
    def test_nonnegative_and_triangle(self, fitted):
        draws, X, fmap = fitted
        query = ShapleyQuery.from_design(X, X.X_main[:20])
        imp = global_importance(draws, query)
        assert np.all(imp.importance >= 0.0)
        assert np.all(imp.importance_main >= 0.0)
        assert np.all(imp.importance_int >= 0.0)
        assert np.all(
            imp.importance <= imp.importance_main + imp.importance_int + 1e-12
        )

    def test_matches_posterior_mean_attribution(self, fitted):
        # Linearity: |phi at mean coefficients| == |posterior mean phi|.
        draws, X, fmap = fitted
        query = ShapleyQuery.from_design(X, X.X_main[:10])
        imp = global_importance(draws, query)
        res = shapley_posterior(draws, query)
        np.testing.assert_allclose(
            imp.importance, np.mean(np.abs(res.phi_mean), axis=0), atol=1e-8
        )
        from_result = global_importance_from_result(res)
        np.testing.assert_allclose(imp.importance, from_result.importance, atol=1e-8)

    def test_ordering_invariance(self, fitted):
        draws, X, fmap = fitted
        rows = X.X_main[:15]
        q1 = ShapleyQuery.from_design(X, rows)
        q2 = ShapleyQuery.from_design(X, rows[::-1])
        i1 = global_importance(draws, q1)
        i2 = global_importance(draws, q2)
        np.testing.assert_allclose(i1.importance, i2.importance, atol=1e-12)

    def test_single_individual_absolute_value(self, fitted):
        draws, X, fmap = fitted
        query = ShapleyQuery.from_design(X, X.X_main[:1])
        imp = global_importance(draws, query)
        res = shapley_posterior(draws, query)
        np.testing.assert_allclose(
            imp.importance, np.abs(res.phi_mean[0]), atol=1e-8
        )

    def test_per_draw_dominates_point(self, fitted):
        # Jensen: mean over draws of |phi| >= |mean over draws of phi|.
        draws, X, fmap = fitted
        query = ShapleyQuery.from_design(X, X.X_main[:10])
        point = global_importance(draws, query)
        spread = global_importance(draws, query, per_draw=True)
        assert np.all(spread.importance >= point.importance - 1e-10)

    def test_empty_inputs(self, fitted):
        draws, X, fmap = fitted
        query = ShapleyQuery(
            feature_map=fmap,
            individuals=np.zeros((0, fmap.p_columns)),
            means=np.zeros(fmap.p_columns),
            moments=np.zeros(fmap.q),
        )
        with pytest.raises(DataError, match="individuals"):
            global_importance(draws, query)

    def test_table(self, fitted):
        draws, X, fmap = fitted
        query = ShapleyQuery.from_design(X, X.X_main[:4])
        imp = global_importance(draws, query)
        header, cols = importance_table(imp)
        assert header[0] == "covariate"
        assert len(cols[0]) == fmap.p_covariates
