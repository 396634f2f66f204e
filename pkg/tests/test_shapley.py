import numpy as np
import pytest

from linkshrink.design import apply_feature_map, fit_feature_map
from linkshrink.errors import DataError
from linkshrink.model import ModelSpec, ModelState
from linkshrink.sampler import SamplerConfig, run_sampler
from linkshrink.shapley import (
    ShapleyQuery,
    aggregate_columns,
    mean_prediction,
    point_prediction,
    result_table,
    shapley_bruteforce,
    shapley_categorical,
    shapley_fast,
    shapley_posterior,
)

from _support import random_dataset


def random_query(rng, fmap, m=3, centered=False):
    """Random individuals and moments; moments need not be realizable."""
    p, q = fmap.p_columns, fmap.q
    means = np.zeros(p) if centered else rng.normal(size=p)
    return ShapleyQuery(
        feature_map=fmap,
        individuals=rng.normal(size=(m, p)),
        means=means,
        moments=rng.normal(size=q),
    )


def random_state(rng, fmap):
    return ModelState(
        alpha=float(rng.normal()),
        beta_main=rng.normal(size=fmap.p_columns),
        beta_int=rng.normal(size=fmap.q),
        tau=np.ones(fmap.p_columns),
        tau_int=0.5,
        sigma2=1.0,
    )


def fmap_of(rng, n_continuous=0, n_binary=0, categorical_levels=()):
    data = random_dataset(
        rng,
        60,
        n_continuous=n_continuous,
        n_binary=n_binary,
        categorical_levels=categorical_levels,
    )
    return fit_feature_map(data)


class TestFastPath:
    def test_main_effects_only_reduction(self):
        rng = np.random.default_rng(0)
        fmap = fmap_of(rng, n_continuous=4)
        query = random_query(rng, fmap, centered=True)
        state = random_state(rng, fmap)
        state.beta_int[:] = 0.0
        att = shapley_fast(state, query)
        np.testing.assert_allclose(att.phi, query.individuals * state.beta_main)
        np.testing.assert_array_equal(att.phi_int, 0.0)

    def test_zero_point_centered(self):
        # At x* = 0 with centered covariates only the moment term survives:
        # phi_p = -1/2 sum_j beta_jp E[x_j x_p].
        rng = np.random.default_rng(1)
        fmap = fmap_of(rng, n_continuous=3)
        p, q = fmap.p_columns, fmap.q
        query = ShapleyQuery(
            feature_map=fmap,
            individuals=np.zeros((1, p)),
            means=np.zeros(p),
            moments=rng.normal(size=q),
        )
        state = random_state(rng, fmap)
        att = shapley_fast(state, query)
        jj, kk = fmap.pair_arrays()
        expect = np.zeros(p)
        for r in range(q):
            half = 0.5 * state.beta_int[r] * query.moments[r]
            expect[jj[r]] -= half
            expect[kk[r]] -= half
        np.testing.assert_allclose(att.phi[0], expect, atol=1e-12)
        np.testing.assert_array_equal(att.phi_main, 0.0)

    def test_split_adds_up(self):
        rng = np.random.default_rng(2)
        fmap = fmap_of(rng, n_continuous=3, n_binary=2)
        query = random_query(rng, fmap)
        att = shapley_fast(random_state(rng, fmap), query)
        np.testing.assert_allclose(att.phi, att.phi_main + att.phi_int, atol=1e-14)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        fmap = fmap_of(rng, n_continuous=3)
        other = fmap_of(rng, n_continuous=4)
        query = random_query(rng, fmap)
        with pytest.raises(DataError, match="main coefficients"):
            shapley_fast(random_state(rng, other), query)


class TestBruteForce:
    def test_single_player_gets_everything(self):
        rng = np.random.default_rng(4)
        fmap = fmap_of(rng, n_continuous=1)
        query = random_query(rng, fmap)
        state = random_state(rng, fmap)
        att = shapley_bruteforce(state, query)
        expect = point_prediction(state, query) - mean_prediction(state, query)
        np.testing.assert_allclose(att.phi[:, 0], expect, atol=1e-12)

    def test_two_player_interaction_split_by_hand(self):
        # Centered, only the interaction coefficient nonzero:
        # both players get half of beta12 (x1 x2 - E[x1 x2]).
        rng = np.random.default_rng(5)
        fmap = fmap_of(rng, n_continuous=2)
        assert fmap.q == 1
        query = random_query(rng, fmap, m=4, centered=True)
        state = random_state(rng, fmap)
        state.beta_main[:] = 0.0
        b12 = state.beta_int[0]
        att = shapley_bruteforce(state, query)
        xs = query.individuals
        expect = 0.5 * b12 * (xs[:, 0] * xs[:, 1] - query.moments[0])
        np.testing.assert_allclose(att.phi[:, 0], expect, atol=1e-12)
        np.testing.assert_allclose(att.phi[:, 1], expect, atol=1e-12)

    def test_refuses_large_player_sets(self):
        rng = np.random.default_rng(6)
        fmap = fmap_of(rng, n_continuous=21)
        query = random_query(rng, fmap, m=1)
        with pytest.raises(DataError, match="brute force"):
            shapley_bruteforce(random_state(rng, fmap), query)


class TestOracleEquivalence:
    @pytest.mark.parametrize("centered", [True, False])
    def test_continuous_and_binary(self, centered):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n_cont = int(rng.integers(1, 5))
            n_bin = int(rng.integers(0, 3))
            fmap = fmap_of(rng, n_continuous=n_cont, n_binary=n_bin)
            query = random_query(rng, fmap, m=2, centered=centered)
            state = random_state(rng, fmap)
            fast = aggregate_columns(shapley_fast(state, query), fmap)
            brute = shapley_bruteforce(state, query)
            np.testing.assert_allclose(fast.phi, brute.phi, atol=1e-10)
            np.testing.assert_allclose(fast.phi_main, brute.phi_main, atol=1e-10)
            np.testing.assert_allclose(fast.phi_int, brute.phi_int, atol=1e-10)

    def test_with_categorical_group(self):
        # Summed contrast-column values must equal the value of the
        # categorical treated as one player in the enumeration.
        rng = np.random.default_rng(8)
        for levels in [(3,), (5,), (4, 3)]:
            fmap = fmap_of(
                rng, n_continuous=2, n_binary=1, categorical_levels=levels
            )
            query = random_query(rng, fmap, m=2)
            state = random_state(rng, fmap)
            fast = aggregate_columns(shapley_fast(state, query), fmap)
            brute = shapley_bruteforce(state, query)
            np.testing.assert_allclose(fast.phi, brute.phi, atol=1e-10)
            np.testing.assert_allclose(fast.phi_int, brute.phi_int, atol=1e-10)


class TestAxioms:
    def test_efficiency(self):
        rng = np.random.default_rng(9)
        fdesc = dict(n_continuous=3, n_binary=1, categorical_levels=(3,))
        fmap = fmap_of(rng, **fdesc)
        query = random_query(rng, fmap, m=5)
        state = random_state(rng, fmap)
        att = shapley_fast(state, query)
        total = att.phi.sum(axis=1)
        expect = point_prediction(state, query) - mean_prediction(state, query)
        np.testing.assert_allclose(total, expect, atol=1e-10)

    def test_dummy_player(self):
        rng = np.random.default_rng(10)
        fmap = fmap_of(rng, n_continuous=4)
        query = random_query(rng, fmap)
        state = random_state(rng, fmap)
        dead = 2
        state.beta_main[dead] = 0.0
        rows, _ = fmap.pairs_touching(dead)
        state.beta_int[np.asarray(rows, dtype=int)] = 0.0
        att = shapley_fast(state, query)
        np.testing.assert_array_equal(att.phi[:, dead], 0.0)

    def test_symmetry(self):
        # Two covariates with identical coefficients, values, and
        # exchangeable moments receive identical attributions.
        rng = np.random.default_rng(11)
        fmap = fmap_of(rng, n_continuous=3)
        jj, kk = fmap.pair_arrays()
        p = fmap.p_columns
        means = np.zeros(p)
        x = rng.normal(size=p)
        x[1] = x[0]
        moments = rng.normal(size=fmap.q)
        state = random_state(rng, fmap)
        state.beta_main[1] = state.beta_main[0]
        # pairs over columns (0,1),(0,2),(1,2): make 0 and 1 exchangeable.
        r01 = int(np.where((jj == 0) & (kk == 1))[0][0])
        r02 = int(np.where((jj == 0) & (kk == 2))[0][0])
        r12 = int(np.where((jj == 1) & (kk == 2))[0][0])
        state.beta_int[r12] = state.beta_int[r02]
        moments[r12] = moments[r02]
        query = ShapleyQuery(
            feature_map=fmap, individuals=x[None, :], means=means, moments=moments
        )
        att = shapley_fast(state, query)
        assert att.phi[0, 0] == pytest.approx(att.phi[0, 1], abs=1e-12)

    def test_linearity_in_coefficients(self):
        rng = np.random.default_rng(12)
        fmap = fmap_of(rng, n_continuous=3, n_binary=1)
        query = random_query(rng, fmap)
        s1 = random_state(rng, fmap)
        s2 = random_state(rng, fmap)
        s_sum = ModelState(
            alpha=s1.alpha + s2.alpha,
            beta_main=s1.beta_main + s2.beta_main,
            beta_int=s1.beta_int + s2.beta_int,
            tau=s1.tau,
            tau_int=s1.tau_int,
            sigma2=s1.sigma2,
        )
        a1 = shapley_fast(s1, query)
        a2 = shapley_fast(s2, query)
        a12 = shapley_fast(s_sum, query)
        np.testing.assert_allclose(a12.phi, a1.phi + a2.phi, atol=1e-10)


class TestCategoricalAggregation:
    def test_single_column_identity(self):
        rng = np.random.default_rng(13)
        fmap = fmap_of(rng, n_continuous=3)
        vals = rng.normal(size=(2, fmap.p_columns))
        np.testing.assert_array_equal(shapley_categorical(vals, fmap), vals)

    def test_five_level_sums_four_columns(self):
        rng = np.random.default_rng(14)
        fmap = fmap_of(rng, n_continuous=1, categorical_levels=(5,))
        assert fmap.p_columns == 5 and fmap.p_covariates == 2
        vals = rng.normal(size=(3, 5))
        agg = shapley_categorical(vals, fmap)
        cat = fmap.covariate_names.index(
            [n for n in fmap.covariate_names if not n.startswith("x")][0]
        )
        cols = list(fmap.columns_of_covariate(cat))
        np.testing.assert_allclose(agg[:, cat], vals[:, cols].sum(axis=1))

    def test_zero_contrast_columns_aggregate_to_zero(self):
        rng = np.random.default_rng(15)
        fmap = fmap_of(rng, n_continuous=2, categorical_levels=(4,))
        query = random_query(rng, fmap)
        state = random_state(rng, fmap)
        cat = int(np.argmax([len(fmap.columns_of_covariate(c)) for c in range(3)]))
        for col in fmap.columns_of_covariate(cat):
            state.beta_main[col] = 0.0
            rows, _ = fmap.pairs_touching(col)
            state.beta_int[np.asarray(rows, dtype=int)] = 0.0
        att = aggregate_columns(shapley_fast(state, query), fmap)
        np.testing.assert_array_equal(att.phi[:, cat], 0.0)

    def test_wrong_width_rejected(self):
        rng = np.random.default_rng(16)
        fmap = fmap_of(rng, n_continuous=3)
        with pytest.raises(DataError, match="columns"):
            shapley_categorical(np.zeros((2, 5)), fmap)


class TestQuery:
    def test_from_design_uses_population_moments(self):
        rng = np.random.default_rng(17)
        data = random_dataset(rng, 500, n_continuous=2, n_binary=1, response=False)
        fmap = fit_feature_map(data)
        X = apply_feature_map(fmap, data)
        query = ShapleyQuery.from_design(X, X.X_main[:3])
        np.testing.assert_allclose(query.means, X.X_main.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(query.moments, X.X_int.mean(axis=0), atol=1e-12)
        assert query.n_individuals == 3

    def test_one_dim_individual_promoted(self):
        rng = np.random.default_rng(18)
        fmap = fmap_of(rng, n_continuous=3)
        q = ShapleyQuery(
            feature_map=fmap,
            individuals=np.zeros(3),
            means=np.zeros(3),
            moments=np.zeros(fmap.q),
        )
        assert q.individuals.shape == (1, 3)

    def test_bad_shapes_rejected(self):
        rng = np.random.default_rng(19)
        fmap = fmap_of(rng, n_continuous=3)
        with pytest.raises(DataError, match="means"):
            ShapleyQuery(
                feature_map=fmap,
                individuals=np.zeros((1, 3)),
                means=np.zeros(2),
                moments=np.zeros(fmap.q),
            )
        with pytest.raises(DataError, match="finite"):
            ShapleyQuery(
                feature_map=fmap,
                individuals=np.full((1, 3), np.nan),
                means=np.zeros(3),
                moments=np.zeros(fmap.q),
            )


class TestPosterior:
    def _draws_and_query(self, seed=20, n=120):
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, n, n_continuous=2, n_binary=1, response=False)
        fmap = fit_feature_map(data)
        X = apply_feature_map(fmap, data)
        truth = rng.normal(size=1 + fmap.p_columns + fmap.q) * 0.5
        M = np.hstack([np.ones((n, 1)), X.X_main, X.X_int])
        y = M @ truth + rng.normal(size=n) * 0.3
        cfg = SamplerConfig(n_chains=2, n_warmup=150, n_keep=150, seed=seed)
        draws = run_sampler(ModelSpec("bayint"), X, y, cfg)
        query = ShapleyQuery.from_design(X, X.X_main[:4])
        return draws, query

    def test_summary_shapes_and_order(self):
        draws, query = self._draws_and_query()
        res = shapley_posterior(draws, query, level=0.9)
        n_cov = len(res.covariate_names)
        assert res.phi_mean.shape == (4, n_cov)
        assert np.all(res.phi_lower <= res.phi_mean + 1e-12)
        assert np.all(res.phi_mean <= res.phi_upper + 1e-12)
        assert np.all(res.phi_main_lower <= res.phi_main_upper)
        assert np.all(res.phi_int_lower <= res.phi_int_upper)

    def test_mean_is_attribution_of_mean_coefficients(self):
        # Attribution is linear in coefficients, so the posterior mean of
        # phi equals phi at the posterior-mean coefficients.
        draws, query = self._draws_and_query(seed=21)
        res = shapley_posterior(draws, query)
        state = draws.state(0)
        state.alpha = float(draws.alpha.mean())
        state.beta_main = draws.beta_main.mean(axis=0)
        state.beta_int = draws.beta_int.mean(axis=0)
        att = aggregate_columns(shapley_fast(state, query), draws.feature_map)
        np.testing.assert_allclose(res.phi_mean, att.phi, atol=1e-8)

    def test_identical_draws_zero_width(self):
        draws, query = self._draws_and_query(seed=22)
        import dataclasses

        one = dataclasses.replace(
            draws,
            alpha=np.repeat(draws.alpha[:1], 8),
            beta_main=np.repeat(draws.beta_main[:1], 8, axis=0),
            beta_int=np.repeat(draws.beta_int[:1], 8, axis=0),
            tau=np.repeat(draws.tau[:1], 8, axis=0),
            tau_int=np.repeat(draws.tau_int[:1], 8),
            sigma2=np.repeat(draws.sigma2[:1], 8),
            chain_ids=np.zeros(8, dtype=np.int64),
            draw_index=np.arange(8),
        )
        res = shapley_posterior(one, query)
        np.testing.assert_allclose(res.phi_lower, res.phi_upper, atol=1e-14)
        np.testing.assert_allclose(res.phi_lower, res.phi_mean, atol=1e-14)

    def test_response_scale_propagates(self):
        draws, query = self._draws_and_query(seed=23)
        import dataclasses

        scaled = dataclasses.replace(draws, response_scale=2.5)
        base = shapley_posterior(draws, query)
        res = shapley_posterior(scaled, query)
        np.testing.assert_allclose(res.phi_mean, 2.5 * base.phi_mean, atol=1e-12)
        np.testing.assert_allclose(res.phi_upper, 2.5 * base.phi_upper, atol=1e-12)

    def test_table_layout(self):
        draws, query = self._draws_and_query(seed=24)
        res = shapley_posterior(draws, query)
        header, cols = result_table(res)
        assert header[:2] == ["individual_id", "covariate"]
        n_rows = res.n_individuals * len(res.covariate_names)
        assert all(len(c) == n_rows for c in cols)
        assert cols[1][0] == res.covariate_names[0]

    def test_level_validation(self):
        draws, query = self._draws_and_query(seed=25)
        with pytest.raises(DataError, match="level"):
            shapley_posterior(draws, query, level=1.0)
