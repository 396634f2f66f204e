"""Split R-hat and effective sample size on controlled synthetic chains."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from _support import random_design
from linkshrink.diagnostics import compute_diagnostics
from linkshrink.model import ModelSpec
from linkshrink.sampler import PosteriorDraws


def synthetic_draws(alpha_chains: np.ndarray) -> PosteriorDraws:
    """Wrap chains of a single scalar (as the intercept) into PosteriorDraws.

    All other parameters are filled with well-behaved independent noise.
    """
    n_chains, n_keep = alpha_chains.shape
    total = n_chains * n_keep
    rng = np.random.default_rng(99)
    design, _ = random_design(rng, 30, n_continuous=2)
    fmap = design.feature_map
    return PosteriorDraws(
        spec=ModelSpec("bayint"),
        feature_map=fmap,
        alpha=alpha_chains.reshape(-1),
        beta_main=rng.normal(size=(total, 2)),
        beta_int=rng.normal(size=(total, 1)),
        tau=np.abs(rng.normal(size=(total, 2))) + 0.5,
        tau_int=rng.uniform(0.01, 1, size=total),
        sigma2=np.abs(rng.normal(size=total)) + 0.5,
        chain_ids=np.repeat(np.arange(n_chains), n_keep),
        draw_index=np.tile(np.arange(n_keep), n_chains),
        counters={"slice_expansions": 3, "slice_shrinkages": 1},
    )


class TestRhat:
    def test_duplicated_chains_give_unit_rhat(self):
        rng = np.random.default_rng(0)
        one = rng.standard_normal(1000)
        diag = compute_diagnostics(synthetic_draws(np.vstack([one, one])))
        assert abs(diag.rhat[0] - 1.0) < 0.01

    def test_shifted_chain_is_flagged(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal(500)
        b = rng.standard_normal(500) + 10.0
        diag = compute_diagnostics(synthetic_draws(np.vstack([a, b])))
        assert diag.rhat[0] > 1.5

    def test_within_chain_trend_is_flagged_by_splitting(self):
        # a strong common trend leaves chain means equal but the split
        # halves disagree, which is exactly what split R-hat detects
        trend = np.linspace(-3, 3, 800)
        rng = np.random.default_rng(2)
        chains = np.vstack([trend + 0.1 * rng.standard_normal(800) for _ in range(2)])
        diag = compute_diagnostics(synthetic_draws(chains))
        assert diag.rhat[0] > 1.5

    def test_scale_mismatch_is_flagged_by_folding(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(800) * 0.05
        b = rng.standard_normal(800) * 5.0
        diag = compute_diagnostics(synthetic_draws(np.vstack([a, b])))
        assert diag.rhat[0] > 1.2

    def test_well_mixed_chains_near_one(self):
        rng = np.random.default_rng(4)
        chains = rng.standard_normal((4, 500))
        diag = compute_diagnostics(synthetic_draws(chains))
        assert diag.rhat[0] < 1.02
        # the estimator's hard floor is sqrt((n-1)/n) on split halves of 250
        assert np.all(diag.rhat >= np.sqrt(249 / 250) - 1e-9)

    def test_single_chain_warns_and_omits_rhat(self):
        rng = np.random.default_rng(5)
        with pytest.warns(UserWarning, match="2 chains"):
            diag = compute_diagnostics(synthetic_draws(rng.standard_normal((1, 400))))
        assert diag.rhat is None
        assert diag.ess.shape[0] == len(diag.parameter_names)


class TestEss:
    def test_independent_draws_have_near_full_ess(self):
        rng = np.random.default_rng(10)
        chains = rng.standard_normal((2, 2000))
        diag = compute_diagnostics(synthetic_draws(chains))
        assert abs(diag.ess[0] - 4000) / 4000 < 0.2

    def test_autocorrelated_chain_matches_theory(self):
        # AR(1) with coefficient rho has integrated time (1+rho)/(1-rho)
        rho = 0.9
        rng = np.random.default_rng(11)
        n, m = 20_000, 2
        chains = np.empty((m, n))
        for c in range(m):
            noise = rng.standard_normal(n)
            x = np.empty(n)
            x[0] = noise[0]
            for t in range(1, n):
                x[t] = rho * x[t - 1] + noise[t] * np.sqrt(1 - rho**2)
            chains[c] = x
        diag = compute_diagnostics(synthetic_draws(chains))
        expected = m * n * (1 - rho) / (1 + rho)
        assert 0.6 * expected < diag.ess[0] < 1.6 * expected

    def test_ess_never_exceeds_draw_count(self):
        rng = np.random.default_rng(12)
        # antithetic chains have negative autocorrelation, the usual way
        # raw ESS estimates overshoot
        base = rng.standard_normal(1000)
        x = np.empty(2000)
        x[0::2] = base
        x[1::2] = -base
        diag = compute_diagnostics(synthetic_draws(x.reshape(2, 1000)))
        assert np.all(diag.ess <= 2000 + 1e-9)

    def test_constant_parameter_reports_full_ess_and_unit_rhat(self):
        diag = compute_diagnostics(synthetic_draws(np.zeros((2, 300))))
        assert diag.rhat[0] == 1.0
        assert diag.ess[0] == 600

    def test_counters_carried_over(self):
        rng = np.random.default_rng(13)
        diag = compute_diagnostics(synthetic_draws(rng.standard_normal((2, 100))))
        assert diag.counters == {"slice_expansions": 3, "slice_shrinkages": 1}
