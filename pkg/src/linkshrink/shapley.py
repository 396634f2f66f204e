"""Exact interventional attribution values for the interaction model.

For a model that is linear in main effects and pairwise products, the
attribution of each column has a closed form in the population first and
second moments; no subset sampling is needed. A brute-force subset
enumeration over covariates (categorical contrast columns move together as
one player) is kept as an independent oracle. Attributions split into a
main-effect part and an interaction part that add up exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import DesignMatrix, FeatureMap, interaction_moments, main_means
from .errors import DataError
from .model import ModelState

_BRUTEFORCE_MAX_PLAYERS = 20


@dataclass(frozen=True)
class ShapleyQuery:
    """Evaluation points plus frozen population moments.

    ``individuals`` holds standardized main-effect rows x*, one per query
    point. ``means`` is E[x_j] per main column (zeros when the reference
    population is centered) and ``moments`` is E[x_j x_k] per admissible
    pair, aligned with ``feature_map.interaction_index``.
    """

    feature_map: FeatureMap
    individuals: np.ndarray
    means: np.ndarray
    moments: np.ndarray

    def __post_init__(self):
        p = self.feature_map.p_columns
        q = self.feature_map.q
        ind = np.atleast_2d(np.asarray(self.individuals, dtype=np.float64))
        means = np.asarray(self.means, dtype=np.float64)
        moments = np.asarray(self.moments, dtype=np.float64)
        if ind.ndim != 2 or ind.shape[1] != p:
            raise DataError(
                f"individuals must have {p} columns, got shape {ind.shape}"
            )
        if means.shape != (p,):
            raise DataError(f"means must have shape ({p},), got {means.shape}")
        if moments.shape != (q,):
            raise DataError(f"moments must have shape ({q},), got {moments.shape}")
        for label, arr in (("individuals", ind), ("means", means), ("moments", moments)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{label} must be finite")
        object.__setattr__(self, "individuals", ind)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "moments", moments)

    @classmethod
    def from_design(
        cls, population: DesignMatrix, individuals: np.ndarray | DesignMatrix
    ) -> "ShapleyQuery":
        """Freeze moments from a reference design; query the given rows."""
        if isinstance(individuals, DesignMatrix):
            if individuals.feature_map is not population.feature_map:
                raise DataError("individuals were built with a different feature map")
            ind = individuals.X_main
        else:
            ind = individuals
        return cls(
            feature_map=population.feature_map,
            individuals=ind,
            means=main_means(population),
            moments=interaction_moments(population),
        )

    @property
    def n_individuals(self) -> int:
        return self.individuals.shape[0]


@dataclass(frozen=True)
class ColumnAttribution:
    """Per-individual, per-main-column attributions; phi = main + int."""

    phi: np.ndarray
    phi_main: np.ndarray
    phi_int: np.ndarray


@dataclass(frozen=True)
class CovariateAttribution:
    """Per-individual, per-covariate attributions (categoricals aggregated)."""

    phi: np.ndarray
    phi_main: np.ndarray
    phi_int: np.ndarray


@dataclass(frozen=True)
class ShapleyResult:
    """Posterior attribution summary per (individual, covariate).

    Means and equal-tailed interval bounds are reported separately for the
    total, the main-effect part, and the interaction part, all on the
    original response scale.
    """

    covariate_names: tuple[str, ...]
    level: float
    phi_mean: np.ndarray
    phi_lower: np.ndarray
    phi_upper: np.ndarray
    phi_main_mean: np.ndarray
    phi_main_lower: np.ndarray
    phi_main_upper: np.ndarray
    phi_int_mean: np.ndarray
    phi_int_lower: np.ndarray
    phi_int_upper: np.ndarray

    @property
    def n_individuals(self) -> int:
        return self.phi_mean.shape[0]


def _interaction_matrix(values: np.ndarray, fmap: FeatureMap) -> np.ndarray:
    """Symmetric p x p matrix with the per-pair values in both triangles."""
    jj, kk = fmap.pair_arrays()
    out = np.zeros((fmap.p_columns, fmap.p_columns))
    out[jj, kk] = values
    out[kk, jj] = values
    return out


def _check_state(state: ModelState, fmap: FeatureMap) -> None:
    if state.beta_main.shape != (fmap.p_columns,):
        raise DataError(
            f"state has {state.beta_main.shape[0]} main coefficients, "
            f"feature map has {fmap.p_columns}"
        )
    if state.beta_int.shape != (fmap.q,):
        raise DataError(
            f"state has {state.beta_int.shape[0]} interaction coefficients, "
            f"feature map has {fmap.q}"
        )


def mean_prediction(state: ModelState, query: ShapleyQuery) -> float:
    """E[f(x)] under the frozen reference moments."""
    return float(
        state.alpha
        + state.beta_main @ query.means
        + state.beta_int @ query.moments
    )


def point_prediction(state: ModelState, query: ShapleyQuery) -> np.ndarray:
    """f(x*) for each query individual."""
    xs = query.individuals
    jj, kk = query.feature_map.pair_arrays()
    return state.alpha + xs @ state.beta_main + (xs[:, jj] * xs[:, kk]) @ state.beta_int


def shapley_fast(state: ModelState, query: ShapleyQuery) -> ColumnAttribution:
    """Closed-form attribution per main column, O(p) per column.

    phi_p = beta_p (x*_p - mu_p)
            + 1/2 sum_j beta_jp (mu_j x*_p - M_jp)
            + 1/2 sum_j beta_jp (x*_j x*_p - x*_j mu_p)
    where mu holds first moments and M pairwise product moments. The first
    term is the main part, the rest the interaction part.
    """
    fmap = query.feature_map
    _check_state(state, fmap)
    xs = query.individuals
    mu = query.means

    phi_main = (xs - mu) * state.beta_main

    B = _interaction_matrix(state.beta_int, fmap)
    M2 = _interaction_matrix(query.moments, fmap)
    b_mu = B @ mu
    pair_mom = np.sum(B * M2, axis=0)
    xb = xs @ B
    phi_int = 0.5 * (xs * b_mu - pair_mom + xs * xb - mu * xb)

    return ColumnAttribution(
        phi=phi_main + phi_int, phi_main=phi_main, phi_int=phi_int
    )


def shapley_categorical(per_column: np.ndarray, fmap: FeatureMap) -> np.ndarray:
    """Sum contrast-column attributions into one value per covariate."""
    per_column = np.asarray(per_column, dtype=np.float64)
    if per_column.shape[-1] != fmap.p_columns:
        raise DataError(
            f"expected {fmap.p_columns} columns, got {per_column.shape[-1]}"
        )
    agg = np.zeros((fmap.p_columns, fmap.p_covariates))
    agg[np.arange(fmap.p_columns), np.asarray(fmap.group_of)] = 1.0
    return per_column @ agg


def aggregate_columns(att: ColumnAttribution, fmap: FeatureMap) -> CovariateAttribution:
    """Column attribution to covariate attribution, all three parts."""
    return CovariateAttribution(
        phi=shapley_categorical(att.phi, fmap),
        phi_main=shapley_categorical(att.phi_main, fmap),
        phi_int=shapley_categorical(att.phi_int, fmap),
    )


def shapley_bruteforce(state: ModelState, query: ShapleyQuery) -> CovariateAttribution:
    """Subset-enumeration oracle over covariates as players.

    Non-players are integrated out using the frozen moments: a product of
    two non-players contributes E[x_j x_k], a player–non-player product
    contributes x*_j E[x_k]. Cost 2^players, so refuse large player sets.
    """
    fmap = query.feature_map
    _check_state(state, fmap)
    n_players = fmap.p_covariates
    if n_players > _BRUTEFORCE_MAX_PLAYERS:
        raise DataError(
            f"brute force enumerates 2^{n_players} subsets; "
            f"refusing above {_BRUTEFORCE_MAX_PLAYERS} covariates"
        )

    xs = query.individuals
    mu = query.means
    M = query.moments
    group = np.asarray(fmap.group_of)
    jj, kk = fmap.pair_arrays()
    m = xs.shape[0]

    xs_pair = xs[:, jj] * xs[:, kk]
    xs_mu = xs[:, jj] * mu[kk]
    mu_xs = mu[jj] * xs[:, kk]

    # nu(S) split into main and interaction parts, cached per subset mask.
    nu_main = np.empty((1 << n_players, m))
    nu_int = np.empty((1 << n_players, m))
    for mask in range(1 << n_players):
        in_s = (mask >> group) & 1 == 1
        e = np.where(in_s, xs, mu)
        nu_main[mask] = state.alpha + e @ state.beta_main
        inj = in_s[jj]
        ink = in_s[kk]
        u = np.where(
            inj & ink, xs_pair, np.where(inj, xs_mu, np.where(ink, mu_xs, M))
        )
        nu_int[mask] = u @ state.beta_int

    size_weight = [
        1.0 / (n_players * math.comb(n_players - 1, s)) for s in range(n_players)
    ]
    phi_main = np.zeros((m, n_players))
    phi_int = np.zeros((m, n_players))
    full = (1 << n_players) - 1
    for mask in range(1 << n_players):
        if mask == full:
            continue
        w = size_weight[bin(mask).count("1")]
        for c in range(n_players):
            if mask & (1 << c):
                continue
            with_c = mask | (1 << c)
            phi_main[:, c] += w * (nu_main[with_c] - nu_main[mask])
            phi_int[:, c] += w * (nu_int[with_c] - nu_int[mask])

    return CovariateAttribution(
        phi=phi_main + phi_int, phi_main=phi_main, phi_int=phi_int
    )


def shapley_posterior(draws, query: ShapleyQuery, level: float = 0.95) -> ShapleyResult:
    """Propagate attribution through retained draws.

    Moments stay frozen; only coefficients vary across draws. Attributions
    are mapped back to the original response scale via the draws' stored
    response scale.
    """
    if not 0.0 < level < 1.0:
        raise DataError(f"level must be in (0, 1), got {level}")
    fmap = query.feature_map
    if fmap is not draws.feature_map:
        raise DataError("query and draws use different feature maps")
    n_draws = draws.n_draws
    if n_draws == 0:
        raise DataError("no draws to summarize")

    m = query.n_individuals
    n_cov = fmap.p_covariates
    phi = np.empty((n_draws, m, n_cov))
    phi_main = np.empty((n_draws, m, n_cov))
    phi_int = np.empty((n_draws, m, n_cov))
    scale = draws.response_scale
    for s in range(n_draws):
        att = aggregate_columns(shapley_fast(draws.state(s), query), fmap)
        phi[s] = scale * att.phi
        phi_main[s] = scale * att.phi_main
        phi_int[s] = scale * att.phi_int

    lo_q = (1.0 - level) / 2.0
    hi_q = 1.0 - lo_q

    def summarize(arr):
        return (
            arr.mean(axis=0),
            np.quantile(arr, lo_q, axis=0),
            np.quantile(arr, hi_q, axis=0),
        )

    phi_mean, phi_lo, phi_hi = summarize(phi)
    main_mean, main_lo, main_hi = summarize(phi_main)
    int_mean, int_lo, int_hi = summarize(phi_int)
    return ShapleyResult(
        covariate_names=tuple(fmap.covariate_names),
        level=level,
        phi_mean=phi_mean,
        phi_lower=phi_lo,
        phi_upper=phi_hi,
        phi_main_mean=main_mean,
        phi_main_lower=main_lo,
        phi_main_upper=main_hi,
        phi_int_mean=int_mean,
        phi_int_lower=int_lo,
        phi_int_upper=int_hi,
    )


def result_table(result: ShapleyResult) -> tuple[list[str], list[np.ndarray]]:
    """Long-format header and columns, one row per (individual, covariate)."""
    m = result.n_individuals
    n_cov = len(result.covariate_names)
    ids = np.repeat(np.arange(m), n_cov)
    names = np.tile(np.asarray(result.covariate_names, dtype=object), m)
    header = [
        "individual_id",
        "covariate",
        "phi_mean",
        "phi_lower",
        "phi_upper",
        "phi_main_mean",
        "phi_int_mean",
    ]
    cols = [
        ids,
        names,
        result.phi_mean.ravel(),
        result.phi_lower.ravel(),
        result.phi_upper.ravel(),
        result.phi_main_mean.ravel(),
        result.phi_int_mean.ravel(),
    ]
    return header, cols
