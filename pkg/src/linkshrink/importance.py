"""Personalized unit-change effects and global importance scores.

The unit-change effect of covariate j for individual i is the derivative of
the fitted surface in the standardized coordinate, beta_j plus the
interaction terms evaluated at the individual's other covariate values. The
global importance of a covariate averages the magnitude of its attribution
over a test set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import CONTINUOUS, BINARY, FeatureMap
from .errors import DataError
from .shapley import ShapleyQuery, ShapleyResult, aggregate_columns, shapley_fast


@dataclass(frozen=True)
class UnitEffect:
    """Posterior summary of E_ij over test individuals for one covariate."""

    covariate: str
    level: float
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class GlobalImportance:
    """Mean absolute attribution per covariate, with the main/int parts."""

    covariate_names: tuple[str, ...]
    importance: np.ndarray
    importance_main: np.ndarray
    importance_int: np.ndarray


def _column_of_single_covariate(fmap: FeatureMap, j: int) -> int:
    if not 0 <= j < fmap.p_covariates:
        raise DataError(
            f"covariate index {j} out of range for {fmap.p_covariates} covariates"
        )
    kind = fmap.covariate_kinds[j]
    if kind not in (CONTINUOUS, BINARY):
        raise DataError(
            f"covariate {fmap.covariate_names[j]!r} is categorical; a unit "
            "change is not defined for it, use the attribution values instead"
        )
    cols = fmap.columns_of_covariate(j)
    return int(cols[0])


def unit_effect_posterior(
    draws, X_test: np.ndarray, j: int, level: float = 0.95
) -> UnitEffect:
    """Posterior of E_ij = beta_j + sum_k beta_jk x_ik for each test row.

    ``X_test`` holds standardized main-effect rows; ``j`` indexes a
    continuous or binary covariate. Reported on the sampled response scale
    times the draws' stored response scale.
    """
    if not 0.0 < level < 1.0:
        raise DataError(f"level must be in (0, 1), got {level}")
    fmap = draws.feature_map
    col = _column_of_single_covariate(fmap, j)
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if X_test.shape[1] != fmap.p_columns:
        raise DataError(
            f"test rows must have {fmap.p_columns} columns, got {X_test.shape[1]}"
        )
    if not np.all(np.isfinite(X_test)):
        raise DataError("test rows must be finite")

    rows, partners = fmap.pairs_touching(col)
    rows = np.asarray(rows, dtype=int)
    partners = np.asarray(partners, dtype=int)

    # effects: (n_draws, m) = beta_col + X_partners @ beta_pairs
    effects = np.broadcast_to(
        draws.beta_main[:, col][:, None], (draws.n_draws, X_test.shape[0])
    ).copy()
    if rows.size:
        effects += draws.beta_int[:, rows] @ X_test[:, partners].T
    effects *= draws.response_scale

    lo_q = (1.0 - level) / 2.0
    # Contiguous per-column means match the per-parameter summary exactly
    # when the interaction sum vanishes.
    mean = np.array(
        [np.ascontiguousarray(effects[:, i]).mean() for i in range(effects.shape[1])]
    )
    return UnitEffect(
        covariate=fmap.covariate_names[j],
        level=level,
        mean=mean,
        lower=np.quantile(effects, lo_q, axis=0),
        upper=np.quantile(effects, 1.0 - lo_q, axis=0),
    )


def global_importance_from_result(result: ShapleyResult) -> GlobalImportance:
    """Mean |posterior-mean attribution| over individuals, per covariate."""
    if result.phi_mean.shape[0] == 0:
        raise DataError("no individuals to average over")
    return GlobalImportance(
        covariate_names=result.covariate_names,
        importance=np.mean(np.abs(result.phi_mean), axis=0),
        importance_main=np.mean(np.abs(result.phi_main_mean), axis=0),
        importance_int=np.mean(np.abs(result.phi_int_mean), axis=0),
    )


def global_importance(
    draws, query: ShapleyQuery, per_draw: bool = False
) -> GlobalImportance:
    """Global importance over the query individuals.

    Default scores |phi| at the posterior-mean coefficients (attribution is
    linear in coefficients, so this equals the posterior mean of phi).
    ``per_draw`` instead averages |phi| across draws before averaging over
    individuals, which accounts for sign uncertainty.
    """
    fmap = query.feature_map
    if fmap is not draws.feature_map:
        raise DataError("query and draws use different feature maps")
    if query.n_individuals == 0:
        raise DataError("no individuals to average over")
    if draws.n_draws == 0:
        raise DataError("no draws to summarize")
    scale = draws.response_scale

    if per_draw:
        acc_phi = None
        for s in range(draws.n_draws):
            att = aggregate_columns(shapley_fast(draws.state(s), query), fmap)
            absed = (np.abs(att.phi), np.abs(att.phi_main), np.abs(att.phi_int))
            if acc_phi is None:
                acc_phi, acc_main, acc_int = [a.copy() for a in absed]
            else:
                acc_phi += absed[0]
                acc_main += absed[1]
                acc_int += absed[2]
        n = draws.n_draws
        phi, phi_main, phi_int = acc_phi / n, acc_main / n, acc_int / n
    else:
        state = draws.state(0)
        state.alpha = float(draws.alpha.mean())
        state.beta_main = draws.beta_main.mean(axis=0)
        state.beta_int = draws.beta_int.mean(axis=0)
        att = aggregate_columns(shapley_fast(state, query), fmap)
        phi = np.abs(att.phi)
        phi_main = np.abs(att.phi_main)
        phi_int = np.abs(att.phi_int)

    return GlobalImportance(
        covariate_names=tuple(fmap.covariate_names),
        importance=scale * phi.mean(axis=0),
        importance_main=scale * phi_main.mean(axis=0),
        importance_int=scale * phi_int.mean(axis=0),
    )


def importance_table(imp: GlobalImportance) -> tuple[list[str], list[np.ndarray]]:
    header = ["covariate", "importance", "importance_main", "importance_int"]
    cols = [
        np.asarray(imp.covariate_names, dtype=object),
        imp.importance,
        imp.importance_main,
        imp.importance_int,
    ]
    return header, cols


def unit_effect_table(
    eff: UnitEffect,
    stratifier_name: str | None = None,
    stratifier: np.ndarray | None = None,
) -> tuple[list[str], list[np.ndarray]]:
    """Rows per individual; an optional stratifier column supports grouped plots."""
    m = eff.mean.shape[0]
    header = ["individual_id", "covariate", "mean", "lower", "upper"]
    cols = [
        np.arange(m),
        np.asarray([eff.covariate] * m, dtype=object),
        eff.mean,
        eff.lower,
        eff.upper,
    ]
    if stratifier_name is not None:
        strat = np.asarray(stratifier)
        if strat.shape != (m,):
            raise DataError(
                f"stratifier must have one value per individual, got {strat.shape}"
            )
        header.append(stratifier_name)
        cols.append(strat)
    return header, cols
