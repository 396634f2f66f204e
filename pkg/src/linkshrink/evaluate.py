"""Evaluation protocols: repeated-subset fits scored against a master benchmark.

The master dataset plays the role of the population: its least-squares fit
supplies benchmark coefficients and the significance labels, and its feature
map fixes the standardization used for every training subset so estimates
stay directly comparable. Each training subset is fitted by the configured
methods and scored on coefficient error, detection, held-out prediction, and
attribution-interval coverage.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import write_key_values, write_table
from .design import DesignMatrix, apply_feature_map
from .errors import DataError
from .model import VARIANTS, ModelSpec
from .reference_ols import OlsFit, fit_ols, fit_ols_matrix
from .sampler import PosteriorDraws, SamplerConfig, run_sampler
from .shapley import (
    ShapleyQuery,
    ShapleyResult,
    aggregate_columns,
    shapley_fast,
    shapley_posterior,
)
from .synth import MasterData, SynthConfig, split_training_sets

POSITIVE = "positive"
NEGATIVE = "negative"
INDETERMINATE = "indeterminate"

OLS_METHODS = ("ols", "olsmain", "twostep")


def rmse(estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Root mean squared error per coefficient over replicate estimates."""
    estimates = np.asarray(estimates, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimates.ndim != 2 or estimates.shape[1] != truth.shape[0]:
        raise DataError(
            f"estimates shape {estimates.shape} does not match "
            f"{truth.shape[0]} coefficients"
        )
    if estimates.shape[0] < 1:
        raise DataError("need at least one replicate")
    return np.sqrt(np.mean((estimates - truth) ** 2, axis=0))


def detect_credible(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Detected iff the equal-tailed interval excludes zero."""
    return (np.asarray(lower) > 0.0) | (np.asarray(upper) < 0.0)


def detect_pvalue(p_values: np.ndarray, alpha: float) -> np.ndarray:
    """Detected iff p <= alpha (boundary inclusive)."""
    return np.asarray(p_values) <= alpha


def _coefficient_quantiles(draws: PosteriorDraws, quantiles) -> np.ndarray:
    """Quantiles of the non-intercept coefficients, shape (len(q), p+q)."""
    coef = draws.coefficients()[:, 1:]
    return np.quantile(coef, quantiles, axis=0)


def detect(fit, rule) -> np.ndarray:
    """Per-coefficient detection for the p+q non-intercept coefficients.

    ``rule`` is ("credible", level) for posterior draws or
    ("pvalue", alpha) for a least-squares fit.
    """
    kind, value = rule
    if kind == "credible":
        if not isinstance(fit, PosteriorDraws):
            raise DataError("credible rule needs posterior draws")
        half = 0.5 * (1.0 - value)
        lo, hi = _coefficient_quantiles(fit, [half, 1.0 - half])
        return detect_credible(lo, hi)
    if kind == "pvalue":
        if not isinstance(fit, OlsFit):
            raise DataError("pvalue rule needs a least-squares fit")
        return detect_pvalue(fit.p_values[1:], value)
    raise DataError(f"unknown detection rule {kind!r}")


def label_coefficients(
    master_fit: OlsFit, strict_cut: float | None = None, loose_cut: float = 0.05
) -> np.ndarray:
    """Label the p+q coefficients from the master fit's p-values.

    positive: p <= strict_cut (default 0.05 divided by the coefficient
    count); negative: p > loose_cut; indeterminate: in between.
    """
    p_values = master_fit.p_values[1:]
    k = p_values.shape[0]
    if strict_cut is None:
        strict_cut = 0.05 / k
    labels = np.full(k, INDETERMINATE, dtype=object)
    labels[p_values <= strict_cut] = POSITIVE
    labels[p_values > loose_cut] = NEGATIVE
    return labels


def roc_points(
    detections: np.ndarray, labels: np.ndarray
) -> list[tuple[float, float]]:
    """(specificity, sensitivity) per threshold, averaged over subsets.

    ``detections`` has shape (thresholds, subsets, coefficients);
    indeterminate coefficients are excluded from both rates.
    """
    detections = np.asarray(detections, dtype=bool)
    labels = np.asarray(labels, dtype=object)
    if detections.ndim != 3 or detections.shape[2] != labels.shape[0]:
        raise DataError(
            f"detections shape {detections.shape} does not match "
            f"{labels.shape[0]} labels"
        )
    pos = labels == POSITIVE
    neg = labels == NEGATIVE
    if not np.any(pos):
        raise DataError("no positive coefficients under the master labeling")
    if not np.any(neg):
        raise DataError("no negative coefficients under the master labeling")
    out = []
    for t in range(detections.shape[0]):
        sensitivity = float(detections[t][:, pos].mean())
        specificity = float(1.0 - detections[t][:, neg].mean())
        out.append((specificity, sensitivity))
    return out


def r_squared(y_test: np.ndarray, y_pred: np.ndarray, y_bar_reference: float) -> float:
    """1 - SSE / total squares around the supplied reference mean."""
    y_test = np.asarray(y_test, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_test.shape != y_pred.shape or y_test.ndim != 1 or y_test.size == 0:
        raise DataError("predictions and responses must be equal-length vectors")
    denom = float(np.sum((y_test - y_bar_reference) ** 2))
    if denom == 0.0:
        raise DataError("reference mean leaves zero total variation")
    return 1.0 - float(np.sum((y_test - y_pred) ** 2)) / denom


def shapley_coverage(
    results: list[ShapleyResult], true_phi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Interval coverage of the true attribution across replicate fits.

    Returns per-individual coverage (m, covariates) and the per-covariate
    quartiles (covariates, 3) as columns q1, median, q3 over individuals.
    """
    if not results:
        raise DataError("no replicate results")
    m, n_cov = results[0].phi_mean.shape
    if true_phi.shape != (m, n_cov):
        raise DataError(
            f"true attribution shape {true_phi.shape} does not match ({m}, {n_cov})"
        )
    hits = np.zeros((m, n_cov))
    for res in results:
        if res.phi_mean.shape != (m, n_cov):
            raise DataError("replicate results disagree in shape")
        hits += (res.phi_lower <= true_phi) & (true_phi <= res.phi_upper)
    coverage = hits / len(results)
    quartiles = np.quantile(coverage, [0.25, 0.5, 0.75], axis=0).T
    return coverage, quartiles


@dataclass(frozen=True)
class ProtocolConfig:
    """Settings for the repeated-training-set comparison."""

    methods: tuple[str, ...] = ("bayint", "ols", "twostep")
    sampler: SamplerConfig = field(
        default_factory=lambda: SamplerConfig(n_chains=2, n_warmup=500, n_keep=500)
    )
    level: float = 0.95
    alpha: float = 0.05
    bayes_levels: tuple[float, ...] = (0.80, 0.85, 0.90, 0.95, 0.99, 0.999)
    alpha_grid: tuple[float, ...] = (0.2, 0.15, 0.1, 0.05, 0.01, 0.001)
    n_test: int = 2000
    coverage: bool = False
    n_individuals: int = 100
    twostep_keep_alpha: float = 0.05

    def __post_init__(self):
        valid = ", ".join(sorted(VARIANTS) + list(OLS_METHODS))
        for m in self.methods:
            if m not in VARIANTS and m not in OLS_METHODS:
                raise DataError(f"unknown method {m!r}; valid methods: {valid}")
        if not self.methods:
            raise DataError("no methods configured")
        if not 0.0 < self.level < 1.0 or not 0.0 < self.alpha < 1.0:
            raise DataError("level and alpha must be in (0, 1)")


@dataclass(frozen=True)
class EvalReport:
    """Aggregated tables of the repeated-subset comparison."""

    coefficient_names: tuple[str, ...]
    methods: tuple[str, ...]
    labels: np.ndarray
    master_estimates: np.ndarray
    rmse_table: dict[str, np.ndarray]
    detection_table: dict[str, np.ndarray]
    roc_curve: dict[str, list[tuple[float, float]]]
    roc_thresholds: dict[str, tuple[float, ...]]
    r2_table: dict[str, np.ndarray]
    coverage_quartiles: np.ndarray | None
    coverage_names: tuple[str, ...] | None


def _design_stack(X: DesignMatrix) -> np.ndarray:
    return np.hstack([np.ones((X.n, 1)), X.X_main, X.X_int])


@dataclass
class _SubsetScore:
    estimates: np.ndarray
    detected: np.ndarray
    detected_grid: np.ndarray
    r2_in: float
    r2_out: float
    shapley: ShapleyResult | None = None


def _score_predictions(
    estimates: np.ndarray,
    M_train: np.ndarray,
    y_train: np.ndarray,
    M_test: np.ndarray,
    y_test: np.ndarray,
) -> tuple[float, float]:
    y_bar = float(y_train.mean())
    r2_in = r_squared(y_train, M_train @ estimates, y_bar)
    r2_out = r_squared(y_test, M_test @ estimates, y_bar)
    return r2_in, r2_out


def _run_bayes(
    variant: str,
    X_train: DesignMatrix,
    y_train: np.ndarray,
    M_train: np.ndarray,
    M_test: np.ndarray,
    y_test: np.ndarray,
    cfg: ProtocolConfig,
    seed: int,
    query: ShapleyQuery | None,
) -> _SubsetScore:
    sampler_cfg = replace(cfg.sampler, seed=seed)
    draws = run_sampler(ModelSpec(variant), X_train, y_train, sampler_cfg)
    coef = draws.coefficients()
    estimates = coef.mean(axis=0)

    halves = [0.5 * (1.0 - lv) for lv in cfg.bayes_levels]
    qs = halves + [1.0 - h for h in halves] + [
        0.5 * (1.0 - cfg.level),
        1.0 - 0.5 * (1.0 - cfg.level),
    ]
    quants = _coefficient_quantiles(draws, qs)
    n_lv = len(cfg.bayes_levels)
    grid = np.stack(
        [detect_credible(quants[i], quants[n_lv + i]) for i in range(n_lv)]
    )
    detected = detect_credible(quants[-2], quants[-1])

    r2_in, r2_out = _score_predictions(estimates, M_train, y_train, M_test, y_test)
    shap = shapley_posterior(draws, query, cfg.level) if query is not None else None
    return _SubsetScore(estimates, detected, grid, r2_in, r2_out, shap)


def _expand_main_fit(fit: OlsFit, p: int, q: int) -> np.ndarray:
    estimates = np.zeros(1 + p + q)
    estimates[: 1 + p] = fit.coefficients
    return estimates


def _run_ols_family(
    method: str,
    X_train: DesignMatrix,
    y_train: np.ndarray,
    M_train: np.ndarray,
    M_test: np.ndarray,
    y_test: np.ndarray,
    cfg: ProtocolConfig,
) -> _SubsetScore:
    fmap = X_train.feature_map
    p, q = fmap.p_columns, fmap.q
    k = p + q
    p_vec = np.ones(k)  # undetectable entries keep p = 1

    if method == "ols":
        fit = fit_ols(X_train, y_train)
        estimates = fit.coefficients
        p_vec = fit.p_values[1:]
    elif method == "olsmain":
        names = ["alpha"] + ["b_" + c for c in fmap.main_names]
        fit = fit_ols_matrix(M_train[:, : 1 + p], y_train, names)
        estimates = _expand_main_fit(fit, p, q)
        p_vec[:p] = fit.p_values[1:]
    elif method == "twostep":
        names = ["alpha"] + ["b_" + c for c in fmap.main_names]
        first = fit_ols_matrix(M_train[:, : 1 + p], y_train, names)
        keep = first.p_values[1:] < cfg.twostep_keep_alpha
        jj, kk = fmap.pair_arrays()
        keep_pairs = keep[jj] & keep[kk]

        col_idx = [0] + [1 + j for j in range(p) if keep[j]] + [
            1 + p + r for r in range(q) if keep_pairs[r]
        ]
        sub_names = ["alpha"] + [
            "b_" + fmap.main_names[j] for j in range(p) if keep[j]
        ] + ["b_" + fmap.interaction_names[r] for r in range(q) if keep_pairs[r]]
        fit = fit_ols_matrix(M_train[:, col_idx], y_train, sub_names)
        estimates = np.zeros(1 + k)
        estimates[col_idx] = fit.coefficients
        for pos, col in enumerate(col_idx[1:], start=1):
            p_vec[col - 1] = fit.p_values[pos]
    else:
        raise DataError(f"unknown method {method!r}")

    grid = np.stack([detect_pvalue(p_vec, a) for a in cfg.alpha_grid])
    detected = detect_pvalue(p_vec, cfg.alpha)
    r2_in, r2_out = _score_predictions(estimates, M_train, y_train, M_test, y_test)
    return _SubsetScore(estimates, detected, grid, r2_in, r2_out)


def run_protocol(
    master: MasterData, synth_cfg: SynthConfig, cfg: ProtocolConfig
) -> EvalReport:
    """Fit every configured method on every training subset and aggregate.

    All subsets are standardized with the master feature map, so subset
    estimates, the master benchmark, and true attributions share one scale.
    """
    fmap = master.feature_map
    dataset = master.dataset
    X_master = apply_feature_map(fmap, dataset)
    y_master = dataset.response
    master_fit = fit_ols(X_master, y_master)
    labels = label_coefficients(master_fit)

    blocks = split_training_sets(dataset, synth_cfg)
    used = np.unique(np.concatenate(blocks))
    held_out = np.setdiff1d(np.arange(dataset.n_rows), used)
    if held_out.size == 0:
        raise DataError(
            "no held-out rows left for out-of-bag scoring; "
            "reduce B or n_train relative to the master size"
        )
    test_rows = held_out[: cfg.n_test]

    test_data = dataset.subset(test_rows)
    X_test = apply_feature_map(fmap, test_data)
    M_test = _design_stack(X_test)
    y_test = test_data.response

    query = None
    true_phi = None
    if cfg.coverage:
        individuals = X_test.X_main[: cfg.n_individuals]
        query = ShapleyQuery(
            feature_map=fmap,
            individuals=individuals,
            means=X_master.X_main.mean(axis=0),
            moments=X_master.X_int.mean(axis=0),
        )
        master_state = _state_from_coefficients(master_fit.coefficients, fmap)
        true_phi = aggregate_columns(shapley_fast(master_state, query), fmap).phi

    scores: dict[str, list[_SubsetScore]] = {m: [] for m in cfg.methods}
    for b, rows in enumerate(blocks):
        sub = dataset.subset(rows)
        X_train = apply_feature_map(fmap, sub)
        y_train = sub.response
        M_train = _design_stack(X_train)
        for method in cfg.methods:
            if method in VARIANTS:
                score = _run_bayes(
                    method,
                    X_train,
                    y_train,
                    M_train,
                    M_test,
                    y_test,
                    cfg,
                    seed=cfg.sampler.seed + b,
                    query=query,
                )
            else:
                score = _run_ols_family(
                    method, X_train, y_train, M_train, M_test, y_test, cfg
                )
            scores[method].append(score)

    rmse_table = {}
    detection_table = {}
    roc_curve = {}
    roc_thresholds = {}
    r2_table = {}
    coverage_quartiles = None
    coverage_names = None
    for method, per_subset in scores.items():
        estimates = np.stack([s.estimates for s in per_subset])
        rmse_table[method] = rmse(estimates, master_fit.coefficients)
        detection_table[method] = np.mean(
            np.stack([s.detected for s in per_subset]), axis=0
        )
        grid = np.stack([s.detected_grid for s in per_subset], axis=1)
        roc_curve[method] = roc_points(grid, labels)
        roc_thresholds[method] = (
            cfg.bayes_levels if method in VARIANTS else cfg.alpha_grid
        )
        r2_table[method] = np.array([(s.r2_in, s.r2_out) for s in per_subset])
        if cfg.coverage and method in VARIANTS and per_subset[0].shapley is not None:
            results = [s.shapley for s in per_subset]
            _, coverage_quartiles = shapley_coverage(results, true_phi)
            coverage_names = tuple(fmap.covariate_names)

    return EvalReport(
        coefficient_names=tuple(master_fit.names),
        methods=cfg.methods,
        labels=labels,
        master_estimates=master_fit.coefficients,
        rmse_table=rmse_table,
        detection_table=detection_table,
        roc_curve=roc_curve,
        roc_thresholds=roc_thresholds,
        r2_table=r2_table,
        coverage_quartiles=coverage_quartiles,
        coverage_names=coverage_names,
    )


def _state_from_coefficients(coefficients: np.ndarray, fmap):
    from .model import ModelState

    p = fmap.p_columns
    return ModelState(
        alpha=float(coefficients[0]),
        beta_main=np.asarray(coefficients[1 : 1 + p], dtype=np.float64),
        beta_int=np.asarray(coefficients[1 + p :], dtype=np.float64),
        tau=np.ones(p),
        tau_int=1.0,
        sigma2=1.0,
    )


def write_report(report: EvalReport, directory: str | os.PathLike) -> None:
    """One delimiter-separated file per table plus a flat summary."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)

    names = np.asarray(report.coefficient_names, dtype=object)
    write_table(
        os.path.join(directory, "rmse.tsv"),
        ["coefficient"] + list(report.methods),
        [names] + [report.rmse_table[m] for m in report.methods],
    )
    write_table(
        os.path.join(directory, "detection.tsv"),
        ["coefficient", "label"] + list(report.methods),
        [names[1:], report.labels]
        + [report.detection_table[m] for m in report.methods],
    )

    roc_rows = []
    for method in report.methods:
        for thr, (spec_v, sens_v) in zip(
            report.roc_thresholds[method], report.roc_curve[method]
        ):
            roc_rows.append((method, thr, spec_v, sens_v))
    write_table(
        os.path.join(directory, "roc.tsv"),
        ["method", "threshold", "specificity", "sensitivity"],
        [np.array([r[i] for r in roc_rows], dtype=object) for i in range(4)],
    )

    r2_rows = []
    for method in report.methods:
        for b, (r2i, r2o) in enumerate(report.r2_table[method]):
            r2_rows.append((method, b, r2i, r2o))
    write_table(
        os.path.join(directory, "r2.tsv"),
        ["method", "subset", "in_bag", "out_of_bag"],
        [np.array([r[i] for r in r2_rows], dtype=object) for i in range(4)],
    )

    if report.coverage_quartiles is not None:
        write_table(
            os.path.join(directory, "coverage.tsv"),
            ["covariate", "q1", "median", "q3"],
            [
                np.asarray(report.coverage_names, dtype=object),
                report.coverage_quartiles[:, 0],
                report.coverage_quartiles[:, 1],
                report.coverage_quartiles[:, 2],
            ],
        )

    summary: dict[str, object] = {
        "coefficients": len(report.coefficient_names),
        "methods": ",".join(report.methods),
        "labels.positive": int(np.sum(report.labels == POSITIVE)),
        "labels.negative": int(np.sum(report.labels == NEGATIVE)),
        "labels.indeterminate": int(np.sum(report.labels == INDETERMINATE)),
    }
    for method in report.methods:
        summary[f"rmse.{method}.mean"] = float(report.rmse_table[method].mean())
        summary[f"rmse.{method}.max"] = float(report.rmse_table[method].max())
        r2 = report.r2_table[method]
        summary[f"r2.{method}.in_bag.mean"] = float(r2[:, 0].mean())
        summary[f"r2.{method}.out_of_bag.mean"] = float(r2[:, 1].mean())
    write_key_values(os.path.join(directory, "summary.txt"), summary)
