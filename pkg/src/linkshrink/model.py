"""Hierarchical shrinkage priors for two-way interaction regression.

The response is modeled as alpha + X_main beta_main + X_int beta_int + noise
with noise variance sigma2. Coefficient priors are zero-mean Gaussians whose
variances are sigma2 times a relative variance built from local scales tau
and, for interactions, a global factor tau_int in [0.01, 1]:

  bayint      main j: tau_j^2          interaction (j,k): tau_j tau_k tau_int
  bayintstar  same with tau_int fixed at 1
  bayintadd   main j: tau_j^2          interaction (j,k): ((tau_j^2+tau_k^2)/2) tau_int
  bay0int     main j: flat sd, no shrinkage; interaction (j,k): tau_j tau_k tau_int
  bayloc      every coefficient has its own tau^2, no tau_int

Each tau is half-Cauchy(0,1), tau_int is uniform on its bounds, sigma2 is
inverse-gamma in shape-rate form (density proportional to x^-(a+1) e^(-b/x)),
and the intercept prior N(0, intercept_sd^2) is not scaled by sigma2.

This module evaluates the joint log-density and the one-dimensional
conditional targets for the tau updates. The conditionals are returned as
fast scalar closures with all tau-independent normalizing constants included,
so they differ from log_joint by a quantity that does not depend on the tau
being updated.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .design import DesignMatrix, FeatureMap
from .errors import DataError

BAYINT = "bayint"
BAYINTSTAR = "bayintstar"
BAYINTADD = "bayintadd"
BAY0INT = "bay0int"
BAYLOC = "bayloc"
VARIANTS = (BAYINT, BAYINTSTAR, BAYINTADD, BAY0INT, BAYLOC)

_LOG_HALF_CAUCHY = math.log(2.0 / math.pi)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ModelSpec:
    """Variant selector plus the fixed hyperparameters of the prior."""

    variant: str = BAYINT
    intercept_sd: float = 10.0
    tau_int_bounds: tuple[float, float] = (0.01, 1.0)
    sigma2_prior: tuple[float, float] = (1.0, 0.001)  # shape, rate
    main_flat_sd: float = 10.0  # bay0int main effects only

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise DataError(f"unknown variant '{self.variant}' (expected one of {', '.join(VARIANTS)})")
        if self.intercept_sd <= 0 or self.main_flat_sd <= 0:
            raise DataError("prior standard deviations must be positive")
        lo, hi = self.tau_int_bounds
        if not (0 < lo < hi):
            raise DataError("tau_int bounds must satisfy 0 < lower < upper")

    @property
    def has_tau_int(self) -> bool:
        return self.variant in (BAYINT, BAYINTADD, BAY0INT)

    def n_tau(self, p: int, q: int) -> int:
        return p + q if self.variant == BAYLOC else p


@dataclass
class ModelState:
    """One point in parameter space. Owned by a single chain while sampling."""

    alpha: float
    beta_main: np.ndarray
    beta_int: np.ndarray
    tau: np.ndarray
    tau_int: float
    sigma2: float

    def copy(self) -> "ModelState":
        return ModelState(
            self.alpha,
            self.beta_main.copy(),
            self.beta_int.copy(),
            self.tau.copy(),
            self.tau_int,
            self.sigma2,
        )


@dataclass(frozen=True)
class PriorVarianceTable:
    """Relative prior variances: multiply by sigma2 to get absolute variances."""

    main_rel_var: np.ndarray
    int_rel_var: np.ndarray


def initial_state(spec: ModelSpec, fmap: FeatureMap, y: np.ndarray,
                  tau: float = 1.0, tau_int: float = 0.5,
                  sigma2: float | None = None) -> ModelState:
    """Neutral starting point: zero coefficients, unit local scales."""
    p, q = fmap.p_columns, fmap.q
    if sigma2 is None:
        sigma2 = float(np.var(y))
        if sigma2 == 0.0:
            sigma2 = 1.0
    return ModelState(
        alpha=0.0,
        beta_main=np.zeros(p),
        beta_int=np.zeros(q),
        tau=np.full(spec.n_tau(p, q), float(tau)),
        tau_int=1.0 if spec.variant == BAYINTSTAR else float(tau_int),
        sigma2=float(sigma2),
    )


def validate_state(spec: ModelSpec, state: ModelState, fmap: FeatureMap) -> None:
    p, q = fmap.p_columns, fmap.q
    if state.beta_main.shape != (p,) or state.beta_int.shape != (q,):
        raise DataError(
            f"coefficient shapes {state.beta_main.shape}, {state.beta_int.shape} "
            f"do not match the feature map (p={p}, q={q})"
        )
    want = spec.n_tau(p, q)
    if state.tau.shape != (want,):
        raise DataError(f"variant {spec.variant} needs {want} local scales, got {state.tau.shape[0]}")
    if spec.variant == BAYINTSTAR and state.tau_int != 1.0:
        raise DataError("bayintstar fixes tau_int at 1")


def prior_variances(spec: ModelSpec, state: ModelState, fmap: FeatureMap) -> PriorVarianceTable:
    """Relative prior variances of all p main and q interaction coefficients."""
    validate_state(spec, state, fmap)
    p, q = fmap.p_columns, fmap.q
    jj, kk = fmap.pair_arrays()
    tau = state.tau
    if spec.variant == BAYLOC:
        return PriorVarianceTable(tau[:p] ** 2, tau[p:] ** 2)
    if spec.variant == BAYINTADD:
        int_rel = 0.5 * (tau[jj] ** 2 + tau[kk] ** 2) * state.tau_int
        return PriorVarianceTable(tau**2, int_rel)
    int_rel = tau[jj] * tau[kk] * state.tau_int
    if spec.variant == BAY0INT:
        # fixed absolute sd on the mains: relative variance carries 1/sigma2
        main_rel = np.full(p, spec.main_flat_sd**2 / state.sigma2)
    else:
        main_rel = tau**2
    return PriorVarianceTable(main_rel, int_rel)


def sigma2_scaled_mask(spec: ModelSpec, p: int, q: int) -> np.ndarray:
    """Which of the p+q coefficients have a prior variance proportional to sigma2.

    The intercept never does. bay0int keeps its main effects at a fixed
    absolute sd, so only its interactions are scaled.
    """
    mask = np.ones(p + q, dtype=bool)
    if spec.variant == BAY0INT:
        mask[:p] = False
    return mask


def log_joint(spec: ModelSpec, state: ModelState, X: DesignMatrix, y: np.ndarray) -> float:
    """Unnormalized joint log-density of data and parameters.

    Includes every normalizing constant of the stated densities, so only the
    marginal likelihood is missing. Returns -inf outside the support.
    """
    validate_state(spec, state, fmap := X.feature_map)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != X.n:
        raise DataError(f"response length {y.shape[0]} does not match design rows {X.n}")
    pieces = [state.alpha, state.tau_int, state.sigma2]
    if not (np.all(np.isfinite(state.beta_main)) and np.all(np.isfinite(state.beta_int))
            and np.all(np.isfinite(state.tau)) and np.all(np.isfinite(pieces))):
        raise DataError("non-finite values in model state")

    if state.sigma2 <= 0.0 or np.any(state.tau <= 0.0):
        return -math.inf
    lo, hi = spec.tau_int_bounds
    if spec.has_tau_int or spec.variant == BAYINTSTAR:
        t = state.tau_int
        if spec.variant == BAYINTSTAR:
            t = 1.0
        if not (lo <= t <= hi):
            return -math.inf

    sigma2 = state.sigma2
    n = X.n
    resid = y - state.alpha - X.X_main @ state.beta_main - X.X_int @ state.beta_int
    out = -0.5 * n * (_LOG_2PI + math.log(sigma2)) - float(resid @ resid) / (2.0 * sigma2)

    table = prior_variances(spec, state, fmap)
    for beta, rel in ((state.beta_main, table.main_rel_var), (state.beta_int, table.int_rel_var)):
        if beta.size:
            v = sigma2 * rel
            out += float(np.sum(-0.5 * (_LOG_2PI + np.log(v)) - beta**2 / (2.0 * v)))

    out += -0.5 * (_LOG_2PI + 2.0 * math.log(spec.intercept_sd)) \
        - state.alpha**2 / (2.0 * spec.intercept_sd**2)
    out += float(np.sum(_LOG_HALF_CAUCHY - np.log1p(state.tau**2)))
    if spec.has_tau_int or spec.variant == BAYINTSTAR:
        out += -math.log(hi - lo)
    a, b = spec.sigma2_prior
    out += a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(sigma2) - b / sigma2
    return out


@functools.lru_cache(maxsize=64)
def _pairs_by_column(fmap: FeatureMap) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    return tuple(fmap.pairs_touching(j) for j in range(fmap.p_columns))


def conditional_tau_logdensity(spec: ModelSpec, state: ModelState, j: int, fmap: FeatureMap):
    """The log conditional density of one local scale, as a scalar callable.

    The callable evaluates, up to terms not involving tau_j, the half-Cauchy
    prior plus every Gaussian coefficient prior whose variance contains
    tau_j. Values of all other parameters are frozen at the current state at
    construction time; rebuild the closure after the state changes.
    """
    p, q = fmap.p_columns, fmap.q
    n_tau = spec.n_tau(p, q)
    if not 0 <= j < n_tau:
        raise DataError(f"tau index {j} out of range for variant {spec.variant} (p={p}, q={q})")

    sigma2 = state.sigma2

    if spec.variant == BAYLOC:
        beta = state.beta_main[j] if j < p else state.beta_int[j - p]
        a = beta**2 / (2.0 * sigma2)
        const = -0.5 * (_LOG_2PI + math.log(sigma2)) + _LOG_HALF_CAUCHY

        def target_loc(tau: float) -> float:
            if not 1e-150 < tau < 1e150:
                return -math.inf
            return const - math.log1p(tau * tau) - math.log(tau) - a / (tau * tau)

        return target_loc

    rows, partners = _pairs_by_column(fmap)[j]
    n_j = rows.size
    bjk2 = state.beta_int[rows] ** 2
    tau_k = state.tau[partners]
    tau_int = state.tau_int

    if spec.variant == BAYINTADD:
        beta_j2 = state.beta_main[j] ** 2
        a = beta_j2 / (2.0 * sigma2)
        tk2 = tau_k**2
        w = bjk2 / (sigma2 * tau_int)
        log_si = math.log(math.pi * sigma2 * tau_int)
        const = -0.5 * (_LOG_2PI + math.log(sigma2)) + _LOG_HALF_CAUCHY

        def target_add(tau: float) -> float:
            if not 1e-150 < tau < 1e150:
                return -math.inf
            s = tau * tau + tk2
            pair_part = -0.5 * (n_j * log_si + float(np.sum(np.log(s)))) - float(np.sum(w / s))
            return const - math.log1p(tau * tau) - math.log(tau) - a / (tau * tau) + pair_part

        return target_add

    # bayint, bayintstar, bay0int: interaction variance sigma2 tau_j tau_k tau_int
    c = float(np.sum(bjk2 / tau_k)) / (2.0 * sigma2 * tau_int) if n_j else 0.0
    half_nj = 0.5 * n_j
    const = _LOG_HALF_CAUCHY - 0.5 * (
        n_j * (_LOG_2PI + math.log(sigma2 * tau_int)) + float(np.sum(np.log(tau_k)))
    )
    if spec.variant == BAY0INT:

        def target_nomain(tau: float) -> float:
            if not 1e-150 < tau < 1e150:
                return -math.inf
            return const - math.log1p(tau * tau) - half_nj * math.log(tau) - c / tau

        return target_nomain

    a = state.beta_main[j] ** 2 / (2.0 * sigma2)
    const += -0.5 * (_LOG_2PI + math.log(sigma2))

    def target(tau: float) -> float:
        if not 1e-150 < tau < 1e150:
            return -math.inf
        return (
            const
            - math.log1p(tau * tau)
            - (1.0 + half_nj) * math.log(tau)
            - a / (tau * tau)
            - c / tau
        )

    return target


def conditional_tau_int_logdensity(spec: ModelSpec, state: ModelState, fmap: FeatureMap):
    """The log conditional density of the global interaction scale."""
    if not spec.has_tau_int:
        raise DataError(f"variant {spec.variant} has no free global interaction scale")
    jj, kk = fmap.pair_arrays()
    tau = state.tau
    if spec.variant == BAYINTADD:
        w = 0.5 * (tau[jj] ** 2 + tau[kk] ** 2)
    else:
        w = tau[jj] * tau[kk]
    sigma2 = state.sigma2
    q = fmap.q
    d = float(np.sum(state.beta_int**2 / w)) / (2.0 * sigma2) if q else 0.0
    const = -0.5 * (q * (_LOG_2PI + math.log(sigma2)) + float(np.sum(np.log(w))))
    lo, hi = spec.tau_int_bounds
    const -= math.log(hi - lo)
    half_q = 0.5 * q

    def target(t: float) -> float:
        if not lo <= t <= hi:
            return -math.inf
        return const - half_q * math.log(t) - d / t

    return target
