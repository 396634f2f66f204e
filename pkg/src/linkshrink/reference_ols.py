"""Exact least-squares reference fit with classical t-test p-values.

Serves as the frequentist baseline against the posterior summaries: same
design matrix, same coefficient naming, no shrinkage. The two-sided p-values
come from an in-house regularized incomplete beta evaluation so results do
not depend on the host's special-function library.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .design import DesignMatrix
from .errors import DataError

_BETACF_MAX_ITER = 400
_BETACF_EPS = 3e-16
_BETACF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise DataError(
        "incomplete beta continued fraction failed to converge "
        f"for a={a!r}, b={b!r}, x={x!r}"
    )


def _stirling_tail(z: float) -> float:
    """Bernoulli correction series of ln Gamma, valid for z >= 20."""
    zi = 1.0 / z
    z2 = zi * zi
    return zi * (
        1.0 / 12.0 + z2 * (-1.0 / 360.0 + z2 * (1.0 / 1260.0 + z2 * (-1.0 / 1680.0)))
    )


def _lgamma_diff(hi: float, lo: float) -> float:
    """ln Gamma(hi + lo) - ln Gamma(hi) without large-argument cancellation."""
    if hi < 20.0:
        return math.lgamma(hi + lo) - math.lgamma(hi)
    return (
        (hi - 0.5) * math.log1p(lo / hi)
        + lo * math.log(hi + lo)
        - lo
        + _stirling_tail(hi + lo)
        - _stirling_tail(hi)
    )


def _ln_beta(a: float, b: float) -> float:
    lo, hi = (a, b) if a <= b else (b, a)
    return math.lgamma(lo) - _lgamma_diff(hi, lo)


def _incomplete_beta(
    a: float, b: float, x: float, cx: float, ln_x: float, ln_cx: float
) -> float:
    """I_x(a, b) where the caller supplies 1-x and both logs stably."""
    front = math.exp(a * ln_x + b * ln_cx - _ln_beta(a, b))
    # The continued fraction converges fast only on one side of the mean;
    # on the other side use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
    # The branch condition x < (a+1)/(a+b+2) is tested through cx so it
    # stays meaningful when x has rounded to 1.
    if cx > (b + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, cx) / b


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0.0 and b > 0.0):
        raise DataError("incomplete beta requires positive shape parameters")
    if math.isnan(x):
        raise DataError("incomplete beta evaluated at NaN")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return _incomplete_beta(a, b, x, 1.0 - x, math.log(x), math.log1p(-x))


def t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for a Student t variable with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise DataError("degrees of freedom must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    tt = t * t
    if tt == 0.0:
        return 1.0
    # x = dof/(dof+t^2) rounds to 1 for small t, so carry 1-x separately.
    cx = tt / (dof + tt)
    x = dof / (dof + tt)
    ln_x = math.log1p(-cx) if cx < 0.5 else math.log(x)
    return _incomplete_beta(0.5 * dof, 0.5, x, cx, ln_x, math.log(cx))


@dataclass(frozen=True)
class OlsFit:
    """Least-squares estimates with classical standard errors.

    ``names`` aligns with ``coefficients``; the intercept is always first.
    ``residual_variance`` is the usual unbiased estimate RSS / dof.
    """

    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    p_values: np.ndarray
    residual_variance: float
    dof: int

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def table(self) -> tuple[list[str], list[np.ndarray]]:
        """Header and columns for a tab-separated coefficient report."""
        header = ["coefficient", "estimate", "se", "t", "p"]
        cols = [
            np.asarray(self.names, dtype=object),
            self.coefficients,
            self.standard_errors,
            self.t_statistics,
            self.p_values,
        ]
        return header, cols


def fit_ols_matrix(M: np.ndarray, y: np.ndarray, names: list[str]) -> OlsFit:
    """Fit y ~ M by least squares. No intercept is added here.

    Raises DataError when the system is underdetermined or rank deficient;
    the rank-deficiency message names the columns that are linearly
    dependent on the preceding ones.
    """
    M = np.asarray(M, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if M.ndim != 2:
        raise DataError("design must be a 2-d array")
    n, d = M.shape
    if y.shape != (n,):
        raise DataError(f"response length {y.shape} does not match {n} rows")
    if len(names) != d:
        raise DataError(f"got {len(names)} names for {d} columns")
    if not np.all(np.isfinite(M)) or not np.all(np.isfinite(y)):
        raise DataError("design and response must be finite")
    if n <= d:
        raise DataError(
            f"least squares needs more rows than columns, got {n} rows and {d} columns"
        )

    Q, R, piv = qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(n, d) * np.finfo(np.float64).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < d:
        dependent = sorted(names[i] for i in piv[rank:])
        raise DataError(
            "design is rank deficient; linearly dependent columns: "
            + ", ".join(dependent)
        )

    coef_piv = solve_triangular(R, Q.T @ y, lower=False)
    coef = np.empty(d)
    coef[piv] = coef_piv

    resid = y - M @ coef
    dof = n - d
    rss = float(resid @ resid)
    s2 = rss / dof

    # diag of (M'M)^{-1} = row sums of squares of R^{-1}, unpermuted.
    R_inv = solve_triangular(R, np.eye(d), lower=False)
    var_piv = s2 * np.sum(R_inv * R_inv, axis=1)
    var = np.empty(d)
    var[piv] = var_piv
    se = np.sqrt(np.maximum(var, 0.0))

    t = np.zeros(d)
    nonzero_se = se > 0.0
    t[nonzero_se] = coef[nonzero_se] / se[nonzero_se]
    # Zero residual variance makes any nonzero estimate infinitely significant.
    exact = ~nonzero_se & (coef != 0.0)
    t[exact] = np.sign(coef[exact]) * np.inf

    p = np.array([t_two_sided_p(float(ti), dof) for ti in t])
    return OlsFit(
        names=tuple(names),
        coefficients=coef,
        standard_errors=se,
        t_statistics=t,
        p_values=p,
        residual_variance=s2,
        dof=dof,
    )


def coefficient_names(feature_map) -> list[str]:
    """Intercept plus main and interaction coefficient names."""
    names = ["alpha"]
    names.extend("b_" + c for c in feature_map.main_names)
    names.extend("b_" + c for c in feature_map.interaction_names)
    return names


def fit_ols(X: DesignMatrix, y: np.ndarray) -> OlsFit:
    """Least squares on intercept + main + interaction columns."""
    M = np.hstack([np.ones((X.n, 1)), X.X_main, X.X_int])
    return fit_ols_matrix(M, y, coefficient_names(X.feature_map))
