"""Convergence diagnostics for the Gibbs sampler.

Implements rank-normalized split R-hat and bulk effective sample size.
Chains are split in half, draws are converted to normal scores through
their pooled fractional ranks, z = ndtri((rank - 3/8) / (S + 1/4)), and the
classic between/within variance ratio is computed on the scores. The
reported R-hat is the maximum of the bulk value and the value after folding
the scores around the median, which makes the statistic sensitive to both
location and scale disagreements between chains.

ESS combines per-chain autocovariances (FFT-based, denominator n) into
lag correlations rho_t = 1 - (W - mean autocov_t) / var_plus and applies
the initial monotone positive sequence rule to the paired sums
rho_{2k} + rho_{2k+1}. The formulas follow the modern R-hat/ESS literature;
docs/diagnostics.md spells them out.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import DataError
from .sampler import PosteriorDraws


@dataclass(frozen=True)
class Diagnostics:
    parameter_names: list[str]
    rhat: np.ndarray | None  # None when only one chain was run
    ess: np.ndarray
    counters: dict[str, int]


def _normal_scores(x: np.ndarray) -> np.ndarray:
    """Rank-normalize pooled draws; shape is preserved."""
    flat = x.reshape(-1)
    ranks = rankdata(flat, method="average")
    return ndtri((ranks - 0.375) / (flat.size + 0.25)).reshape(x.shape)


def _split_chains(x: np.ndarray) -> np.ndarray:
    """Split every chain in half: (m, n) -> (2m, n // 2)."""
    m, n = x.shape
    half = n // 2
    if half < 2:
        raise DataError("need at least 4 draws per chain for split diagnostics")
    return np.vstack([x[:, :half], x[:, n - half :]])


def _rhat_of_scores(z: np.ndarray) -> float:
    m, n = z.shape
    chain_means = z.mean(axis=1)
    within = float(np.mean(np.var(z, axis=1, ddof=1)))
    between = n * float(np.var(chain_means, ddof=1))
    if within == 0.0:
        return 1.0
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def _rank_rhat(x: np.ndarray) -> float:
    """Max of bulk and folded rank-normalized split R-hat for one parameter."""
    split = _split_chains(x)
    bulk = _rhat_of_scores(_normal_scores(split))
    folded = _rhat_of_scores(_normal_scores(np.abs(split - np.median(split))))
    return max(bulk, folded)


def _autocovariances(z: np.ndarray) -> np.ndarray:
    """Per-chain autocovariance with denominator n; shape (m, n)."""
    m, n = z.shape
    centered = z - z.mean(axis=1, keepdims=True)
    size = next_fast_len(2 * n)
    freq = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(freq * np.conj(freq), size, axis=1)[:, :n]
    return acov.real / n


def _ess_of_scores(z: np.ndarray) -> float:
    m, n = z.shape
    acov = _autocovariances(z)
    chain_var = acov[:, 0] * n / (n - 1)
    within = float(np.mean(chain_var))
    if within == 0.0:
        return float(m * n)
    if m > 1:
        between = n * float(np.var(z.mean(axis=1), ddof=1))
    else:
        between = 0.0
    var_plus = (n - 1) / n * within + between / n
    mean_acov = acov.mean(axis=0)
    rho = 1.0 - (within - mean_acov) / var_plus

    # initial monotone positive sequence over paired sums
    tau = 0.0
    prev_pair = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    tau = max(2.0 * tau - 1.0, 1e-6)
    return float(min(m * n / tau, m * n))


def _rank_ess(x: np.ndarray) -> float:
    split = _split_chains(x)
    return _ess_of_scores(_normal_scores(split))


def compute_diagnostics(draws: PosteriorDraws) -> Diagnostics:
    """Per-parameter split R-hat and bulk ESS over all retained draws.

    With a single chain, R-hat is omitted with a warning; ESS still uses
    the split halves. Constant parameters report R-hat 1 and full ESS.
    """
    if draws.n_draws == 0:
        raise DataError("no draws to diagnose")
    names = draws.parameter_names()
    mat = draws.parameter_matrix()
    n_chains = draws.n_chains
    n_keep = draws.n_draws // n_chains
    chains = mat.reshape(n_chains, n_keep, mat.shape[1])

    ess = np.array([_rank_ess(chains[:, :, i]) for i in range(mat.shape[1])])
    if n_chains >= 2:
        rhat = np.array([_rank_rhat(chains[:, :, i]) for i in range(mat.shape[1])])
    else:
        warnings.warn("R-hat requires at least 2 chains; reporting ESS only", stacklevel=2)
        rhat = None
    return Diagnostics(names, rhat, ess, dict(draws.counters))
