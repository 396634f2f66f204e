"""Synthetic master datasets and training subsets with known coefficients.

Structural covariates are drawn through a Gaussian copula (identity
dependence by default), binaries are dichotomized at the latent median and
categoricals cut at equal latent quantiles. Noise covariates are independent
standard normals with exactly zero true effect, giving a built-in negative
control. The response is linear in the expanded standardized design plus
Gaussian noise, and the generating coefficients are returned alongside the
data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .design import (
    BINARY,
    CATEGORICAL,
    CONTINUOUS,
    Column,
    DesignMatrix,
    FeatureMap,
    RawDataset,
    apply_feature_map,
    fit_feature_map,
)
from .errors import DataError
from .reference_ols import coefficient_names


@dataclass(frozen=True)
class Structure:
    """Covariate layout of a generated dataset.

    Structural covariates share the copula; noise covariates are appended
    as independent standard normals named noise1, noise2, ...
    """

    n_continuous: int = 3
    n_binary: int = 3
    categorical_levels: tuple[int, ...] = (5,)
    n_noise: int = 4

    def __post_init__(self):
        if self.n_continuous < 0 or self.n_binary < 0 or self.n_noise < 0:
            raise DataError("covariate counts must be nonnegative")
        if any(l < 2 for l in self.categorical_levels):
            raise DataError("categorical covariates need at least 2 levels")
        if self.n_latent == 0 and self.n_noise == 0:
            raise DataError("structure has no covariates")

    @property
    def n_latent(self) -> int:
        """Latent copula dimensions: one per structural covariate."""
        return self.n_continuous + self.n_binary + len(self.categorical_levels)

    @property
    def noise_names(self) -> tuple[str, ...]:
        return tuple(f"noise{i + 1}" for i in range(self.n_noise))


@dataclass(frozen=True)
class SynthConfig:
    N_master: int = 21570
    n_train: int = 1000
    B: int = 25
    structure: Structure = field(default_factory=Structure)
    dependence: np.ndarray | None = None
    true_beta: np.ndarray | None = None
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.N_master < 2:
            raise DataError("N_master must be at least 2")
        if self.n_train < 1 or self.B < 1:
            raise DataError("n_train and B must be positive")
        if not self.noise_sd >= 0.0:
            raise DataError("noise_sd must be nonnegative")
        if self.dependence is not None:
            dep = np.asarray(self.dependence, dtype=np.float64)
            k = self.structure.n_latent
            if dep.shape != (k, k):
                raise DataError(
                    f"dependence must be {k}x{k} for this structure, got {dep.shape}"
                )
            if not np.allclose(dep, dep.T, atol=1e-12):
                raise DataError("dependence matrix must be symmetric")
            if not np.allclose(np.diag(dep), 1.0, atol=1e-12):
                raise DataError("dependence matrix must have unit diagonal")
            object.__setattr__(self, "dependence", dep)


@dataclass(frozen=True)
class MasterData:
    """Generated dataset with its generating coefficients.

    ``truth`` aligns with ``coefficient_names(feature_map)``: intercept,
    then main, then interaction coefficients, all on the standardized
    design scale of the master feature map.
    """

    dataset: RawDataset
    truth: np.ndarray
    feature_map: FeatureMap

    @property
    def truth_names(self) -> list[str]:
        return coefficient_names(self.feature_map)


def _copula_chol(cfg: SynthConfig) -> np.ndarray:
    k = cfg.structure.n_latent
    if cfg.dependence is None:
        return np.eye(k)
    try:
        return np.linalg.cholesky(cfg.dependence)
    except np.linalg.LinAlgError:
        raise DataError("dependence matrix is not positive definite") from None


def _structural_columns(latent: np.ndarray, structure: Structure) -> list[Column]:
    cols = []
    idx = 0
    for i in range(structure.n_continuous):
        cols.append(Column(f"x{i + 1}", CONTINUOUS, latent[:, idx]))
        idx += 1
    for i in range(structure.n_binary):
        labels = np.where(latent[:, idx] > 0.0, "yes", "no")
        cols.append(Column(f"z{i + 1}", BINARY, labels))
        idx += 1
    for i, levels in enumerate(structure.categorical_levels):
        cuts = ndtri(np.arange(1, levels) / levels)
        bins = np.digitize(latent[:, idx], cuts)
        labels = np.array([f"l{b + 1}" for b in bins])
        cols.append(Column(f"c{i + 1}", CATEGORICAL, labels))
        idx += 1
    return cols


def default_truth(
    fmap: FeatureMap,
    rng: np.random.Generator,
    noise_covariates: tuple[str, ...],
    main_sd: float = 0.3,
    int_sd: float = 0.1,
    int_zero_fraction: float = 0.6,
) -> np.ndarray:
    """Random coefficients: modest mains, weaker sparse interactions.

    Noise covariates get exactly zero everywhere, including every
    interaction touching them, so they serve as negative controls.
    """
    noise = set(noise_covariates)
    p, q = fmap.p_columns, fmap.q
    is_noise_col = np.array(
        [fmap.covariate_names[g] in noise for g in fmap.group_of]
    )
    truth = np.empty(1 + p + q)
    truth[0] = rng.normal(scale=main_sd)
    mains = rng.normal(scale=main_sd, size=p)
    mains[is_noise_col] = 0.0
    truth[1 : 1 + p] = mains

    jj, kk = fmap.pair_arrays()
    ints = rng.normal(scale=int_sd, size=q)
    ints[rng.random(q) < int_zero_fraction] = 0.0
    ints[is_noise_col[jj] | is_noise_col[kk]] = 0.0
    truth[1 + p :] = ints
    return truth


def linked_truth(
    fmap: FeatureMap,
    rng: np.random.Generator,
    noise_covariates: tuple[str, ...],
    strong_prob: float = 0.5,
    main_range: tuple[float, float] = (0.25, 0.5),
    int_prob: float = 0.7,
    int_range: tuple[float, float] = (0.2, 0.35),
) -> np.ndarray:
    """Coefficients obeying the linked assumption: interactions appear only
    between covariates whose main effects are themselves strong.

    Each non-noise main column is strong with probability ``strong_prob``
    (magnitude uniform in ``main_range``, random sign) and exactly zero
    otherwise. A pair gets a nonzero interaction with probability
    ``int_prob`` only when both parent columns are strong.
    """
    noise = set(noise_covariates)
    p, q = fmap.p_columns, fmap.q
    is_noise_col = np.array(
        [fmap.covariate_names[g] in noise for g in fmap.group_of]
    )
    truth = np.zeros(1 + p + q)
    truth[0] = rng.normal(scale=0.3)

    strong = (rng.random(p) < strong_prob) & ~is_noise_col
    mag = rng.uniform(main_range[0], main_range[1], size=p)
    sign = np.where(rng.random(p) < 0.5, -1.0, 1.0)
    truth[1 : 1 + p] = np.where(strong, sign * mag, 0.0)

    jj, kk = fmap.pair_arrays()
    linked = strong[jj] & strong[kk] & (rng.random(q) < int_prob)
    imag = rng.uniform(int_range[0], int_range[1], size=q)
    isign = np.where(rng.random(q) < 0.5, -1.0, 1.0)
    truth[1 + p :] = np.where(linked, isign * imag, 0.0)
    return truth


def simulate_response(
    X: DesignMatrix, truth: np.ndarray, noise_sd: float, rng: np.random.Generator
) -> np.ndarray:
    expect = 1 + X.feature_map.p_columns + X.feature_map.q
    if truth.shape != (expect,):
        raise DataError(f"truth must have length {expect}, got {truth.shape}")
    M = np.hstack([np.ones((X.n, 1)), X.X_main, X.X_int])
    y = M @ truth
    if noise_sd > 0.0:
        y = y + rng.normal(scale=noise_sd, size=X.n)
    return y


def generate_master(cfg: SynthConfig, truth_fn=None) -> MasterData:
    """Draw covariates, fit the feature map, and simulate the response.

    ``truth_fn`` optionally replaces the default coefficient sampler; it is
    called as truth_fn(feature_map, rng, noise_names) and must return the
    full coefficient vector. ``cfg.true_beta`` wins over both.
    """
    root = np.random.SeedSequence(cfg.seed)
    covariate_seq, response_seq = root.spawn(2)
    rng = np.random.Generator(np.random.Philox(covariate_seq))

    chol = _copula_chol(cfg)
    structure = cfg.structure
    n = cfg.N_master
    latent = rng.standard_normal((n, structure.n_latent)) @ chol.T
    cols = _structural_columns(latent, structure)
    for name in structure.noise_names:
        cols.append(Column(name, CONTINUOUS, rng.standard_normal(n)))

    covariates = RawDataset(cols)
    fmap = fit_feature_map(covariates)
    X = apply_feature_map(fmap, covariates)

    rng_y = np.random.Generator(np.random.Philox(response_seq))
    if cfg.true_beta is not None:
        truth = np.asarray(cfg.true_beta, dtype=np.float64)
        expect = 1 + fmap.p_columns + fmap.q
        if truth.shape != (expect,):
            raise DataError(
                f"true_beta must have length {expect} for this structure, "
                f"got {truth.shape}"
            )
    elif truth_fn is not None:
        truth = truth_fn(fmap, rng_y, structure.noise_names)
    else:
        truth = default_truth(fmap, rng_y, structure.noise_names)
    y = simulate_response(X, truth, cfg.noise_sd, rng_y)

    return MasterData(
        dataset=RawDataset(cols, response=y), truth=truth, feature_map=fmap
    )


def split_training_sets(master: RawDataset, cfg: SynthConfig) -> list[np.ndarray]:
    """B training index sets of size n_train, disjoint while indices last.

    When B*n exceeds the master size, each block first takes whatever
    unused rows remain, then fills up by sampling without replacement from
    the already used rows; blocks never repeat a row internally.
    """
    N = master.n_rows
    n = cfg.n_train
    if n > N:
        raise DataError(f"cannot draw {n} rows from a master set of {N}")
    seq = np.random.SeedSequence(cfg.seed).spawn(3)[2]
    rng = np.random.Generator(np.random.Philox(seq))
    perm = rng.permutation(N)
    blocks = []
    cursor = 0
    for _ in range(cfg.B):
        take = perm[cursor : cursor + n]
        cursor = min(cursor + n, N)
        if take.size < n:
            pool = np.setdiff1d(np.arange(N), take)
            extra = rng.choice(pool, size=n - take.size, replace=False)
            take = np.concatenate([take, extra])
        blocks.append(np.sort(take))
    return blocks
