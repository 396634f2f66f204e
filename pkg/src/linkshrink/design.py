"""Design-matrix construction for regression with all two-way interactions.

Raw covariates come in three kinds. Continuous columns are centered and
scaled, binary columns are coded -1/+1, and categorical columns expand into
sum-to-zero contrast columns with entries in {-1, 0, 1}. Every pair of
expanded columns belonging to two distinct covariates gets a product column,
so a model built on the expanded design carries all two-way interactions
except those between contrast columns of the same categorical.

The fitted transformation is stored in a FeatureMap so that held-out rows
can be expanded with the training centers and scales.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, BINARY, CATEGORICAL)


@dataclass(frozen=True)
class Column:
    """One raw covariate column. Continuous values are floats; binary and
    categorical values are text labels."""

    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DataError(f"column '{self.name}' has unknown kind '{self.kind}'")
        if self.kind == CONTINUOUS:
            vals = np.asarray(self.values, dtype=float)
            if not np.all(np.isfinite(vals)):
                raise DataError(f"column '{self.name}' contains non-finite values")
        else:
            vals = np.asarray(self.values, dtype=str)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class RawDataset:
    """Raw covariate columns plus an optional response vector."""

    columns: tuple[Column, ...]
    response: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise DataError("dataset has no covariate columns")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate covariate names in dataset")
        n = len(self.columns[0].values)
        for c in self.columns:
            if len(c.values) != n:
                raise DataError(f"column '{c.name}' has length {len(c.values)}, expected {n}")
        if self.response is not None:
            resp = np.asarray(self.response, dtype=float)
            if len(resp) != n:
                raise DataError(f"response has length {len(resp)}, expected {n}")
            if not np.all(np.isfinite(resp)):
                raise DataError("response contains non-finite values")
            object.__setattr__(self, "response", resp)

    @property
    def n_rows(self) -> int:
        return len(self.columns[0].values)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError(f"no column named '{name}'")

    def subset(self, rows: np.ndarray) -> "RawDataset":
        """New dataset restricted to the given row indices."""
        rows = np.asarray(rows)
        cols = tuple(Column(c.name, c.kind, c.values[rows]) for c in self.columns)
        resp = None if self.response is None else self.response[rows]
        return RawDataset(cols, resp)


@dataclass(frozen=True)
class ContinuousCode:
    name: str
    center: float
    scale: float


@dataclass(frozen=True)
class BinaryCode:
    name: str
    low: str   # coded -1
    high: str  # coded +1


@dataclass(frozen=True)
class CategoricalCode:
    name: str
    levels: tuple[str, ...]  # sorted; the last level scores -1 on every contrast


def contrast_matrix(n_levels: int) -> np.ndarray:
    """Sum-to-zero contrast matrix, n_levels x (n_levels - 1).

    Level i < L-1 scores +1 on its own column and 0 elsewhere; the last
    level scores -1 on every column. Entries are in {-1, 0, 1} and each
    column sums to zero.
    """
    contrasts = np.zeros((n_levels, n_levels - 1))
    contrasts[: n_levels - 1, :] = np.eye(n_levels - 1)
    contrasts[-1, :] = -1.0
    return contrasts


@dataclass(frozen=True)
class FeatureMap:
    """Frozen recipe mapping raw covariates to expanded design columns.

    Holds one code per covariate, the expanded column names, the covariate
    index of each expanded column, and the list of admissible interaction
    pairs (j, k) with j < k over expanded columns, excluding pairs inside
    the same categorical group.
    """

    codes: tuple[object, ...]
    main_names: tuple[str, ...]
    group_of: tuple[int, ...]
    interaction_index: tuple[tuple[int, int], ...]

    @property
    def p_columns(self) -> int:
        return len(self.main_names)

    @property
    def p_covariates(self) -> int:
        return len(self.codes)

    @property
    def q(self) -> int:
        return len(self.interaction_index)

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.codes)

    @property
    def covariate_kinds(self) -> tuple[str, ...]:
        kinds = []
        for c in self.codes:
            if isinstance(c, ContinuousCode):
                kinds.append(CONTINUOUS)
            elif isinstance(c, BinaryCode):
                kinds.append(BINARY)
            else:
                kinds.append(CATEGORICAL)
        return tuple(kinds)

    @property
    def interaction_names(self) -> tuple[str, ...]:
        return tuple(f"{self.main_names[j]}:{self.main_names[k]}" for j, k in self.interaction_index)

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.codes if isinstance(c, ContinuousCode)])

    @property
    def scales(self) -> np.ndarray:
        return np.array([c.scale for c in self.codes if isinstance(c, ContinuousCode)])

    @property
    def binary_codes(self) -> dict[str, dict[str, int]]:
        return {c.name: {c.low: -1, c.high: +1} for c in self.codes if isinstance(c, BinaryCode)}

    @property
    def categorical_contrasts(self) -> dict[str, np.ndarray]:
        return {
            c.name: contrast_matrix(len(c.levels))
            for c in self.codes
            if isinstance(c, CategoricalCode)
        }

    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Interaction pairs as two integer arrays (left columns, right columns)."""
        if not self.interaction_index:
            return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
        idx = np.asarray(self.interaction_index, dtype=np.intp)
        return idx[:, 0], idx[:, 1]

    def columns_of_covariate(self, cov: int) -> np.ndarray:
        """Expanded column indices belonging to covariate number ``cov``."""
        return np.flatnonzero(np.asarray(self.group_of) == cov)

    def pairs_touching(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Interaction rows involving expanded column j, and the partner columns.

        Returns (rows, partners) where interaction_index[rows[i]] pairs column
        j with column partners[i].
        """
        rows = []
        partners = []
        for r, (a, b) in enumerate(self.interaction_index):
            if a == j:
                rows.append(r)
                partners.append(b)
            elif b == j:
                rows.append(r)
                partners.append(a)
        return np.asarray(rows, dtype=np.intp), np.asarray(partners, dtype=np.intp)


@dataclass(frozen=True)
class DesignMatrix:
    """Expanded design: main-effect columns and their product columns.

    The intercept is implied and never stored.
    """

    X_main: np.ndarray
    X_int: np.ndarray
    feature_map: FeatureMap

    @property
    def n(self) -> int:
        return self.X_main.shape[0]


def fit_feature_map(data: RawDataset) -> FeatureMap:
    """Learn the expansion recipe from a dataset.

    Continuous columns store their mean and population standard deviation
    (denominator n). Binary columns map the lexicographically smaller label
    to -1 and the larger to +1. Categorical levels are sorted and receive
    sum-to-zero contrasts. Raises DataError for constant continuous columns
    and for binary or categorical columns without at least two levels.
    """
    codes: list[object] = []
    main_names: list[str] = []
    group_of: list[int] = []
    for cov, col in enumerate(data.columns):
        if col.kind == CONTINUOUS:
            center = float(np.mean(col.values))
            scale = float(np.std(col.values))
            if scale == 0.0:
                raise DataError(f"continuous column '{col.name}' has zero variance")
            codes.append(ContinuousCode(col.name, center, scale))
            main_names.append(col.name)
            group_of.append(cov)
        elif col.kind == BINARY:
            levels = np.unique(col.values)
            if len(levels) != 2:
                raise DataError(
                    f"binary column '{col.name}' has {len(levels)} distinct values, expected 2"
                )
            codes.append(BinaryCode(col.name, str(levels[0]), str(levels[1])))
            main_names.append(col.name)
            group_of.append(cov)
        else:
            levels = np.unique(col.values)
            if len(levels) < 2:
                raise DataError(f"categorical column '{col.name}' has fewer than 2 observed levels")
            codes.append(CategoricalCode(col.name, tuple(str(v) for v in levels)))
            for lev in levels[:-1]:
                main_names.append(f"{col.name}={lev}")
                group_of.append(cov)

    p = len(main_names)
    pairs = tuple(
        (j, k)
        for j in range(p)
        for k in range(j + 1, p)
        if group_of[j] != group_of[k]
    )
    return FeatureMap(tuple(codes), tuple(main_names), tuple(group_of), pairs)


def _expand_main(fmap: FeatureMap, data: RawDataset) -> np.ndarray:
    n = data.n_rows
    out = np.empty((n, fmap.p_columns))
    pos = 0
    for code, col in zip(fmap.codes, data.columns):
        if isinstance(code, ContinuousCode):
            out[:, pos] = (col.values - code.center) / code.scale
            pos += 1
        elif isinstance(code, BinaryCode):
            lut = {code.low: -1.0, code.high: 1.0}
            try:
                out[:, pos] = [lut[v] for v in col.values]
            except KeyError as exc:
                raise DataError(
                    f"binary column '{code.name}' has unseen value {str(exc.args[0])!r}"
                ) from None
            pos += 1
        else:
            index = {lev: i for i, lev in enumerate(code.levels)}
            try:
                rows = np.array([index[v] for v in col.values], dtype=np.intp)
            except KeyError as exc:
                raise DataError(
                    f"categorical column '{code.name}' has unseen level {str(exc.args[0])!r}"
                ) from None
            n_new = len(code.levels) - 1
            out[:, pos : pos + n_new] = contrast_matrix(len(code.levels))[rows, :]
            pos += n_new
    return out


def apply_feature_map(fmap: FeatureMap, data: RawDataset) -> DesignMatrix:
    """Expand a dataset with a previously fitted recipe.

    The stored centers and scales are reused, never recomputed, so held-out
    rows are standardized exactly like the fitting data. The dataset must
    carry the same covariates, in the same order and of the same kind, as
    the data the map was fitted on.
    """
    if len(data.columns) != len(fmap.codes):
        raise DataError(
            f"dataset has {len(data.columns)} covariates, feature map expects {len(fmap.codes)}"
        )
    for code, col in zip(fmap.codes, data.columns):
        want = (
            CONTINUOUS
            if isinstance(code, ContinuousCode)
            else BINARY
            if isinstance(code, BinaryCode)
            else CATEGORICAL
        )
        if col.name != code.name or col.kind != want:
            raise DataError(
                f"covariate mismatch: feature map expects ('{code.name}', {want}), "
                f"dataset has ('{col.name}', {col.kind})"
            )
    X_main = _expand_main(fmap, data)
    jj, kk = fmap.pair_arrays()
    X_int = X_main[:, jj] * X_main[:, kk]
    return DesignMatrix(X_main, X_int, fmap)


def interaction_moments(design: DesignMatrix) -> np.ndarray:
    """Sample second moments E[x_j x_k] for every interaction pair.

    Uses the denominator n. Pass a design built from a large reference
    sample to get more precise plug-in moments.
    """
    n = design.n
    if n < 2:
        raise DataError("need at least 2 rows to estimate moments")
    return design.X_int.sum(axis=0) / n


def main_means(design: DesignMatrix) -> np.ndarray:
    """Sample means of the expanded main-effect columns (denominator n)."""
    return design.X_main.mean(axis=0)
