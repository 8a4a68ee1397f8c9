"""Problem instances: ingestion, standardization, synthetic generation, lambda-max screens."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp


class Dataset:
    """A binary classification problem: feature matrix plus +/-1 labels.

    ``X`` may be a dense ndarray or a CSR matrix (row-major).  Instances are
    treated as immutable after construction and are safe to share read-only
    across threads.
    """

    def __init__(self, X, y, column_norms=None, zero_columns=None):
        if sp.issparse(X):
            X = X.tocsr().astype(float)
        else:
            X = np.asarray(X, dtype=float)
            if X.ndim != 2:
                raise ValueError("feature matrix must be 2-D")
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("label count does not match row count")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        self.X = X
        self.y = y
        self.column_norms = column_norms
        self.zero_columns = zero_columns
        self._csc = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.X)

    def check_both_classes(self):
        if not ((self.y == 1).any() and (self.y == -1).any()):
            raise ValueError("dataset does not contain both classes")

    def _as_csc(self):
        if self._csc is None:
            self._csc = self.X.tocsc()
        return self._csc

    def column_l1_norms(self) -> np.ndarray:
        if self.is_sparse:
            return np.asarray(abs(self.X).sum(axis=0)).ravel()
        return np.abs(self.X).sum(axis=0)

    def column_l2_norms(self) -> np.ndarray:
        if self.is_sparse:
            return np.sqrt(np.asarray(self.X.multiply(self.X).sum(axis=0)).ravel())
        return np.linalg.norm(self.X, axis=0)

    def dense_block(self, rows, cols) -> np.ndarray:
        """Dense submatrix X[rows][:, cols]; small working-set blocks only."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if self.is_sparse:
            return np.asarray(self._as_csc()[:, cols][rows, :].todense())
        return self.X[np.ix_(rows, cols)]

    def feature_inner(self, v) -> np.ndarray:
        """X^T v over all columns."""
        out = self.X.T @ v
        return np.asarray(out).ravel()

    def decision_values(self, coef_dense, intercept) -> np.ndarray:
        """X beta + intercept for a dense coefficient vector."""
        out = self.X @ coef_dense
        return np.asarray(out).ravel() + intercept

    def margins(self, coef_dense, intercept) -> np.ndarray:
        """y_i (x_i^T beta + intercept)."""
        return self.y * self.decision_values(coef_dense, intercept)


@dataclass
class GroupStructure:
    """Disjoint feature groups covering a contiguous index range [0, p)."""

    groups: list

    def __post_init__(self):
        self.groups = [np.asarray(g, dtype=int) for g in self.groups]
        seen = set()
        for g in self.groups:
            if g.size == 0:
                raise ValueError("empty group")
            s = set(g.tolist())
            if len(s) != g.size or s & seen:
                raise ValueError("groups must be disjoint without duplicates")
            seen |= s

    @property
    def G(self):
        return len(self.groups)

    @property
    def n_features(self):
        return sum(g.size for g in self.groups)

    def validate_partition(self, p):
        all_idx = np.sort(np.concatenate(self.groups))
        if all_idx.size != p or not np.array_equal(all_idx, np.arange(p)):
            raise ValueError(f"groups do not partition the {p} feature indices")

    @staticmethod
    def contiguous(G, group_size):
        return GroupStructure([np.arange(g * group_size, (g + 1) * group_size) for g in range(G)])


@dataclass
class SlopeWeights:
    """Nonincreasing nonnegative weight sequence for the sorted-L1 penalty."""

    lambdas: np.ndarray
    prefix: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float).ravel()
        if self.lambdas.size == 0:
            raise ValueError("empty weight sequence")
        if np.any(self.lambdas < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diff(self.lambdas) > 1e-12):
            raise ValueError("weights must be nonincreasing")
        self.prefix = np.cumsum(self.lambdas)

    @property
    def p(self):
        return self.lambdas.size

    def scaled(self, factor):
        return SlopeWeights(self.lambdas * factor)


@dataclass
class SynthConfig:
    """Equicorrelated Gaussian two-class generator settings."""

    n: int
    p: int
    k0: int = 0
    rho: float = 0.0
    seed: int = 0
    G: Optional[int] = None
    p_G: Optional[int] = None

    def validate(self, grouped=False):
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("rho must lie in [0, 1)")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if grouped:
            if self.G is None or self.p_G is None or self.G * self.p_G != self.p:
                raise ValueError("grouped generation requires G * p_G == p")
            if not (0 <= self.k0 <= self.G):
                raise ValueError("k0 must count signal groups, 0 <= k0 <= G")
        else:
            if not (0 <= self.k0 <= self.p):
                raise ValueError("k0 must satisfy 0 <= k0 <= p")


# -- standardization -------------------------------------------------------

def standardize_columns(d: Dataset) -> Dataset:
    """Scale every nonzero column to unit L2-norm.

    Zero columns are left untouched and flagged (a warning, not an error: real
    sparse data contains them and they can never enter a basis profitably).
    The original norms are recorded in ``column_norms``.
    """
    norms = d.column_l2_norms()
    zero = norms == 0.0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} all-zero columns left unscaled", stacklevel=2)
    scale = np.where(zero, 1.0, 1.0 / np.where(zero, 1.0, norms))
    if d.is_sparse:
        X = (d.X @ sp.diags(scale)).tocsr()
    else:
        X = d.X * scale
    return Dataset(X, d.y, column_norms=norms.copy(), zero_columns=zero)


# -- synthetic generation ---------------------------------------------------

def _equicorrelated(rng, n, p, blocks, rho):
    """Draw n samples with unit-variance features, correlation rho inside each
    block and zero across blocks, via the one-factor decomposition."""
    common = rng.standard_normal((n, len(blocks)))
    X = math.sqrt(1.0 - rho) * rng.standard_normal((n, p))
    if rho > 0.0:
        for b, blk in enumerate(blocks):
            X[:, blk] += math.sqrt(rho) * common[:, [b]]
    return X


def _attach_classes(X, n, k0_coords):
    n_pos = (n + 1) // 2  # ceil: odd n puts the extra sample in class +1
    mu = np.zeros(X.shape[1])
    mu[:k0_coords] = 1.0
    X[:n_pos] += mu
    X[n_pos:] -= mu
    y = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    return X, y


def synth_gaussian(cfg: SynthConfig, standardize: bool = True) -> Dataset:
    """Two equicorrelated Gaussian classes with opposite means on the first
    k0 coordinates; columns standardized afterwards by default."""
    cfg.validate(grouped=False)
    rng = np.random.default_rng(cfg.seed)
    X = _equicorrelated(rng, cfg.n, cfg.p, [np.arange(cfg.p)], cfg.rho)
    X, y = _attach_classes(X, cfg.n, cfg.k0)
    d = Dataset(X, y)
    return standardize_columns(d) if standardize else d


def synth_group_gaussian(cfg: SynthConfig, standardize: bool = True):
    """Grouped variant: correlation rho within each of the G blocks, zero
    across blocks; the first k0 groups carry the class signal."""
    cfg.validate(grouped=True)
    rng = np.random.default_rng(cfg.seed)
    groups = GroupStructure.contiguous(cfg.G, cfg.p_G)
    X = _equicorrelated(rng, cfg.n, cfg.p, groups.groups, cfg.rho)
    X, y = _attach_classes(X, cfg.n, cfg.k0 * cfg.p_G)
    d = Dataset(X, y)
    return (standardize_columns(d) if standardize else d), groups


# -- lambda-max screens ------------------------------------------------------

def lambda_max_l1(d: Dataset) -> float:
    """Smallest penalty level at which the all-zero coefficient vector is
    optimal for the L1 model: the largest column L1-norm."""
    if d.n == 0 or d.p == 0:
        raise ValueError("empty dataset")
    return float(d.column_l1_norms().max())


def lambda_max_group(d: Dataset, groups: GroupStructure) -> float:
    """Group analogue: the largest per-group sum of column L1-norms."""
    if d.n == 0 or d.p == 0:
        raise ValueError("empty dataset")
    groups.validate_partition(d.p)
    col = d.column_l1_norms()
    return float(max(col[g].sum() for g in groups.groups))


# -- file formats ------------------------------------------------------------

def _map_labels(raw, where=""):
    vals = set(float(v) for v in raw)
    if vals <= {-1.0, 1.0}:
        return np.asarray(raw, dtype=float)
    if vals <= {0.0, 1.0}:
        return np.where(np.asarray(raw, dtype=float) == 0.0, -1.0, 1.0)
    raise ValueError(f"non-binary labels {sorted(vals)} {where}".strip())


def load_svmlight(path, n_features: Optional[int] = None) -> Dataset:
    """Read svmlight/libsvm text: ``label idx:val idx:val ...`` per line.

    Indices are 1-based and must be strictly increasing within a line.  Labels
    in {0, 1} are mapped to {-1, +1}.  The column count is the largest index
    seen unless ``n_features`` overrides it.
    """
    labels, indptr, indices, values = [], [0], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ValueError(f"line {lineno}: bad label {parts[0]!r}")
            prev = 0
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(f"line {lineno}: malformed entry {tok!r}")
                if idx <= prev:
                    raise ValueError(f"line {lineno}: indices must be strictly increasing (1-based)")
                prev = idx
                indices.append(idx - 1)
                values.append(val)
            indptr.append(len(indices))
    if not labels:
        raise ValueError("no samples")
    p = max(indices) + 1 if indices else 0
    if n_features is not None:
        if n_features < p:
            raise ValueError(f"n_features={n_features} smaller than max index {p}")
        p = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), p),
    )
    return Dataset(X, _map_labels(labels))


def write_svmlight(d: Dataset, path):
    """Write svmlight text with exact (repr) float round-tripping."""
    X = d.X.tocsr() if d.is_sparse else sp.csr_matrix(d.X)
    X.eliminate_zeros()
    with open(path, "w") as fh:
        for i in range(d.n):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            toks = [f"{X.indices[k] + 1}:{X.data[k]!r}" for k in range(lo, hi)]
            label = "+1" if d.y[i] > 0 else "-1"
            fh.write(" ".join([label] + toks) + "\n")


def load_csv(path) -> Dataset:
    """CSV convenience reader: header row, last column is the label."""
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if not header.strip():
            raise ValueError("no samples")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric field")
    if not rows:
        raise ValueError("no samples")
    arr = np.asarray(rows, dtype=float)
    return Dataset(arr[:, :-1], _map_labels(arr[:, -1]))


def load_groups(path) -> GroupStructure:
    """One line per group: whitespace-separated 0-based feature indices."""
    groups = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                groups.append([int(tok) for tok in line.split()])
            except ValueError:
                raise ValueError(f"line {lineno}: bad group index")
    if not groups:
        raise ValueError("no groups")
    return GroupStructure(groups)


def write_groups(groups: GroupStructure, path):
    with open(path, "w") as fh:
        for g in groups.groups:
            fh.write(" ".join(str(int(j)) for j in g) + "\n")
