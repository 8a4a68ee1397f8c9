"""Cutting-plane solver for the sorted-L1 (Slope) penalized SVM.

The sorted-L1 norm is the maximum of w^T(|beta|) over all rearrangements w of
the weight sequence, so its epigraph is cut out by one linear inequality per
rearrangement.  The driver keeps a small pool of such cuts (grown by
separation: the rearrangement matching the current magnitude order is the
maximizer) and simultaneously generates coefficient columns, extending every
pooled cut onto new columns with the next unused weights.

A quadratic-size exact formulation (prefix-sum representation of the largest-k
partial sums) is included as a small-instance oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp
from .data import Dataset, SlopeWeights
from .l1 import CutgenConfig, hinge_loss
from .restricted import HingeRestriction

_CERT_SLACK = 1e-9
_DEFAULT_COLS_PER_ROUND = 10


def slope_norm(coef, weights) -> float:
    """Sorted-L1 norm: |coef| sorted decreasingly, dotted with the weights."""
    coef = np.asarray(coef, dtype=float)
    lam = np.asarray(getattr(weights, "lambdas", weights), dtype=float)
    a = np.sort(np.abs(coef))[::-1]
    k = min(a.size, lam.size)
    return float(a[:k] @ lam[:k])


def slope_objective(d: Dataset, weights, coef_dense, intercept) -> float:
    return hinge_loss(d, coef_dense, intercept) + slope_norm(coef_dense, weights)


def two_level_weights(p, k0, lam_tilde) -> SlopeWeights:
    """Two-level sequence: 2*lam_tilde on the first k0 ranks, lam_tilde after."""
    lam = np.full(p, float(lam_tilde))
    lam[:k0] = 2.0 * lam_tilde
    return SlopeWeights(lam)


def bh_log_weights(p, lam_tilde) -> SlopeWeights:
    """Logarithmic decay: lam_j = sqrt(log(2p / j)) * lam_tilde."""
    j = np.arange(1, p + 1)
    return SlopeWeights(np.sqrt(np.log(2.0 * p / j)) * float(lam_tilde))


def load_slope_weights(path) -> SlopeWeights:
    """One weight per line, validated nonincreasing and nonnegative."""
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise ValueError(f"line {lineno}: bad weight {line!r}")
    if not vals:
        raise ValueError("no weights")
    return SlopeWeights(np.asarray(vals))


def write_slope_weights(weights: SlopeWeights, path):
    with open(path, "w") as fh:
        for v in weights.lambdas:
            fh.write(f"{v!r}\n")


@dataclass
class CutPool:
    """Pooled epigraph cuts, each aligned with the driver's feature order.

    Every cut is a rearrangement of a prefix of the weight sequence; cuts are
    never removed, and when columns join the model each cut gains the next
    unused weights on the new coordinates.
    """

    cuts: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.cuts)

    def add(self, w):
        self.cuts.append(np.asarray(w, dtype=float).copy())

    def extend_all(self, ext_values):
        ext_values = np.asarray(ext_values, dtype=float)
        self.cuts = [np.concatenate([c, ext_values]) for c in self.cuts]


def separate_cut(coef_active, epi_value, weights, epsilon) -> Optional[np.ndarray]:
    """The most violated epigraph cut at the current point, if any.

    Returns the weight rearrangement assigning the largest weights to the
    largest |coef| (ties broken by position, stable), or None when the
    epigraph variable already covers the sorted-L1 value within epsilon.
    """
    coef_active = np.asarray(coef_active, dtype=float)
    lam = np.asarray(getattr(weights, "lambdas", weights), dtype=float)
    if epi_value + epsilon >= slope_norm(coef_active, lam):
        return None
    order = np.argsort(-np.abs(coef_active), kind="stable")
    w = np.empty(coef_active.size)
    w[order] = lam[: coef_active.size]
    return w


def price_slope_columns(d: Dataset, pi, weights, features, epsilon, max_added=_DEFAULT_COLS_PER_ROUND) -> np.ndarray:
    """Columns outside the working set with |sum_i y_i x_ij pi_i| at least
    the first unused weight plus epsilon, strongest first (capped)."""
    features = np.asarray(features, dtype=int)
    lam = np.asarray(getattr(weights, "lambdas", weights), dtype=float)
    if features.size >= d.p:
        return np.empty(0, dtype=int)
    q = np.abs(d.feature_inner(d.y * np.asarray(pi, dtype=float)))
    q[features] = -np.inf
    thr = lam[features.size] + epsilon
    hits = np.nonzero(q >= thr)[0]
    if hits.size == 0:
        return hits
    order = hits[np.argsort(-q[hits], kind="stable")]
    if max_added is not None:
        order = order[:max_added]
    return order  # pricing order: the extension weights follow this order


def extend_cuts(pool: CutPool, new_columns, weights, n_active) -> CutPool:
    """Extend every pooled cut onto the new columns: the k-th added column
    (in pricing order) takes the (n_active + k)-th weight in every cut."""
    new_columns = np.asarray(new_columns, dtype=int)
    if new_columns.size == 0:
        return pool
    lam = np.asarray(getattr(weights, "lambdas", weights), dtype=float)
    pool.extend_all(lam[n_active : n_active + new_columns.size])
    return pool


@dataclass
class SlopeSolution:
    """Sparse Slope-SVM solution; ``epigraph_value`` bounds the sorted-L1
    penalty from above at certification tolerance."""

    coef_indices: np.ndarray
    coef_values: np.ndarray
    intercept: float
    epigraph_value: float
    active_samples: np.ndarray
    slacks: np.ndarray
    duals: np.ndarray
    objective: float
    lp_objective: float
    certified: bool
    diagnostics: dict = field(default_factory=dict)

    def coef_dense(self, p):
        out = np.zeros(p)
        out[self.coef_indices] = self.coef_values
        return out


class SlopeRestriction(HingeRestriction):
    """Restricted Slope model: cost-free signed columns, an epigraph variable
    of cost 1, and one row per pooled cut keeping it above w^T(|beta|)."""

    def __init__(self, d, weights, samples, features, pool: CutPool):
        self.weights = weights
        self.pool = pool
        self.cut_rows = []
        self._lam = np.asarray(weights.lambdas, dtype=float)
        super().__init__(d, samples)
        self.epi_col = self.model.append_column(1.0, [], [], 0.0, np.inf)
        self.add_features(np.asarray(features, dtype=int))
        if pool.count == 0:
            raise ValueError("cut pool must hold at least one cut")
        for w in pool.cuts:
            self._append_cut_row(w)
        self.basis = self._fresh_basis()

    def _feature_extra_rows(self, j, k):
        # the next unused weight lands on this column in every cut row;
        # len(self.features) already counts earlier columns of this batch
        if not self.cut_rows:
            return [], []
        w_ext = self._lam[len(self.features)]
        return list(self.cut_rows), [-w_ext] * len(self.cut_rows)

    def _append_cut_row(self, w):
        cols, vals = [self.epi_col], [1.0]
        for t, j in enumerate(self.features):
            cols.extend([self.pos_col[j], self.neg_col[j]])
            vals.extend([-w[t], -w[t]])
        row = self.model.append_row(lp.GE, 0.0, cols, vals)
        self.cut_rows.append(row)
        return row

    def add_cut(self, w):
        self.pool.add(w)
        row = self._append_cut_row(w)
        if self.basis is not None:
            self.basis = lp._extend_basis(self.model, self.basis)
        return row

    def add_priced_features(self, new_columns):
        """Append columns in pricing order, extending every pooled cut."""
        new_columns = np.asarray(new_columns, dtype=int)
        n_before = len(self.features)
        extend_cuts(self.pool, new_columns, self.weights, n_before)
        self.add_features(new_columns)

    def epi_value(self, sol=None):
        sol = sol or self.last
        return float(sol.primal[self.epi_col])


def build_slope_restricted(d: Dataset, weights: SlopeWeights, features, pool: CutPool,
                           samples=None) -> SlopeRestriction:
    if pool.count == 0:
        raise ValueError("cut pool must hold at least one cut")
    samples = np.arange(d.n) if samples is None else samples
    return SlopeRestriction(d, weights, samples, features, pool)


def initial_cut(coef_active, weights) -> np.ndarray:
    """First pooled cut from an initializer: weight rearrangement matching the
    initializer's magnitude order (all-largest-first when it is zero)."""
    coef_active = np.asarray(coef_active, dtype=float)
    lam = np.asarray(getattr(weights, "lambdas", weights), dtype=float)
    order = np.argsort(-np.abs(coef_active), kind="stable")
    w = np.empty(coef_active.size)
    w[order] = lam[: coef_active.size]
    return w


def solve_slope(
    d: Dataset,
    weights: SlopeWeights,
    features_init=None,
    cfg: Optional[CutgenConfig] = None,
    init_coef=None,
    *,
    add_cuts=True,
    add_columns=True,
    max_cuts=None,
) -> SlopeSolution:
    """Simultaneous cut separation and column generation.

    Per round: solve the restricted LP; add the separated epigraph cut if the
    epigraph variable undershoots the sorted-L1 value by more than epsilon (at
    most one cut per round); price and append columns, extending all pooled
    cuts; stop when neither fires.  ``add_cuts``/``add_columns`` disable one
    of the two mechanisms (pool-only or fixed-column modes).
    """
    cfg = cfg or CutgenConfig()
    if weights.p != d.p:
        raise ValueError("weight sequence length must equal the feature count")
    t0 = time.perf_counter()
    if features_init is None or len(features_init) == 0:
        q = np.abs(d.feature_inner(d.y))
        features_init = np.sort(np.argsort(-q, kind="stable")[: min(10, d.p)])
    features_init = np.asarray(features_init, dtype=int)
    if init_coef is None:
        coef0 = np.zeros(features_init.size)
    else:
        coef0 = np.asarray(init_coef, dtype=float)[features_init]
    pool = CutPool()
    pool.add(initial_cut(coef0, weights))
    rp = SlopeRestriction(d, weights, np.arange(d.n), features_init, pool)
    if max_cuts is None:
        max_cuts = 10 * d.p

    cap = cfg.max_added_per_round if cfg.max_added_per_round is not None else _DEFAULT_COLS_PER_ROUND
    certified = False
    outer = 0
    while outer < cfg.max_outer:
        sol = rp.solve()
        outer += 1
        if sol.status != "optimal":
            break
        _, coef_active = rp.coef_pairs(sol)
        epi = rp.epi_value(sol)
        fired = False
        if add_cuts and rp.pool.count < max_cuts:
            w_new = separate_cut(coef_active, epi, weights, cfg.epsilon)
            if w_new is not None:
                rp.add_cut(w_new)
                fired = True
        if add_columns:
            new_cols = price_slope_columns(d, rp.duals_full(sol), weights, rp.features, cfg.epsilon, cap)
            if new_cols.size:
                rp.add_priced_features(new_cols)
                fired = True
        if not fired:
            certified = True
            break

    sol = rp.last
    idx, vals = rp.coef_pairs(sol)
    nz = vals != 0.0
    coef = rp.coef_dense(sol)
    b0 = rp.intercept(sol)
    return SlopeSolution(
        coef_indices=idx[nz],
        coef_values=vals[nz],
        intercept=b0,
        epigraph_value=rp.epi_value(sol),
        active_samples=np.asarray(rp.samples, dtype=int),
        slacks=rp.xi_values(sol),
        duals=rp.sample_duals(sol),
        objective=slope_objective(d, weights, coef, b0),
        lp_objective=sol.objective,
        certified=certified,
        diagnostics={
            "outer_rounds": outer,
            "n_active_features": len(rp.features),
            "n_cuts": rp.pool.count,
            "pivots": rp.total_pivots,
            "seconds": time.perf_counter() - t0,
            "lp_status": sol.status,
            "features": np.asarray(rp.features, dtype=int),
        },
    )


def certify_slope(d: Dataset, weights: SlopeWeights, sol: SlopeSolution, epsilon) -> dict:
    """Full certificate: the epigraph value covers the sorted-L1 norm of the
    full coefficient vector within epsilon, and no outside column prices in."""
    coef = sol.coef_dense(d.p)
    norm_gap = slope_norm(coef, weights) - sol.epigraph_value
    features = sol.diagnostics.get("features", sol.coef_indices)
    would_add = price_slope_columns(d, _scatter(sol, d.n), weights, features, epsilon, max_added=None)
    return {
        "cut_ok": bool(norm_gap <= epsilon + _CERT_SLACK),
        "columns_ok": bool(would_add.size == 0),
        "norm_gap": float(norm_gap),
        "n_pricing_hits": int(would_add.size),
    }


def _scatter(sol, n):
    pi = np.zeros(n)
    pi[sol.active_samples] = sol.duals
    return pi


def slope_oracle_small(d: Dataset, weights: SlopeWeights, guard=50) -> float:
    """Exact quadratic-size LP for small instances.

    The sorted-L1 norm is a nonnegative combination of largest-k partial sums
    of |beta| (weights lam_k - lam_{k+1}); each partial sum is modeled with
    one scalar and one vector of auxiliaries via the standard largest-k LP
    representation.  Intended as an independent small-p oracle.
    """
    p, n = d.p, d.n
    if p > guard:
        raise ValueError(f"oracle limited to p <= {guard}")
    if weights.p != p:
        raise ValueError("weight sequence length must equal the feature count")
    lam = weights.lambdas
    tilde = np.empty(p)
    tilde[:-1] = lam[:-1] - lam[1:]
    tilde[-1] = lam[-1]

    model = lp.LpModel()
    b0 = model.append_column(0.0, [], [], -np.inf, np.inf)
    hinge_rows = [model.append_row(lp.GE, 1.0, [b0], [d.y[i]]) for i in range(n)]
    xi_cols = [model.append_column(1.0, [r], [1.0]) for r in hinge_rows]
    X = d.dense_block(np.arange(n), np.arange(p))
    pos, neg = [], []
    for j in range(p):
        coef = d.y * X[:, j]
        pos.append(model.append_column(0.0, hinge_rows, coef))
        neg.append(model.append_column(0.0, hinge_rows, -coef))
    # largest-k machinery: for each k, theta_k free (cost k * tilde_k) and a
    # nonnegative vector v_k (cost tilde_k) with theta_k + v_kj >= |beta_j|
    for k in range(1, p + 1):
        t_k = tilde[k - 1]
        link_rows = [model.append_row(lp.GE, 0.0, [pos[j], neg[j]], [-1.0, -1.0]) for j in range(p)]
        model.append_column(k * t_k, link_rows, np.ones(p), -np.inf, np.inf)  # theta_k
        for row in link_rows:
            model.append_column(t_k, [row], [1.0])  # v_kj
    basis = lp.cold_basis(model)
    # margin rows start feasible with their slack-of-cost-1 columns basic
    for i, row in enumerate(hinge_rows):
        s = model.slack_of_row[row]
        posn = int(np.nonzero(basis.basic == s)[0][0])
        basis.basic[posn] = xi_cols[i]
        basis.status[xi_cols[i]] = lp.BASIC
        basis.status[s] = lp.AT_UPPER
    sol, _ = lp.solve(model, basis)
    if sol.status != "optimal":
        raise RuntimeError(f"oracle LP ended with status {sol.status}")
    return float(sol.objective)
