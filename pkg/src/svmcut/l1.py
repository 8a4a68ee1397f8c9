"""Cutting-plane drivers for the L1-penalized hinge-loss LP.

Three growth strategies over the restricted LP: column generation (features),
constraint generation (samples), and the combined driver that prices both
against the same solve.  A regularization path reuses one model and basis
across a decreasing penalty grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, lambda_max_l1
from .restricted import HingeRestriction, ensure_both_classes

_CERT_SLACK = 1e-9


@dataclass
class WorkingSet:
    """Active sample rows and feature columns of a restricted model."""

    samples: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.samples = np.unique(np.asarray(self.samples, dtype=int))
        self.features = np.unique(np.asarray(self.features, dtype=int))


@dataclass
class CutgenConfig:
    epsilon: float = 1e-2
    max_outer: int = 200
    max_added_per_round: Optional[int] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class SvmSolution:
    """Sparse solution of a penalized SVM plus solver diagnostics.

    ``objective`` is always recomputed on the full data from the returned
    coefficients; ``lp_objective`` is the restricted LP optimum.
    """

    coef_indices: np.ndarray
    coef_values: np.ndarray
    intercept: float
    active_samples: np.ndarray
    slacks: np.ndarray
    duals: np.ndarray
    objective: float
    lp_objective: float
    lam: float
    certified: bool
    diagnostics: dict = field(default_factory=dict)

    def coef_dense(self, p):
        out = np.zeros(p)
        out[self.coef_indices] = self.coef_values
        return out


def hinge_loss(d: Dataset, coef_dense, intercept) -> float:
    z = 1.0 - d.margins(coef_dense, intercept)
    return float(np.maximum(z, 0.0).sum())


def l1_objective(d: Dataset, lam, coef_dense, intercept) -> float:
    return hinge_loss(d, coef_dense, intercept) + lam * float(np.abs(coef_dense).sum())


class L1Restriction(HingeRestriction):
    """Restricted L1 model: signed coefficient columns cost lam each."""

    def __init__(self, d, lam, samples, features):
        self.lam = float(lam)
        super().__init__(d, samples)
        self.add_features(np.asarray(features, dtype=int))

    def _feature_cost(self, j):
        return self.lam

    def set_lambda(self, lam):
        self.lam = float(lam)
        cols = [self.pos_col[j] for j in self.features] + [self.neg_col[j] for j in self.features]
        if cols:
            self.model.set_costs(cols, lam)


def build_restricted(d: Dataset, lam, ws: WorkingSet) -> L1Restriction:
    """Restricted LP over ws: margin rows for ws.samples, signed coefficient
    columns for ws.features, free intercept."""
    return L1Restriction(d, lam, ws.samples, ws.features)


def price_columns(d: Dataset, pi, lam, features, epsilon, max_added=None) -> np.ndarray:
    """Features outside the working set whose best signed reduced cost
    lam - |sum_i y_i x_ij pi_i| is below -epsilon, most negative first,
    returned as a sorted index array (optionally capped)."""
    pi = np.asarray(pi, dtype=float)
    q = d.feature_inner(d.y * pi)
    red = lam - np.abs(q)
    red[np.asarray(features, dtype=int)] = np.inf
    violated = np.nonzero(red < -epsilon)[0]
    if violated.size == 0:
        return violated
    order = violated[np.argsort(red[violated], kind="stable")]
    if max_added is not None:
        order = order[:max_added]
    return np.sort(order)


def price_constraints(d: Dataset, coef_dense, intercept, samples, epsilon, max_added=None) -> np.ndarray:
    """Samples outside the working set whose margin row is violated by more
    than epsilon: 1 - y_i(x_i^T beta + intercept) > epsilon."""
    viol = 1.0 - d.margins(coef_dense, intercept)
    viol[np.asarray(samples, dtype=int)] = -np.inf
    hits = np.nonzero(viol > epsilon)[0]
    if hits.size == 0:
        return hits
    if max_added is not None and hits.size > max_added:
        order = hits[np.argsort(-viol[hits], kind="stable")][:max_added]
        return np.sort(order)
    return hits


def _outer_loop(rp, d, cfg, price_cols, price_rows):
    certified = False
    outer = 0
    while outer < cfg.max_outer:
        sol = rp.solve()
        outer += 1
        if sol.status != "optimal":
            break
        new_rows = np.empty(0, dtype=int)
        new_cols = np.empty(0, dtype=int)
        if price_rows:
            new_rows = price_constraints(
                d, rp.coef_dense(sol), rp.intercept(sol), rp.samples, cfg.epsilon, cfg.max_added_per_round
            )
        if price_cols:
            new_cols = price_columns(
                d, rp.duals_full(sol), rp.lam, rp.features, cfg.epsilon, cfg.max_added_per_round
            )
        if new_rows.size == 0 and new_cols.size == 0:
            certified = sol.status == "optimal"
            break
        if new_rows.size:
            rp.add_samples(new_rows)
        if new_cols.size:
            rp.add_features(new_cols)
    return certified, outer


def _package(rp, d, lam, certified, outer, t0) -> SvmSolution:
    sol = rp.last
    idx, vals = rp.coef_pairs(sol)
    nz = vals != 0.0
    coef = rp.coef_dense(sol)
    b0 = rp.intercept(sol)
    return SvmSolution(
        coef_indices=idx[nz],
        coef_values=vals[nz],
        intercept=b0,
        active_samples=np.asarray(rp.samples, dtype=int),
        slacks=rp.xi_values(sol),
        duals=rp.sample_duals(sol),
        objective=l1_objective(d, lam, coef, b0),
        lp_objective=sol.objective,
        lam=lam,
        certified=certified,
        diagnostics={
            "outer_rounds": outer,
            "n_active_samples": len(rp.samples),
            "n_active_features": len(rp.features),
            "pivots": rp.total_pivots,
            "seconds": time.perf_counter() - t0,
            "lp_status": sol.status,
        },
    )


def solve_colgen(d: Dataset, lam, features_init=None, cfg: Optional[CutgenConfig] = None) -> SvmSolution:
    """Column generation with all samples active: grow the feature set until
    no signed column prices below -epsilon."""
    cfg = cfg or CutgenConfig()
    t0 = time.perf_counter()
    features = np.unique(np.asarray(features_init, dtype=int)) if features_init is not None else np.empty(0, dtype=int)
    rp = L1Restriction(d, lam, np.arange(d.n), features)
    certified, outer = _outer_loop(rp, d, cfg, price_cols=True, price_rows=False)
    return _package(rp, d, lam, certified, outer, t0)


def solve_congen(d: Dataset, lam, samples_init=None, cfg: Optional[CutgenConfig] = None) -> SvmSolution:
    """Constraint generation with all features active: grow the sample set
    until every margin row is satisfied within epsilon."""
    cfg = cfg or CutgenConfig()
    t0 = time.perf_counter()
    samples = ensure_both_classes(d, samples_init if samples_init is not None else [])
    rp = L1Restriction(d, lam, samples, np.arange(d.p))
    certified, outer = _outer_loop(rp, d, cfg, price_cols=False, price_rows=True)
    return _package(rp, d, lam, certified, outer, t0)


def solve_colcon(d: Dataset, lam, ws: Optional[WorkingSet] = None, cfg: Optional[CutgenConfig] = None) -> SvmSolution:
    """Combined column and constraint generation: each round prices violated
    margin rows and negatively-priced columns against the same solve, adds
    both, and stops when neither fires."""
    cfg = cfg or CutgenConfig()
    t0 = time.perf_counter()
    if ws is None:
        ws = WorkingSet(np.empty(0, dtype=int), np.empty(0, dtype=int))
    samples = ensure_both_classes(d, ws.samples)
    rp = L1Restriction(d, lam, samples, ws.features)
    certified, outer = _outer_loop(rp, d, cfg, price_cols=True, price_rows=True)
    return _package(rp, d, lam, certified, outer, t0)


def lambda_max_duals(y) -> np.ndarray:
    """A feasible dual point at the top of the penalty path: the minority
    class gets dual 1, the majority class the class-size ratio."""
    y = np.asarray(y, dtype=float)
    n_pos = int((y > 0).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required")
    pi = np.empty(y.size)
    if n_pos >= n_neg:
        pi[y > 0] = n_neg / n_pos
        pi[y < 0] = 1.0
    else:
        pi[y > 0] = 1.0
        pi[y < 0] = n_pos / n_neg
    return pi


def path_init_columns(d: Dataset, j0) -> np.ndarray:
    """The j0 features with largest |sum_i y_i x_ij pi_i| under the
    top-of-path duals (the most promising first entrants)."""
    if j0 < 1:
        raise ValueError("j0 must be >= 1")
    q = d.feature_inner(d.y * lambda_max_duals(d.y))
    order = np.argsort(-np.abs(q), kind="stable")
    return np.sort(order[: min(j0, d.p)])


def regularization_path(d: Dataset, grid, j0=10, cfg: Optional[CutgenConfig] = None):
    """Warm-started column generation down a decreasing penalty grid.

    The grid must start at (or above) the level where the zero solution is
    optimal; model, basis and feature set carry over between grid points, and
    every point is individually certified as in ``solve_colgen``.
    """
    cfg = cfg or CutgenConfig()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid.size > 1 and np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be strictly decreasing")
    lmax = lambda_max_l1(d)
    if grid[0] < lmax * (1 - 1e-9):
        raise ValueError("grid must start at or above the zero-solution threshold")
    rp = L1Restriction(d, grid[0], np.arange(d.n), path_init_columns(d, j0))
    out = []
    for lam in grid:
        t0 = time.perf_counter()
        rp.set_lambda(lam)
        certified, outer = _outer_loop(rp, d, cfg, price_cols=True, price_rows=False)
        out.append(_package(rp, d, lam, certified, outer, t0))
    return out


def ara(objectives, best) -> float:
    """Averaged relative accuracy over replications, in percent."""
    f = np.asarray(objectives, dtype=float)
    fstar = np.asarray(best, dtype=float)
    if f.shape != fstar.shape:
        raise ValueError("objective arrays must align")
    if np.any(fstar <= 0):
        raise ValueError("best objectives must be positive")
    return float(np.mean((f - fstar) / fstar) * 100.0)


def certify(d: Dataset, lam, sol: SvmSolution, epsilon) -> dict:
    """Full-data optimality scan for a solution claimed certified.

    Checks signed-column reduced costs over all p features under the
    solution's duals, margin violations over all n samples, and the
    complementary-slackness residuals on the active set.
    """
    coef = sol.coef_dense(d.p)
    pi = np.zeros(d.n)
    pi[sol.active_samples] = sol.duals
    q = d.feature_inner(d.y * pi)
    red = lam - np.abs(q)
    margins_viol = 1.0 - d.margins(coef, sol.intercept)
    act = sol.active_samples
    comp_xi = np.abs((1.0 - sol.duals) * sol.slacks)
    comp_row = np.abs(sol.duals * (sol.slacks - (1.0 - d.margins(coef, sol.intercept)[act])))
    return {
        "dual_ok": bool(red.min() >= -epsilon - _CERT_SLACK),
        "primal_ok": bool(margins_viol.max() <= epsilon + _CERT_SLACK),
        "min_reduced_cost": float(red.min()),
        "max_margin_violation": float(margins_viol.max()),
        "max_comp_slackness": float(max(comp_xi.max(initial=0.0), comp_row.max(initial=0.0))),
    }
