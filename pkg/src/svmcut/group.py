"""Cutting-plane drivers for the grouped L-infinity penalty.

The restricted LP carries one bound variable per active group (costing lam)
linked to its signed coefficient columns by one row per coefficient; pricing
happens at group granularity: a group enters when the summed absolute margin
correlations of its features exceed lam by more than epsilon.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lp
from .data import Dataset, GroupStructure, lambda_max_group
from .l1 import CutgenConfig, SvmSolution, WorkingSet, hinge_loss, lambda_max_duals, price_constraints
from .restricted import HingeRestriction, ensure_both_classes

_CERT_SLACK = 1e-9


def group_norm(coef_dense, groups: GroupStructure) -> float:
    coef_dense = np.asarray(coef_dense, dtype=float)
    return float(sum(np.abs(coef_dense[g]).max() for g in groups.groups))


def group_objective(d: Dataset, groups, lam, coef_dense, intercept) -> float:
    return hinge_loss(d, coef_dense, intercept) + lam * group_norm(coef_dense, groups)


class GroupRestriction(HingeRestriction):
    """Restricted grouped model: coefficient columns are free of cost; each
    active group's bound variable costs lam and dominates the coefficient
    magnitudes through linking rows."""

    def __init__(self, d, groups, lam, samples, active_groups):
        self.groups = groups
        self.lam = float(lam)
        self.active_groups = []
        self.v_col = {}
        self.link_row = {}
        super().__init__(d, samples)
        self.add_groups(active_groups)

    def _feature_cost(self, j):
        return 0.0

    def _feature_extra_rows(self, j, k):
        return [self.link_row[j]], [-1.0]

    def add_groups(self, new_groups):
        for g in np.asarray(new_groups, dtype=int):
            g = int(g)
            if g in self.v_col:
                raise ValueError(f"group {g} already active")
            members = self.groups.groups[g]
            rows = [self.model.append_row(lp.GE, 0.0) for _ in members]
            for j, row in zip(members, rows):
                self.link_row[int(j)] = row
            self.v_col[g] = self.model.append_column(self.lam, rows, np.ones(len(rows)))
            self.basis = lp._extend_basis(self.model, self.basis)
            self.add_features(members)
            self.active_groups.append(g)

    def set_lambda(self, lam):
        self.lam = float(lam)
        cols = [self.v_col[g] for g in self.active_groups]
        if cols:
            self.model.set_costs(cols, lam)

    def group_values(self, sol=None):
        sol = sol or self.last
        return np.array([sol.primal[self.v_col[g]] for g in self.active_groups])


def build_group_restricted(d: Dataset, groups: GroupStructure, lam, active_groups, samples) -> GroupRestriction:
    groups.validate_partition(d.p)
    return GroupRestriction(d, groups, lam, samples, active_groups)


def price_groups(d: Dataset, pi, lam, groups: GroupStructure, active_groups, epsilon, max_added=None) -> np.ndarray:
    """Inactive groups with lam - sum_{j in group} |sum_i y_i x_ij pi_i|
    below -epsilon, most negative first, returned sorted (optionally capped)."""
    q = np.abs(d.feature_inner(d.y * np.asarray(pi, dtype=float)))
    scores = np.array([lam - q[g].sum() for g in groups.groups])
    scores[np.asarray(active_groups, dtype=int)] = np.inf
    violated = np.nonzero(scores < -epsilon)[0]
    if violated.size == 0:
        return violated
    order = violated[np.argsort(scores[violated], kind="stable")]
    if max_added is not None:
        order = order[:max_added]
    return np.sort(order)


def group_path_init(d: Dataset, groups: GroupStructure, j0) -> np.ndarray:
    """The j0 groups with the largest summed |margin correlation| under the
    top-of-path duals."""
    if j0 < 1:
        raise ValueError("j0 must be >= 1")
    q = np.abs(d.feature_inner(d.y * lambda_max_duals(d.y)))
    scores = np.array([q[g].sum() for g in groups.groups])
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[: min(j0, groups.G)])


def _outer_loop_group(rp, d, groups, cfg, price_cols, price_rows):
    certified = False
    outer = 0
    while outer < cfg.max_outer:
        sol = rp.solve()
        outer += 1
        if sol.status != "optimal":
            break
        new_rows = np.empty(0, dtype=int)
        new_groups = np.empty(0, dtype=int)
        if price_rows:
            new_rows = price_constraints(
                d, rp.coef_dense(sol), rp.intercept(sol), rp.samples, cfg.epsilon, cfg.max_added_per_round
            )
        if price_cols:
            new_groups = price_groups(
                d, rp.duals_full(sol), rp.lam, groups, rp.active_groups, cfg.epsilon, cfg.max_added_per_round
            )
        if new_rows.size == 0 and new_groups.size == 0:
            certified = True
            break
        if new_rows.size:
            rp.add_samples(new_rows)
        if new_groups.size:
            rp.add_groups(new_groups)
    return certified, outer


def _package_group(rp, d, groups, lam, certified, outer, t0) -> SvmSolution:
    sol = rp.last
    idx, vals = rp.coef_pairs(sol)
    nz = vals != 0.0
    coef = rp.coef_dense(sol)
    b0 = rp.intercept(sol)
    out = SvmSolution(
        coef_indices=idx[nz],
        coef_values=vals[nz],
        intercept=b0,
        active_samples=np.asarray(rp.samples, dtype=int),
        slacks=rp.xi_values(sol),
        duals=rp.sample_duals(sol),
        objective=group_objective(d, groups, lam, coef, b0),
        lp_objective=sol.objective,
        lam=lam,
        certified=certified,
        diagnostics={
            "outer_rounds": outer,
            "n_active_samples": len(rp.samples),
            "n_active_groups": len(rp.active_groups),
            "pivots": rp.total_pivots,
            "seconds": time.perf_counter() - t0,
            "lp_status": sol.status,
            "active_groups": np.asarray(rp.active_groups, dtype=int),
            "group_values": rp.group_values(sol),
        },
    )
    return out


def solve_group_colgen(d, groups, lam, groups_init=None, cfg: Optional[CutgenConfig] = None) -> SvmSolution:
    """Column generation at group granularity with all samples active."""
    cfg = cfg or CutgenConfig()
    groups.validate_partition(d.p)
    t0 = time.perf_counter()
    init = np.unique(np.asarray(groups_init, dtype=int)) if groups_init is not None else np.empty(0, dtype=int)
    rp = GroupRestriction(d, groups, lam, np.arange(d.n), init)
    certified, outer = _outer_loop_group(rp, d, groups, cfg, price_cols=True, price_rows=False)
    return _package_group(rp, d, groups, lam, certified, outer, t0)


def solve_group_colcon(d, groups, lam, ws: Optional[WorkingSet] = None, groups_init=None,
                       cfg: Optional[CutgenConfig] = None) -> SvmSolution:
    """Combined sample and group generation, both priced per round."""
    cfg = cfg or CutgenConfig()
    groups.validate_partition(d.p)
    t0 = time.perf_counter()
    samples = ws.samples if ws is not None else np.empty(0, dtype=int)
    samples = ensure_both_classes(d, samples)
    init = np.unique(np.asarray(groups_init, dtype=int)) if groups_init is not None else np.empty(0, dtype=int)
    rp = GroupRestriction(d, groups, lam, samples, init)
    certified, outer = _outer_loop_group(rp, d, groups, cfg, price_cols=True, price_rows=True)
    return _package_group(rp, d, groups, lam, certified, outer, t0)


def group_regularization_path(d, groups, grid, j0=10, cfg: Optional[CutgenConfig] = None):
    """Warm-started group column generation down a decreasing penalty grid."""
    cfg = cfg or CutgenConfig()
    groups.validate_partition(d.p)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid.size > 1 and np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be strictly decreasing")
    if grid[0] < lambda_max_group(d, groups) * (1 - 1e-9):
        raise ValueError("grid must start at or above the zero-solution threshold")
    rp = GroupRestriction(d, groups, grid[0], np.arange(d.n), group_path_init(d, groups, j0))
    out = []
    for lam in grid:
        t0 = time.perf_counter()
        rp.set_lambda(lam)
        certified, outer = _outer_loop_group(rp, d, groups, cfg, price_cols=True, price_rows=False)
        out.append(_package_group(rp, d, groups, lam, certified, outer, t0))
    return out


def certify_group(d, groups, lam, sol: SvmSolution, epsilon) -> dict:
    """Full scan: every group's summed |margin correlation| within lam + epsilon,
    every margin row within epsilon."""
    pi = np.zeros(d.n)
    pi[sol.active_samples] = sol.duals
    q = np.abs(d.feature_inner(d.y * pi))
    group_load = np.array([q[g].sum() for g in groups.groups])
    coef = sol.coef_dense(d.p)
    margins_viol = 1.0 - d.margins(coef, sol.intercept)
    return {
        "dual_ok": bool(group_load.max() <= lam + epsilon + _CERT_SLACK),
        "primal_ok": bool(margins_viol.max() <= epsilon + _CERT_SLACK),
        "max_group_load": float(group_load.max()),
        "max_margin_violation": float(margins_viol.max()),
    }
