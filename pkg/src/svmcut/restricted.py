"""Shared machinery for restricted hinge-loss LPs.

All three models (L1, group, Slope) share the same skeleton: one margin row
per active sample with a slack variable of cost 1, a signed pair of columns
per active feature, and a free intercept column.  Penalty-specific structure
(per-feature costs, group linking rows, epigraph cut rows) is layered on by
subclasses.  Samples and features only ever grow, and the simplex basis is
carried across every mutation.
"""

from __future__ import annotations

import numpy as np

from . import lp
from .data import Dataset

_DUAL_BOX_SLACK = 1e-6


class HingeRestriction:
    """Restricted LP over active samples/features, warm-started across growth."""

    def __init__(self, d: Dataset, samples):
        self.d = d
        self.model = lp.LpModel()
        self.basis = None
        self.samples = []
        self.row_of_sample = {}
        self.xi_of_row = {}
        self.features = []
        self.pos_col = {}
        self.neg_col = {}
        self.total_pivots = 0
        self.solve_count = 0
        self.last = None
        self.b0_col = self.model.append_column(0.0, [], [], -np.inf, np.inf)
        samples = np.asarray(samples, dtype=int)
        if samples.size == 0:
            raise ValueError("restricted model needs at least one active sample")
        self._append_sample_rows(samples)
        self.basis = self._fresh_basis()

    # -- penalty hooks ------------------------------------------------------
    def _feature_cost(self, j):
        return 0.0

    def _feature_extra_rows(self, j, k):
        """Extra (rows, values) the signed columns of feature j touch beyond
        the margin rows; k is the position within the current batch."""
        return [], []

    # -- growth ---------------------------------------------------------------
    def _append_sample_rows(self, new_samples):
        d = self.d
        new_samples = np.asarray(new_samples, dtype=int)
        block = d.dense_block(new_samples, self.features) if self.features else None
        new_rows = []
        for k, i in enumerate(new_samples):
            i = int(i)
            if i in self.row_of_sample:
                raise ValueError(f"sample {i} already active")
            yi = d.y[i]
            cols = [self.b0_col]
            vals = [yi]
            if block is not None:
                xi_row = block[k]
                for t, j in enumerate(self.features):
                    coef = yi * xi_row[t]
                    if coef != 0.0:
                        cols.extend([self.pos_col[j], self.neg_col[j]])
                        vals.extend([coef, -coef])
            row = self.model.append_row(lp.GE, 1.0, cols, vals)
            xi = self.model.append_column(1.0, [row], [1.0])
            self.samples.append(i)
            self.row_of_sample[i] = row
            self.xi_of_row[row] = xi
            new_rows.append(row)
        return new_rows

    def add_samples(self, new_samples):
        """Activate margin rows; their slack-of-cost-1 columns enter the basis
        so the warm start stays primal feasible."""
        if self.basis is None:
            self._append_sample_rows(new_samples)
            return
        old = self.basis
        new_rows = self._append_sample_rows(new_samples)
        ext = lp._extend_basis(self.model, old)
        for row in new_rows:
            slack = self.model.slack_of_row[row]
            xi = self.xi_of_row[row]
            pos = int(np.nonzero(ext.basic == slack)[0][0])
            ext.basic[pos] = xi
            ext.status[xi] = lp.BASIC
            ext.status[slack] = lp.AT_UPPER
        self.basis = ext

    def add_features(self, new_features):
        d = self.d
        new_features = np.asarray(new_features, dtype=int)
        if new_features.size == 0:
            return
        rows = np.asarray([self.row_of_sample[i] for i in self.samples], dtype=int)
        y_act = d.y[np.asarray(self.samples, dtype=int)]
        block = d.dense_block(self.samples, new_features)
        for k, j in enumerate(new_features):
            j = int(j)
            if j in self.pos_col:
                raise ValueError(f"feature {j} already active")
            coef = y_act * block[:, k]
            extra_rows, extra_vals = self._feature_extra_rows(j, k)
            extra_rows = np.asarray(extra_rows, dtype=int)
            extra_vals = np.asarray(extra_vals, dtype=float)
            cost = self._feature_cost(j)
            all_rows = np.concatenate([rows, extra_rows])
            pos = self.model.append_column(cost, all_rows, np.concatenate([coef, extra_vals]))
            neg = self.model.append_column(cost, all_rows, np.concatenate([-coef, extra_vals]))
            self.features.append(j)
            self.pos_col[j] = pos
            self.neg_col[j] = neg

    # -- solving ----------------------------------------------------------------
    def _fresh_basis(self):
        basic = []
        status = np.empty(self.model.ncols, dtype=np.int8)
        for j in range(self.model.ncols):
            status[j] = lp._default_status(self.model.lower[j], self.model.upper[j])
        for row in range(self.model.nrows):
            var = self.xi_of_row.get(row, self.model.slack_of_row[row])
            basic.append(var)
            status[var] = lp.BASIC
        return lp.Basis(np.asarray(basic, dtype=int), status)

    def solve(self):
        sol, self.basis = lp.solve(self.model, self.basis)
        self.total_pivots += sol.pivot_count
        self.solve_count += 1
        self.last = sol
        return sol

    # -- extraction ----------------------------------------------------------------
    def coef_pairs(self, sol=None):
        sol = sol or self.last
        idx = np.asarray(self.features, dtype=int)
        vals = np.array([sol.primal[self.pos_col[j]] - sol.primal[self.neg_col[j]] for j in self.features])
        return idx, vals

    def coef_dense(self, sol=None):
        idx, vals = self.coef_pairs(sol)
        out = np.zeros(self.d.p)
        out[idx] = vals
        return out

    def intercept(self, sol=None):
        sol = sol or self.last
        return float(sol.primal[self.b0_col])

    def xi_values(self, sol=None):
        sol = sol or self.last
        return np.array([sol.primal[self.xi_of_row[self.row_of_sample[i]]] for i in self.samples])

    def sample_duals(self, sol=None):
        """Duals of the margin rows, boxed into [0, 1]."""
        sol = sol or self.last
        pi = np.array([sol.duals[self.row_of_sample[i]] for i in self.samples])
        if pi.size and (pi.min() < -_DUAL_BOX_SLACK or pi.max() > 1.0 + _DUAL_BOX_SLACK):
            raise RuntimeError("margin-row duals escaped the [0, 1] box beyond tolerance")
        return np.clip(pi, 0.0, 1.0)

    def duals_full(self, sol=None):
        """Margin duals scattered to a length-n vector (zero off the working set)."""
        pi = np.zeros(self.d.n)
        pi[np.asarray(self.samples, dtype=int)] = self.sample_duals(sol)
        return pi


def ensure_both_classes(d: Dataset, samples):
    """Force one sample of each class into the working set; with only one
    class active the dual equality on the intercept is degenerate."""
    samples = np.unique(np.asarray(samples, dtype=int))
    for cls in (1.0, -1.0):
        if samples.size == 0 or not np.any(d.y[samples] == cls):
            cand = np.nonzero(d.y == cls)[0]
            if cand.size == 0:
                raise ValueError("dataset does not contain both classes")
            samples = np.union1d(samples, cand[:1])
    return samples
