"""Bounded-variable revised simplex with warm starts and incremental growth.

The cutting-plane drivers build small restricted LPs, solve them, then append
columns and/or rows and re-solve from the previous basis.  This module provides
exactly that substrate:

* ``LpModel`` stores a minimize-objective LP in row/column form.  Every row
  carries an implicit slack variable (bounded by the row sense) so that the
  basis always has one variable per row and warm starts survive model growth.
* ``solve`` runs a primal simplex over bounded variables.  Infeasible warm
  starts (e.g. after adding violated rows) are handled by a composite phase-1
  objective on the sum of infeasibilities; no big-M constants.
* The basis matrix is factorized densely (LU) and updated in product form,
  with a full refactorization every ``refactor_every`` pivots and before any
  optimality claim.

Anti-cycling: Dantzig pricing normally, falling back to Bland's rule after a
run of degenerate pivots.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg as sla

# nonbasic/basic status codes
AT_LOWER = 0
AT_UPPER = 1
BASIC = 2
FREE = 3  # nonbasic free variable, pinned at 0

GE, LE, EQ = ">=", "<=", "="

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGEN_TOL = 1e-11
DEFAULT_BLAND_AFTER = 50
DEFAULT_REFACTOR_EVERY = 100

INF = np.inf


class FactorizationError(RuntimeError):
    """Basis matrix could not be factorized even after repair attempts."""


class NewColumn(NamedTuple):
    cost: float
    rows: Sequence[int]
    values: Sequence[float]
    lower: float = 0.0
    upper: float = INF


class NewRow(NamedTuple):
    sense: str
    rhs: float
    cols: Sequence[int] = ()
    values: Sequence[float] = ()


class LpModel:
    """A minimize LP with bounded variables and sensed rows.

    Rows and columns may be appended at any time; indices of existing
    variables and rows never change.  Each appended row also appends its slack
    column (cost 0, bounds fixed by the sense), so ``ncols`` counts slacks.
    """

    def __init__(self):
        self._A = np.zeros((16, 16))
        self.nrows = 0
        self.ncols = 0
        self.cost = np.zeros(0)
        self.lower = np.zeros(0)
        self.upper = np.zeros(0)
        self.rhs = np.zeros(0)
        self.sense = []
        self.slack_of_row = []
        self.is_slack = np.zeros(0, dtype=bool)

    # -- storage ----------------------------------------------------------
    def _reserve(self, rows, cols):
        r_cap, c_cap = self._A.shape
        if rows > r_cap or cols > c_cap:
            new_r = max(rows, 2 * r_cap)
            new_c = max(cols, 2 * c_cap)
            fresh = np.zeros((new_r, new_c))
            fresh[: self.nrows, : self.ncols] = self._A[: self.nrows, : self.ncols]
            self._A = fresh

    @property
    def matrix(self):
        """Dense live view of the constraint matrix (rows x cols)."""
        return self._A[: self.nrows, : self.ncols]

    def _append_scalar_arrays(self, cost, lower, upper):
        self.cost = np.append(self.cost, cost)
        self.lower = np.append(self.lower, lower)
        self.upper = np.append(self.upper, upper)
        self.is_slack = np.append(self.is_slack, False)

    # -- growth -----------------------------------------------------------
    def append_column(self, cost, rows, values, lower=0.0, upper=INF, _slack=False):
        """Append one variable; returns its index."""
        rows = np.asarray(rows, dtype=int)
        if rows.size and (rows.min() < 0 or rows.max() >= self.nrows):
            raise ValueError("column coefficient row index out of range")
        if not np.isfinite(cost):
            raise ValueError("column cost must be finite")
        if lower > upper:
            raise ValueError("column lower bound exceeds upper bound")
        j = self.ncols
        self._reserve(self.nrows, j + 1)
        self.ncols += 1
        self._append_scalar_arrays(cost, lower, upper)
        if _slack:
            self.is_slack[j] = True
        if rows.size:
            self._A[rows, j] = np.asarray(values, dtype=float)
        return j

    def append_columns(self, cols: Sequence[NewColumn]):
        return [self.append_column(c.cost, c.rows, c.values, c.lower, c.upper) for c in cols]

    def append_row(self, sense, rhs, cols=(), values=()):
        """Append one row plus its slack column; returns the row index."""
        if sense not in (GE, LE, EQ):
            raise ValueError(f"unknown row sense {sense!r}")
        cols = np.asarray(cols, dtype=int)
        if cols.size and (cols.min() < 0 or cols.max() >= self.ncols):
            raise ValueError("row coefficient column index out of range")
        i = self.nrows
        self._reserve(i + 1, self.ncols)
        self.nrows += 1
        self.rhs = np.append(self.rhs, float(rhs))
        self.sense.append(sense)
        if cols.size:
            self._A[i, cols] = np.asarray(values, dtype=float)
        if sense == GE:
            lo, hi = -INF, 0.0
        elif sense == LE:
            lo, hi = 0.0, INF
        else:
            lo, hi = 0.0, 0.0
        s = self.append_column(0.0, [i], [1.0], lo, hi, _slack=True)
        self.slack_of_row.append(s)
        return i

    def append_rows(self, rows: Sequence[NewRow]):
        return [self.append_row(r.sense, r.rhs, r.cols, r.values) for r in rows]

    def set_costs(self, indices, values):
        self.cost[np.asarray(indices, dtype=int)] = values

    def column(self, j):
        return self._A[: self.nrows, j].copy()

    def dump(self) -> str:
        """Fixed-point MPS-like text dump, for debugging."""
        out = io.StringIO()
        out.write(f"* LP dump: {self.nrows} rows, {self.ncols} cols (slacks included)\n")
        out.write("ROWS\n")
        for i in range(self.nrows):
            out.write(f"  R{i:<6d} {self.sense[i]:>2s} {self.rhs[i]:.12f}\n")
        out.write("COLUMNS\n")
        A = self.matrix
        for j in range(self.ncols):
            tag = "slack" if self.is_slack[j] else "var"
            out.write(f"  C{j:<6d} cost {self.cost[j]:.12f} [{self.lower[j]}, {self.upper[j]}] ({tag})\n")
            for i in np.nonzero(A[:, j])[0]:
                out.write(f"    R{i:<6d} {A[i, j]:.12f}\n")
        return out.getvalue()


@dataclass
class Basis:
    """Simplex basis: one basic variable per row plus per-variable status."""

    basic: np.ndarray
    status: np.ndarray

    def copy(self):
        return Basis(self.basic.copy(), self.status.copy())


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    duals: np.ndarray
    objective: float
    pivot_count: int


def cold_basis(model: LpModel) -> Basis:
    """All-slack basis with structural variables at their nearest bound."""
    status = np.empty(model.ncols, dtype=np.int8)
    for j in range(model.ncols):
        status[j] = _default_status(model.lower[j], model.upper[j])
    basic = np.asarray(model.slack_of_row, dtype=int)
    status[basic] = BASIC
    return Basis(basic, status)


def _default_status(lo, hi):
    if np.isfinite(lo):
        return AT_LOWER
    if np.isfinite(hi):
        return AT_UPPER
    return FREE


def _extend_basis(model: LpModel, warm: Basis) -> Basis:
    """Grow a stale basis to the model's current shape.

    New columns come in nonbasic at their default bound; any row that the old
    basis does not cover gets its slack made basic (possibly infeasible, which
    phase 1 then repairs).
    """
    status = np.empty(model.ncols, dtype=np.int8)
    old_n = warm.status.shape[0]
    status[:old_n] = warm.status
    for j in range(old_n, model.ncols):
        status[j] = _default_status(model.lower[j], model.upper[j])
    basic = list(warm.basic)
    for i in range(warm.basic.shape[0], model.nrows):
        s = model.slack_of_row[i]
        basic.append(s)
        status[s] = BASIC
    basic = np.asarray(basic, dtype=int)
    status[basic] = BASIC
    if basic.shape[0] != model.nrows:
        raise ValueError("warm basis does not match model row count")
    if np.unique(basic).shape[0] != basic.shape[0]:
        raise ValueError("warm basis contains duplicate variables")
    return Basis(basic, status)


class _Factor:
    """Dense LU of the basis with product-form eta updates."""

    def __init__(self, A, basic):
        self.m = basic.shape[0]
        self.etas = []
        if self.m == 0:
            self.lu = None
            return
        B = A[:, basic]
        self.lu = sla.lu_factor(B, check_finite=False)
        d = np.abs(np.diag(self.lu[0]))
        scale = d.max() if d.size else 0.0
        if scale == 0.0 or d.min() <= 1e-13 * max(scale, 1.0):
            raise np.linalg.LinAlgError("singular basis")

    def ftran(self, v):
        if self.m == 0:
            return np.zeros(0)
        x = sla.lu_solve(self.lu, v, check_finite=False)
        for r, w in self.etas:
            piv = x[r] / w[r]
            if piv != 0.0:
                x -= w * piv
            x[r] = piv
        return x

    def btran(self, v):
        if self.m == 0:
            return np.zeros(0)
        y = np.array(v, dtype=float)
        for r, w in reversed(self.etas):
            yr = (y[r] - (w @ y - w[r] * y[r])) / w[r]
            y[r] = yr
        return sla.lu_solve(self.lu, y, trans=1, check_finite=False)

    def update(self, r, w):
        self.etas.append((r, w.copy()))


def _repair_basis(model, basis):
    """Replace linearly dependent basic columns with row slacks."""
    m = model.nrows
    slacks = np.asarray(model.slack_of_row, dtype=int)
    candidates = np.concatenate([basis.basic, slacks])
    B = model.matrix[:, candidates]
    _, _, perm = sla.qr(B, mode="economic", pivoting=True)
    chosen = []
    seen = set()
    for k in perm:
        j = candidates[k]
        if j in seen:
            continue
        chosen.append(j)
        seen.add(j)
        if len(chosen) == m:
            break
    if len(chosen) < m:
        raise FactorizationError("could not assemble a nonsingular basis")
    dropped = set(basis.basic.tolist()) - set(chosen)
    for j in dropped:
        basis.status[j] = _default_status(model.lower[j], model.upper[j])
    basis.basic = np.asarray(chosen, dtype=int)
    basis.status[basis.basic] = BASIC
    return basis


def solve(
    model: LpModel,
    warm: Optional[Basis] = None,
    *,
    max_pivots: Optional[int] = None,
    bland_after: int = DEFAULT_BLAND_AFTER,
    refactor_every: int = DEFAULT_REFACTOR_EVERY,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
):
    """Solve the model, optionally warm-starting from a previous basis.

    Returns ``(LpSolution, Basis)``.  The returned basis re-solves in zero
    pivots if the model is unchanged.  Statuses: ``optimal``, ``infeasible``,
    ``unbounded``, ``iteration_limit``.
    """
    m, N = model.nrows, model.ncols
    A = model.matrix
    cost = model.cost[:N]
    lower = model.lower[:N]
    upper = model.upper[:N]
    b = model.rhs[:m]

    basis = _extend_basis(model, warm) if warm is not None else cold_basis(model)
    basic = basis.basic
    status = basis.status

    if max_pivots is None:
        max_pivots = 10_000 + 40 * (m + N)

    def nonbasic_values():
        x = np.where(status == AT_UPPER, upper, np.where(status == AT_LOWER, lower, 0.0))
        x[basic] = 0.0
        return x

    def refactor():
        nonlocal fact, x_B
        for attempt in range(2):
            try:
                fact = _Factor(A, basic)
                break
            except np.linalg.LinAlgError:
                if attempt == 1:
                    raise FactorizationError("singular basis after repair")
                _repair_basis(model, basis)
        x_N = nonbasic_values()
        x_B = fact.ftran(b - A @ x_N)

    fact = None
    x_B = np.zeros(m)
    refactor()

    pivots = 0
    degen_run = 0
    bland = False
    final_status = "optimal"

    while True:
        if pivots >= max_pivots:
            final_status = "iteration_limit"
            break

        lb = lower[basic]
        ub = upper[basic]
        pad_lo = feas_tol + 1e-9 * np.abs(lb)
        pad_hi = feas_tol + 1e-9 * np.abs(ub)
        below = x_B < lb - pad_lo
        above = x_B > ub + pad_hi
        phase1 = bool(below.any() or above.any())

        if phase1:
            c_B = np.where(below, -1.0, 0.0) + np.where(above, 1.0, 0.0)
            y = fact.btran(c_B)
            d = -(y @ A)
        else:
            c_B = cost[basic]
            y = fact.btran(c_B)
            d = cost - y @ A

        viol = np.zeros(N)
        lo_mask = status == AT_LOWER
        up_mask = status == AT_UPPER
        fr_mask = status == FREE
        viol[lo_mask] = -d[lo_mask]
        viol[up_mask] = d[up_mask]
        viol[fr_mask] = np.abs(d[fr_mask])

        improving = viol > opt_tol
        if not improving.any():
            if fact.etas:
                refactor()  # confirm on a fresh factorization
                continue
            if phase1:
                final_status = "infeasible"
            break

        if bland:
            j = int(np.nonzero(improving)[0][0])
        else:
            j = int(np.argmax(viol))

        if status[j] == AT_LOWER:
            sigma = 1.0
        elif status[j] == AT_UPPER:
            sigma = -1.0
        else:
            sigma = 1.0 if d[j] < 0 else -1.0

        w = fact.ftran(A[:, j])
        delta = -sigma * w

        # ratio test over basic variables (phase-aware) plus entering bound flip
        t = np.full(m, INF)
        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        feas_b = ~below & ~above
        mask = feas_b & dec & np.isfinite(lb)
        if mask.any():
            t[mask] = (x_B[mask] - lb[mask]) / -delta[mask]
        mask = feas_b & inc & np.isfinite(ub)
        if mask.any():
            t[mask] = (ub[mask] - x_B[mask]) / delta[mask]
        mask = below & inc
        if mask.any():
            t[mask] = (lb[mask] - x_B[mask]) / delta[mask]
        mask = above & dec
        if mask.any():
            t[mask] = (x_B[mask] - ub[mask]) / -delta[mask]
        np.maximum(t, 0.0, out=t)

        t_basic = t.min() if m else INF
        t_flip = upper[j] - lower[j] if (np.isfinite(lower[j]) and np.isfinite(upper[j])) else INF

        if not np.isfinite(t_basic) and not np.isfinite(t_flip):
            if phase1:
                # cannot happen for a well-posed phase-1 direction; retry clean
                if fact.etas:
                    refactor()
                    continue
                raise FactorizationError("phase-1 ratio test found no blocking bound")
            final_status = "unbounded"
            break

        pivots += 1

        if t_flip < t_basic - 1e-12:
            # bound flip, no basis change
            x_B += delta * t_flip
            status[j] = AT_UPPER if status[j] == AT_LOWER else AT_LOWER
            degen_run = 0
            bland = False
        else:
            cands = np.nonzero(t <= t_basic * (1 + 1e-9) + 1e-12)[0]
            if bland:
                r = int(cands[np.argmin(basic[cands])])
            else:
                r = int(cands[np.argmax(np.abs(delta[cands]))])
            tstep = t[r]
            leaving = basic[r]
            to_lower = (delta[r] < 0 and not above[r]) or (delta[r] > 0 and below[r])

            x_B += delta * tstep
            start = lower[j] if status[j] == AT_LOWER else (upper[j] if status[j] == AT_UPPER else 0.0)
            x_B[r] = start + sigma * tstep
            status[leaving] = AT_LOWER if to_lower else AT_UPPER
            status[j] = BASIC
            basic[r] = j
            fact.update(r, w)

            if tstep < DEGEN_TOL:
                degen_run += 1
                if degen_run >= bland_after:
                    bland = True
            else:
                degen_run = 0
                bland = False

        if len(fact.etas) >= refactor_every:
            refactor()

    # package the solution from a fresh factorization
    if fact.etas:
        refactor()
    x = nonbasic_values()
    x[basic] = x_B
    duals = fact.btran(cost[basic])
    objective = float(cost @ x)
    sol = LpSolution(final_status, x, np.asarray(duals), objective, pivots)
    return sol, Basis(basic.copy(), status.copy())


# -- incremental growth with basis bookkeeping ----------------------------

def add_columns(model: LpModel, cols: Sequence[NewColumn], basis: Basis) -> Basis:
    """Append columns; they enter nonbasic at their default bound."""
    model.append_columns(cols)
    return _extend_basis(model, basis)


def add_rows(model: LpModel, rows: Sequence[NewRow], basis: Basis) -> Basis:
    """Append rows; each new row's slack enters the basis.

    The extended basis may be primal-infeasible (a violated row leaves its
    slack out of bounds); the next ``solve`` call repairs that in phase 1.
    """
    model.append_rows(rows)
    return _extend_basis(model, basis)


def duals(model: LpModel, basis: Basis) -> np.ndarray:
    """Row duals q = c_B^T B^{-1} for the given basis."""
    fact = _Factor(model.matrix, basis.basic)
    return np.asarray(fact.btran(model.cost[: model.ncols][basis.basic]))


def reduced_cost(model: LpModel, basis: Basis, j: int) -> float:
    """c_j - q^T A_j for the given basis."""
    q = duals(model, basis)
    return float(model.cost[j] - q @ model.column(j))


def reduced_costs(model: LpModel, basis: Basis) -> np.ndarray:
    q = duals(model, basis)
    return model.cost[: model.ncols] - q @ model.matrix
