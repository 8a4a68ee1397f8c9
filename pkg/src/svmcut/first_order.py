"""Smoothed-hinge objective and the first-order engines used for initialization.

The hinge loss is replaced by its strongly-concave-regularized max form, which
is differentiable with a Lipschitz gradient; an accelerated proximal gradient
method (or, for grouped penalties, cyclic proximal block coordinate descent)
then produces a cheap approximate solution whose support seeds the
cutting-plane drivers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .data import Dataset, GroupStructure
from .prox import prox_linf

_POWER_TOL = 1e-6
_POWER_MAX_ITER = 10_000
_LIP_SAFETY = 1.01


def _power_sigma_max(matvec, dim, fallback):
    """Largest eigenvalue of a PSD operator by power iteration; deterministic
    start, Frobenius-style fallback on non-convergence."""
    v = np.ones(dim) / math.sqrt(dim)
    sigma = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = matvec(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_new = w / norm
        sigma_new = float(v_new @ matvec(v_new))
        if abs(sigma_new - sigma) <= _POWER_TOL * max(sigma_new, 1e-30):
            return sigma_new
        sigma, v = sigma_new, v_new
    return fallback()


class SmoothedObjective:
    """Smoothed hinge loss F(beta, intercept) with smoothing level tau.

    Writing z_i = 1 - y_i (x_i^T beta + intercept) and
    w_i = clip(z_i / (2 tau), -1, 1), the per-sample value is
    (z_i + w_i z_i) / 2 - tau w_i^2 / 2 and the gradient stacks the beta part
    with the intercept part.  The gradient is Lipschitz with constant
    sigma_max(Xt^T Xt) / (4 tau), Xt being X with a ones column appended.
    """

    def __init__(self, dataset: Dataset, tau: float):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.dataset = dataset
        self.tau = float(tau)
        self._lip = None

    def with_tau(self, tau):
        return SmoothedObjective(self.dataset, tau)

    def _zw(self, beta, intercept):
        z = 1.0 - self.dataset.margins(beta, intercept)
        w = np.clip(z / (2.0 * self.tau), -1.0, 1.0)
        return z, w

    def value(self, beta, intercept):
        z, w = self._zw(beta, intercept)
        return float(np.sum(0.5 * (z + w * z) - 0.5 * self.tau * w * w))

    def value_grad(self, beta, intercept):
        """One-pass value and gradient; the gradient is length p+1 with the
        intercept component last."""
        d = self.dataset
        z, w = self._zw(beta, intercept)
        val = float(np.sum(0.5 * (z + w * z) - 0.5 * self.tau * w * w))
        common = -0.5 * d.y * (1.0 + w)
        g_beta = d.feature_inner(common)
        g0 = float(common.sum())
        return val, np.concatenate([g_beta, [g0]])

    def hinge_value(self, beta, intercept):
        z = 1.0 - self.dataset.margins(beta, intercept)
        return float(np.maximum(z, 0.0).sum())

    def lipschitz(self):
        """Upper bound on the gradient Lipschitz constant (1% safety margin)."""
        if self._lip is None:
            d = self.dataset
            X = d.X

            def matvec(v):
                # (Xt^T Xt) v with Xt = [X, 1]
                head, last = v[:-1], v[-1]
                t = np.asarray(X @ head).ravel() + last
                return np.concatenate([np.asarray(X.T @ t).ravel(), [t.sum()]])

            def frobenius():
                if sp.issparse(X):
                    sq = float(X.multiply(X).sum())
                else:
                    sq = float((X * X).sum())
                return sq + d.n  # ||Xt||_F^2 >= sigma_max

            sigma = _power_sigma_max(matvec, d.p + 1, frobenius)
            self._lip = max(sigma, 1e-12) / (4.0 * self.tau) * _LIP_SAFETY
        return self._lip


def smoothed_value_grad(obj: SmoothedObjective, beta, intercept):
    return obj.value_grad(beta, intercept)


def lipschitz(obj: SmoothedObjective):
    return obj.lipschitz()


@dataclass
class FoConfig:
    max_iter: int = 200
    tol: float = 1e-3
    tau: float = 0.2
    tau_stages: int = 1
    tau_ratio: float = 0.7
    accelerate: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def tau_schedule(self):
        return [self.tau * self.tau_ratio**k for k in range(self.tau_stages)]


def accelerated_prox_gradient(
    obj: SmoothedObjective,
    prox: Callable[[np.ndarray, float], np.ndarray],
    penalty: Callable[[np.ndarray], float],
    cfg: Optional[FoConfig] = None,
    init=None,
):
    """Accelerated proximal gradient on the smoothed composite objective.

    ``prox(v, step)`` must return the prox of ``step * penalty`` at ``v``; the
    intercept is unpenalized and takes the plain gradient step.  With a
    multi-stage tau schedule the momentum restarts at each stage.  Returns
    ``(beta, intercept, info)`` where ``info['objective']`` traces the
    smoothed composite value per iteration.
    """
    cfg = cfg or FoConfig()
    p = obj.dataset.p
    if init is None:
        x_prev = np.zeros(p + 1)
    else:
        beta0, b0 = init
        x_prev = np.concatenate([np.asarray(beta0, dtype=float), [float(b0)]])

    trace = []
    stage_true_objectives = []
    iterations = 0
    for tau in cfg.tau_schedule():
        o = obj.with_tau(tau)
        L = o.lipschitz()
        step = 1.0 / L
        y_cur = x_prev.copy()
        q = 1.0
        for _ in range(cfg.max_iter):
            _, g = o.value_grad(y_cur[:p], y_cur[p])
            cand = y_cur - step * g
            x_new = np.empty_like(cand)
            x_new[:p] = prox(cand[:p], step)
            x_new[p] = cand[p]
            iterations += 1
            trace.append(o.value(x_new[:p], x_new[p]) + penalty(x_new[:p]))
            if cfg.accelerate:
                q_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * q * q))
                y_cur = x_new + ((q - 1.0) / q_new) * (x_new - x_prev)
                q = q_new
            else:
                y_cur = x_new
            delta = np.linalg.norm(x_new - x_prev)
            x_prev = x_new
            if delta <= cfg.tol:
                break
        stage_true_objectives.append(o.hinge_value(x_prev[:p], x_prev[p]) + penalty(x_prev[:p]))
    info = {
        "objective": trace,
        "iterations": iterations,
        "stage_true_objectives": stage_true_objectives,
    }
    return x_prev[:p], float(x_prev[p]), info


def block_cd_group(
    obj: SmoothedObjective,
    groups: GroupStructure,
    lam: float,
    cfg: Optional[FoConfig] = None,
    init=None,
):
    """Cyclic proximal block coordinate descent for the grouped L-infinity
    penalty on the smoothed hinge loss.

    Each group takes a proximal step with its own Lipschitz constant
    sigma_max(X_g^T X_g) / (4 tau); the intercept follows with a plain
    gradient step.  The fitted values X beta are maintained incrementally.
    Groups sitting at zero whose proximal step keeps them at zero are skipped
    (no fitted-value update).  Stops when the largest coefficient change in a
    sweep falls below the tolerance.
    """
    cfg = cfg or FoConfig()
    d = obj.dataset
    groups.validate_partition(d.p)
    p = d.p
    if init is None:
        beta = np.zeros(p)
        b0 = 0.0
    else:
        beta = np.asarray(init[0], dtype=float).copy()
        b0 = float(init[1])

    blocks = [d.dense_block(np.arange(d.n), g) for g in groups.groups]
    fitted = d.decision_values(beta, 0.0)  # X beta, intercept tracked separately

    trace = []
    sweeps = 0
    for tau in cfg.tau_schedule():
        inv2tau = 1.0 / (2.0 * tau)
        lips = []
        for Xg in blocks:
            sig = _power_sigma_max(lambda v, Xg=Xg: Xg.T @ (Xg @ v), Xg.shape[1], lambda Xg=Xg: float((Xg * Xg).sum()))
            lips.append(max(sig, 1e-12) / (4.0 * tau) * _LIP_SAFETY)
        lip0 = max(d.n / (4.0 * tau) * _LIP_SAFETY, 1e-12)

        for _ in range(cfg.max_iter):
            sweeps += 1
            max_change = 0.0
            for g, (idx, Xg, Lg) in enumerate(zip(groups.groups, blocks, lips)):
                z = 1.0 - d.y * (fitted + b0)
                wv = np.clip(z * inv2tau, -1.0, 1.0)
                grad_g = Xg.T @ (-0.5 * d.y * (1.0 + wv))
                cand = beta[idx] - grad_g / Lg
                new_g = prox_linf(cand, lam / Lg)
                delta = new_g - beta[idx]
                if np.any(delta != 0.0):
                    fitted += Xg @ delta
                    beta[idx] = new_g
                    max_change = max(max_change, float(np.abs(delta).max()))
            z = 1.0 - d.y * (fitted + b0)
            wv = np.clip(z * inv2tau, -1.0, 1.0)
            g0 = float((-0.5 * d.y * (1.0 + wv)).sum())
            b0_new = b0 - g0 / lip0
            max_change = max(max_change, abs(b0_new - b0))
            b0 = b0_new

            o = SmoothedObjective(d, tau)
            trace.append(o.value(beta, b0) + lam * group_linf_norm(beta, groups))
            if max_change <= cfg.tol:
                break

    info = {
        "objective": trace,
        "sweeps": sweeps,
        "fitted": fitted,
    }
    return beta, b0, info


def group_linf_norm(beta, groups: GroupStructure) -> float:
    beta = np.asarray(beta, dtype=float)
    return float(sum(np.abs(beta[g]).max() for g in groups.groups))
