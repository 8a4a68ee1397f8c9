"""Initialization heuristics: correlation screening, subsample-averaged
first-order fits, and working-set extraction from approximate solutions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .data import Dataset, GroupStructure
from .first_order import FoConfig, SmoothedObjective, accelerated_prox_gradient
from .prox import soft_threshold


def correlation_screen(d: Dataset, m) -> np.ndarray:
    """Indices of the m largest |x_j^T y|, ties broken by index."""
    if not (1 <= m <= d.p):
        raise ValueError("screen width must lie in [1, p]")
    scores = np.abs(d.feature_inner(d.y))
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:m])


def group_correlation_screen(d: Dataset, groups: GroupStructure, m) -> np.ndarray:
    """Top m groups by the summed |x_j^T y| of their features."""
    if not (1 <= m <= groups.G):
        raise ValueError("screen width must lie in [1, G]")
    scores = np.abs(d.feature_inner(d.y))
    per_group = np.array([scores[g].sum() for g in groups.groups])
    order = np.argsort(-per_group, kind="stable")
    return np.sort(order[:m])


def _subset_dataset(d: Dataset, rows):
    X = d.X[rows] if not d.is_sparse else d.X[rows]
    return Dataset(X, d.y[rows])


def subsample_average_fit(
    d: Dataset,
    lam,
    n0: Optional[int] = None,
    mu_tol: float = 1e-1,
    q_max: Optional[int] = None,
    fo_cfg: Optional[FoConfig] = None,
    seed: int = 0,
    jobs: int = 1,
) -> np.ndarray:
    """Average of first-order fits on independent row subsamples.

    Each subsample of size n0 is solved at the sample-size-adjusted penalty
    (n0/n) * lam; the running average stops once it moves less than mu_tol
    or after q_max rounds.  Subsets get independent seed streams, so the
    result is identical for any degree of parallelism.
    """
    n = d.n
    if n0 is None:
        n0 = min(n, 10 * d.p)
    if n0 > n:
        raise ValueError("subsample size exceeds n")
    if q_max is None:
        q_max = max(1, n // n0)
    fo_cfg = fo_cfg or FoConfig(tau_stages=5)
    streams = np.random.SeedSequence(seed).spawn(q_max)
    lam_scaled = lam * n0 / n

    def one_fit(k):
        rng = np.random.default_rng(streams[k])
        rows = np.sort(rng.choice(n, size=n0, replace=False))
        sub = _subset_dataset(d, rows)
        obj = SmoothedObjective(sub, fo_cfg.tau)
        coef, _, _ = accelerated_prox_gradient(
            obj,
            lambda v, step: soft_threshold(v, step * lam_scaled),
            lambda b: lam_scaled * float(np.abs(b).sum()),
            fo_cfg,
        )
        return coef

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fits = list(pool.map(one_fit, range(q_max)))
    else:
        fits = None

    avg = np.zeros(d.p)
    for q in range(1, q_max + 1):
        coef = fits[q - 1] if fits is not None else one_fit(q - 1)
        prev = avg.copy()
        avg = prev + (coef - prev) / q
        if q >= 2 and np.linalg.norm(avg - prev) <= mu_tol:
            break
    return avg


def init_columns_from_beta(coef, cap=200) -> np.ndarray:
    """Top-cap nonzero coefficients by magnitude (ties by index), sorted."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    coef = np.asarray(coef, dtype=float)
    nz = np.nonzero(coef)[0]
    if nz.size == 0:
        return nz
    order = nz[np.argsort(-np.abs(coef[nz]), kind="stable")]
    return np.sort(order[:cap])


def init_constraints_from_beta(d: Dataset, coef, intercept) -> np.ndarray:
    """Samples with a strictly positive hinge loss at the given solution."""
    z = 1.0 - d.margins(np.asarray(coef, dtype=float), intercept)
    return np.nonzero(z > 0.0)[0]
