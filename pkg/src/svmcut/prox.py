"""Exact thresholding/projection operators used by the first-order engines.

All four operators are proximal maps of convex penalties and hence firmly
nonexpansive; the test suite checks each one against an independent oracle.
"""

from __future__ import annotations

import numpy as np


def soft_threshold(v, mu):
    """Componentwise prox of mu * ||.||_1: sign(v) * max(|v| - mu, 0)."""
    if mu < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - mu, 0.0)


def project_l1_ball(v, radius):
    """Euclidean projection onto {u : ||u||_1 <= radius} (sort-and-shift)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    s = np.sort(a)[::-1]
    css = np.cumsum(s)
    k = np.arange(1, a.size + 1)
    shifted = s - (css - radius) / k
    rho = np.nonzero(shifted > 0)[0].max() + 1
    theta = (css[rho - 1] - radius) / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def prox_linf(v, mu):
    """Prox of mu * ||.||_inf via the Moreau decomposition: identity minus the
    projection onto the L1-ball of radius mu."""
    if mu < 0:
        raise ValueError("weight must be nonnegative")
    v = np.asarray(v, dtype=float)
    if mu == 0:
        return v.copy()
    return v - project_l1_ball(v, mu)


def _isotonic_nonincreasing(t):
    """Least-squares fit of t under u_1 >= u_2 >= ... (pool adjacent violators)."""
    # blocks as (sum, count); merge while the running means increase
    sums = []
    counts = []
    for x in t:
        cur_s, cur_c = x, 1
        while sums and sums[-1] / counts[-1] < cur_s / cur_c:
            cur_s += sums.pop()
            cur_c += counts.pop()
        sums.append(cur_s)
        counts.append(cur_c)
    out = np.empty(len(t))
    pos = 0
    for s, c in zip(sums, counts):
        out[pos : pos + c] = s / c
        pos += c
    return out


def prox_slope(v, weights):
    """Prox of the sorted-L1 penalty with the given (already scaled) weights.

    Sorts |v| decreasingly, solves the nonincreasing-and-nonnegative isotonic
    problem on |v|_(j) - w_j by pool-adjacent-violators, then restores signs
    and positions.  Ties in |v| break by original index (stable), which makes
    the output deterministic.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(getattr(weights, "lambdas", weights), dtype=float).ravel()
    if w.size != v.size:
        raise ValueError("weight length must match vector length")
    if np.any(w < 0) or np.any(np.diff(w) > 1e-12):
        raise ValueError("weights must be nonincreasing and nonnegative")
    a = np.abs(v)
    order = np.argsort(-a, kind="stable")
    fitted = _isotonic_nonincreasing(a[order] - w)
    u = np.maximum(fitted, 0.0)
    out = np.empty_like(v)
    out[order] = u * np.sign(v[order])
    return out
