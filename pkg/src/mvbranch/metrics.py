"""Exact bounded-Lipschitz and extended Wasserstein distances between atomic measures.

``bounded_lipschitz`` solves the function-space LP

    max  sum_i w_i f_i   s.t.  |f_i| <= 1,  f_i - f_j <= |x_i - x_j|

on the union support with signed weights w = mu - nu.  Any feasible vector
extends to a function on R^d with sup-norm and Lipschitz constant at most 1, so
the LP value is the distance itself.  In one dimension only neighbouring
constraints are needed; in general pairs at distance >= 2 are redundant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .measures import PointMeasure, mass

_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class ProblemTooLarge(ValueError):
    """The LP or the brute-force search exceeds the configured size."""


@dataclass(frozen=True)
class BLSolution:
    """Optimal value with its maximizing test function on the union support."""

    value: float
    points: np.ndarray
    f: np.ndarray
    signed_weights: np.ndarray
    error_bound: float = 0.0


def coarsen(mu: PointMeasure, radius: float) -> tuple[PointMeasure, float]:
    """Snap atoms to centres of a cubic grid so that no atom moves more than ``radius``.

    Returns the coarsened measure and the additive bound ``radius * mass(mu)`` on
    the change of any bounded-Lipschitz distance involving ``mu``.
    """
    if radius <= 0 or len(mu) == 0:
        return mu, 0.0
    side = 2.0 * radius / np.sqrt(mu.dim)
    cells = np.floor(mu.locations / side)
    centres = (cells + 0.5) * side
    return PointMeasure(centres, mu.weights, d=mu.dim).aggregated(), radius * mass(mu)


def signed_support(mu: PointMeasure, nu: PointMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Distinct support points of mu + nu with aggregated weights of mu - nu (zeros dropped)."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    x = np.vstack([mu.locations, nu.locations])
    if x.shape[0] == 0:
        return x, np.zeros(0)
    pts, inv = np.unique(x, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    n1 = len(mu)
    # aggregate each side separately so identical inputs cancel exactly
    sw = np.bincount(inv[:n1], weights=mu.weights, minlength=len(pts)) - np.bincount(
        inv[n1:], weights=nu.weights, minlength=len(pts))
    keep = sw != 0.0
    return pts[keep], sw[keep]


def _lipschitz_pairs(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, d = pts.shape
    if n < 2:
        e = np.zeros(0, dtype=np.int64)
        return e, e, np.zeros(0)
    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        i, j = order[:-1], order[1:]
        dist = pts[j, 0] - pts[i, 0]
    else:
        i, j = np.triu_indices(n, k=1)
        dist = np.linalg.norm(pts[i] - pts[j], axis=1)
    keep = dist < 2.0
    return i[keep], j[keep], dist[keep]


def bounded_lipschitz_dual(
    mu: PointMeasure, nu: PointMeasure, radius: float = 0.0, max_rows: int = 500_000
) -> BLSolution:
    """Bounded-Lipschitz distance with its dual witness.

    With ``radius > 0`` both measures are coarsened first and ``error_bound``
    carries the certified additive error ``radius * (mass(mu) + mass(nu))``.
    """
    bound = 0.0
    if radius > 0:
        mu, b1 = coarsen(mu, radius)
        nu, b2 = coarsen(nu, radius)
        bound = b1 + b2
    pts, w = signed_support(mu, nu)
    n = len(w)
    if n == 0:
        return BLSolution(0.0, pts, np.zeros(0), w, bound)
    i, j, dist = _lipschitz_pairs(pts)
    m = len(dist)
    if 2 * m > max_rows:
        raise ProblemTooLarge(f"{2 * m} Lipschitz constraints exceed max_rows={max_rows}; coarsen the supports")
    if m:
        rows = np.concatenate([np.arange(m), np.arange(m), m + np.arange(m), m + np.arange(m)])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([np.ones(m), -np.ones(m), np.ones(m), -np.ones(m)])
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * m, n))
        b = np.concatenate([dist, dist])
    else:
        A, b = None, None
    res = linprog(-w, A_ub=A, b_ub=b, bounds=(-1.0, 1.0), method="highs-ds", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    f = np.clip(res.x, -1.0, 1.0)
    value = max(float(np.dot(w, f)), 0.0)
    return BLSolution(value, pts, f, w, bound)


def bounded_lipschitz(mu: PointMeasure, nu: PointMeasure, radius: float = 0.0) -> float:
    """sup { <f, mu - nu> : ||f||_inf <= 1, Lip(f) <= 1 } for atomic measures."""
    return bounded_lipschitz_dual(mu, nu, radius).value


def _transport(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> float:
    n, k = cost.shape
    if n == 0 or k == 0:
        return 0.0
    # row sums = a, column sums = b
    rows = np.concatenate([np.repeat(np.arange(n), k), n + np.tile(np.arange(k), n)])
    cols = np.concatenate([np.arange(n * k), np.arange(n * k)])
    A = sparse.csr_matrix((np.ones(2 * n * k), (rows, cols)), shape=(n + k, n * k))
    beq = np.concatenate([a, b])
    # drop one redundant balance row; keeps the system full rank
    res = linprog(cost.reshape(-1), A_eq=A[:-1], b_eq=beq[:-1], bounds=(0, None), method="highs-ds", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def extended_w1(mu: PointMeasure, nu: PointMeasure) -> float:
    """Extended Wasserstein-1 distance with a cemetery point.

    The lighter measure is padded with mass at the cemetery so both have mass
    max(mass mu, mass nu); ground cost is min(|x - y|, 1) between real points and
    1 between a real point and the cemetery.
    """
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    mu, nu = mu.aggregated(), nu.aggregated()
    m1, m2 = mass(mu), mass(nu)
    m = max(m1, m2)
    if m == 0:
        return 0.0
    a = np.append(mu.weights, m - m1)
    b = np.append(nu.weights, m - m2)
    diff = mu.locations[:, None, :] - nu.locations[None, :, :]
    c = np.ones((len(a), len(b)))
    c[:-1, :-1] = np.minimum(np.linalg.norm(diff, axis=2), 1.0)
    c[-1, -1] = 0.0
    return _transport(a, b, c)


def truncated_w1(mu: PointMeasure, nu: PointMeasure) -> float:
    """Classical W1 under the ground metric min(|x - y|, 1) for equal-mass measures."""
    m1, m2 = mass(mu), mass(nu)
    if abs(m1 - m2) > 1e-12 * max(1.0, m1):
        raise ValueError(f"masses differ: {m1} vs {m2}")
    mu, nu = mu.aggregated(), nu.aggregated()
    diff = mu.locations[:, None, :] - nu.locations[None, :, :]
    c = np.minimum(np.linalg.norm(diff, axis=2), 1.0)
    b = nu.weights * (m1 / m2) if m2 > 0 else nu.weights
    return _transport(mu.weights, b, c)


def _best_pair(w1, w2, lo1, hi1, lo2, hi2, gap):
    """Vectorized max of w1 f1 + w2 f2 over f1 in [lo1, hi1], f2 in [lo2, hi2], |f1 - f2| <= gap.

    Returns -inf where the polygon is empty.
    """
    if w2 < 0:
        # reflect f -> -f so that the second weight is nonnegative
        return _best_pair(-w1, -w2, -hi1, -lo1, -hi2, -lo2, gap)
    lo = np.maximum(lo1, lo2 - gap)
    hi = np.minimum(hi1, hi2 + gap)
    ok = lo <= hi + 1e-12
    best = np.full(np.broadcast(lo, hi).shape, -np.inf)
    # for fixed f1 the best f2 is min(hi2, f1 + gap); the objective is concave in f1
    for f1 in (lo, hi, np.clip(hi2 - gap, lo, hi)):
        val = w1 * f1 + w2 * np.minimum(hi2, f1 + gap)
        best = np.maximum(best, val)
    return np.where(ok, best, -np.inf)


def brute_force_bl(mu: PointMeasure, nu: PointMeasure, resolution: float = 1e-3, max_evals: int = 50_000_000) -> float:
    """Exhaustive grid search for the bounded-Lipschitz distance (test oracle).

    Every support point but the last two takes all values of the grid
    {-1, -1 + h, ..., 1}; the last two are optimized exactly over the
    polygon left by the constraints.  The result is a lower bound on the
    distance that converges as ``resolution`` -> 0.  At most 5 atoms in total.
    """
    if len(mu) + len(nu) > 5:
        raise ProblemTooLarge(f"brute force handles at most 5 atoms, got {len(mu) + len(nu)}")
    pts, w = signed_support(mu, nu)
    n = len(w)
    if n == 0:
        return 0.0
    if n == 1:
        return abs(float(w[0]))
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    grid = np.linspace(-1.0, 1.0, int(round(2.0 / resolution)) + 1)
    k = n - 2
    if len(grid) ** k > max_evals:
        raise ProblemTooLarge(f"{len(grid)}^{k} grid points exceed max_evals={max_evals}")
    eps = 1e-12
    best = -np.inf
    # the first grid coordinate is looped over only when there are three grid coordinates
    n_loop = max(k - 2, 0)
    n_vec = k - n_loop
    mesh = np.meshgrid(*([grid] * n_vec), indexing="ij", sparse=True) if n_vec else []
    for head in itertools.product(grid, repeat=n_loop):
        cols = [np.float64(v) for v in head] + list(mesh)
        feasible = np.bool_(True)
        base = 0.0
        for a in range(k):
            base = base + w[a] * cols[a]
            for b in range(a):
                feasible = feasible & (np.abs(cols[a] - cols[b]) <= D[a, b] + eps)
        lo1, hi1, lo2, hi2 = -1.0, 1.0, -1.0, 1.0
        for a in range(k):
            lo1 = np.maximum(lo1, cols[a] - D[a, n - 2])
            hi1 = np.minimum(hi1, cols[a] + D[a, n - 2])
            lo2 = np.maximum(lo2, cols[a] - D[a, n - 1])
            hi2 = np.minimum(hi2, cols[a] + D[a, n - 1])
        tail = _best_pair(w[n - 2], w[n - 1], lo1, hi1, lo2, hi2, D[n - 2, n - 1])
        vals = np.where(feasible, base + tail, -np.inf)
        best = max(best, float(np.max(vals)))
    return max(best, 0.0)
