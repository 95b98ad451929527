"""Brute-force reference computations used to check the sampler and geometry.

Nothing in here shares code paths with the Gibbs sampler: the check-loss fit
is a derivative-free search, coverage is plain counting, and the depth region
enumerates every data-defined direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .geometry import Halfplane, Polygon, box, clip, intersect_halfplanes


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class CheckLossProblem:
    y: np.ndarray
    W: np.ndarray
    tau: float

    def __post_init__(self):
        n, q = np.shape(self.W)
        if len(self.y) != n:
            raise ValueError("y and W disagree on n")
        if n <= q:
            raise ValueError("need more observations than coefficients")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")


def pinball(r, tau: float):
    r = np.asarray(r, dtype=float)
    return r * (tau - (r < 0))


def check_loss(coeffs, prob: CheckLossProblem) -> float:
    return float(pinball(prob.y - prob.W @ np.asarray(coeffs, dtype=float), prob.tau).sum())


def subgradient_ok(coeffs, prob: CheckLossProblem, zero_tol: float = 1e-7, tol: float = 1e-6) -> bool:
    """Coordinatewise optimality check for the piecewise-linear loss.

    The nonzero residuals contribute a fixed gradient; the zero residuals must
    be able to absorb it, which needs |g_j| <= max(tau, 1-tau) * sum |w_ij|
    over the zero set.
    """
    r = prob.y - prob.W @ coeffs
    scale = max(1.0, float(np.abs(prob.y).max()))
    zero = np.abs(r) <= zero_tol * scale
    weights = np.where(r > 0, prob.tau, prob.tau - 1.0)
    g = (weights[~zero, None] * prob.W[~zero]).sum(axis=0)
    room = max(prob.tau, 1 - prob.tau) * np.abs(prob.W[zero]).sum(axis=0)
    return bool(np.all(np.abs(g) <= room + tol * len(prob.y)))


def _vertex_polish(coeffs, prob: CheckLossProblem):
    """Snap to the basic solution through the q best-fitting points."""
    q = prob.W.shape[1]
    order = np.argsort(np.abs(prob.y - prob.W @ coeffs))
    idx = order[:q]
    try:
        cand = np.linalg.solve(prob.W[idx], prob.y[idx])
    except np.linalg.LinAlgError:
        return coeffs
    return cand if check_loss(cand, prob) <= check_loss(coeffs, prob) else coeffs


def brute_force_fit(prob: CheckLossProblem, restarts: int = 20, seed: int = 0) -> np.ndarray:
    """Minimize the check loss by Nelder-Mead from several random starts."""
    rng = np.random.default_rng(seed)
    q = prob.W.shape[1]
    center = np.linalg.lstsq(prob.W, prob.y, rcond=None)[0]
    spread = max(1.0, float(np.std(prob.y)))
    best, best_loss = None, np.inf
    for k in range(restarts):
        x0 = center if k == 0 else center + spread * rng.standard_normal(q)
        res = optimize.minimize(check_loss, x0, args=(prob,), method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12,
                                         "maxiter": 4000 * q, "maxfev": 8000 * q,
                                         "adaptive": q > 2})
        x = res.x
        for _ in range(3):
            x = _vertex_polish(x, prob)
            res = optimize.minimize(check_loss, x, args=(prob,), method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-13,
                                             "maxiter": 2000 * q, "adaptive": q > 2})
            x = _vertex_polish(res.x, prob)
        loss = check_loss(x, prob)
        if loss < best_loss:
            best, best_loss = x, loss
    if best is None or not subgradient_ok(best, prob):
        raise OracleError("simplex search did not reach a check-loss minimizer")
    return best


def empirical_direction_coverage(hp: Halfplane, Z: np.ndarray) -> float:
    """Fraction of rows strictly below the bounding line of ``hp``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return float(np.mean(Z @ hp.normal < hp.offset))


def critical_angles(Z: np.ndarray) -> np.ndarray:
    """Angles of all normals to lines through pairs of data points."""
    i, j = np.triu_indices(len(Z), k=1)
    diff = Z[j] - Z[i]
    a = np.arctan2(diff[:, 0], -diff[:, 1])
    a = np.concatenate([a, a + np.pi])
    a = np.mod(a, 2 * np.pi)
    return np.unique(np.round(a, 14))


def tukey_region_bruteforce(Z: np.ndarray, tau: float, grid: int = 360, chunk: int = 4096) -> Polygon:
    """Sample depth region: intersect, over every data-defined direction,
    the halfplanes that leave floor(tau * n) points strictly outside."""
    Z = np.asarray(Z, dtype=float)
    n = len(Z)
    if n > 500:
        raise ValueError("brute-force depth region is limited to n <= 500")
    k = int(np.floor(tau * n))
    if k >= n:
        return Polygon()
    angles = np.concatenate([2 * np.pi * np.arange(grid) / grid, critical_angles(Z)])
    C = np.column_stack([np.cos(angles), np.sin(angles)])
    offsets = np.empty(len(C))
    for s in range(0, len(C), chunk):
        P = Z @ C[s:s + chunk].T
        offsets[s:s + chunk] = np.partition(P, k, axis=0)[k]
    lo, hi = Z.min(axis=0), Z.max(axis=0)
    half = float(np.max(np.abs(np.concatenate([lo, hi])))) + 1.0
    # coarse pass over the uniform grid, then only the constraints that still bind
    poly = intersect_halfplanes((Halfplane(c, d) for c, d in zip(C[:grid], offsets[:grid])), box(half))
    if poly.is_empty:
        return poly
    rest_c, rest_d = C[grid:], offsets[grid:]
    cuts = np.flatnonzero((poly.vertices @ rest_c.T).min(axis=0) < rest_d)
    for idx in cuts:
        poly = clip(poly, Halfplane(rest_c[idx], float(rest_d[idx])))
        if poly.is_empty:
            break
    return poly


def halfspace_depth(y, Z: np.ndarray) -> int:
    """Tukey depth of a point as a count: the fewest data points in a closed
    halfplane whose boundary passes through y."""
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    d = Z - y
    ang = np.arctan2(d[:, 1], d[:, 0])
    cand = np.concatenate([ang + np.pi / 2, ang - np.pi / 2])
    eps = 1e-9
    cand = np.concatenate([cand, cand + eps, cand - eps])
    C = np.column_stack([np.cos(cand), np.sin(cand)])
    counts = ((d @ C.T) >= -1e-12).sum(axis=0)
    return int(counts.min())
