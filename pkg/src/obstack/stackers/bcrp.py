"""Best constantly rebalanced portfolio: the optimal fixed mixture in hindsight."""

from typing import NamedTuple

import numpy as np

from ..errors import InvalidInputError, NumericError
from ..simplex import renormalize

BCRP_GAP_TOL = 1e-6


class BCRPResult(NamedTuple):
    weights: np.ndarray
    log_wealth: float
    gap: float  # Frank-Wolfe duality gap, an upper bound on the log-wealth shortfall
    iterations: int


def _line_search(u, d, gmax):
    # Maximise sum(log(u + g d)) over g in [0, gmax]; the derivative is decreasing.
    def deriv(g):
        # At gmax a coordinate can reach zero; the derivative is then -inf.
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(d / (u + g * d)))

    if deriv(gmax) >= 0.0:
        return gmax
    lo, hi = 0.0, gmax
    g = 0.5 * gmax
    for _ in range(100):
        den = u + g * d
        f1 = float(np.sum(d / den))
        if f1 > 0.0:
            lo = g
        else:
            hi = g
        f2 = -float(np.sum((d / den) ** 2))
        g_new = g - f1 / f2 if f2 < 0.0 else 0.5 * (lo + hi)
        if not lo < g_new < hi:
            g_new = 0.5 * (lo + hi)
        if abs(g_new - g) <= 1e-15 * max(1.0, gmax) or hi - lo <= 1e-16:
            return g_new
        g = g_new
    return g


def _solve_scaled(R, max_iter, tol):
    T, K = R.shape
    w = np.full(K, 1.0 / K)
    u = R @ w
    gap = np.inf
    for it in range(1, max_iter + 1):
        g = R.T @ (1.0 / u)
        gap = float(g.max() - g @ w)
        if gap <= tol:
            return w, gap, it
        s = int(np.argmax(g))
        support = np.flatnonzero(w > 0.0)
        a = int(support[np.argmin(g[support])])
        if a == s:
            # pairwise direction vanishes; fall back to a plain Frank-Wolfe step
            d_vec = R[:, s] - u
            gamma = _line_search(u, d_vec, 1.0)
            w = (1.0 - gamma) * w
            w[s] += gamma
            u = u + gamma * d_vec
            continue
        d_vec = R[:, s] - R[:, a]
        gmax = w[a]
        gamma = _line_search(u, d_vec, gmax)
        w = w.copy()
        if gamma >= gmax:
            w[s] += w[a]
            w[a] = 0.0
        else:
            w[s] += gamma
            w[a] -= gamma
        u = R @ w
    raise NumericError(f"BCRP solver did not reach duality gap {tol} in {max_iter} iterations",
                       residual=gap)


def solve_bcrp_log(log_densities, tol=BCRP_GAP_TOL, max_iter=200_000):
    """BCRP from a (T, K) array of log-densities.

    Each row is rescaled by its maximum, which leaves the maximiser unchanged
    and keeps every density in (0, 1].
    """
    L = np.asarray(log_densities, dtype=float)
    if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
        raise InvalidInputError(f"need a (T>=1, K>=1) history, got shape {L.shape}")
    if np.any(np.isnan(L)) or np.any(L == np.inf):
        raise InvalidInputError("log-density history contains NaN or +inf")
    shift = L.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(shift)):
        raise InvalidInputError("some step assigns zero density to every model")
    R = np.exp(L - shift)
    if L.shape[1] == 1:
        w, gap, it = np.ones(1), 0.0, 0
    else:
        w, gap, it = _solve_scaled(R, max_iter, tol)
    w = renormalize(w)
    log_wealth = float(np.sum(np.log(R @ w)) + shift.sum())
    return BCRPResult(w, log_wealth, gap, it)


def solve_bcrp(density_history, tol=BCRP_GAP_TOL, max_iter=200_000):
    """BCRP weights maximising ``sum_t log(w . r_t)`` over the simplex.

    Solved by pairwise Frank-Wolfe with exact line search; the returned
    duality gap certifies optimality of the log-wealth to within ``tol``.
    """
    R = np.asarray(density_history, dtype=float)
    if R.ndim != 2:
        raise InvalidInputError(f"density history must be (T, K), got shape {R.shape}")
    if not np.all(np.isfinite(R)) or np.any(R <= 0.0):
        raise InvalidInputError("densities must be finite and strictly positive")
    return solve_bcrp_log(np.log(R), tol=tol, max_iter=max_iter)


def log_wealth(log_densities, w):
    """``sum_t log(w . r_t)`` for a fixed weight vector, computed stably in log space."""
    L = np.asarray(log_densities, dtype=float)
    w = np.asarray(w, dtype=float)
    if L.shape[0] == 0:
        return 0.0
    shift = L.max(axis=1)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(np.exp(L - shift[:, None]) @ w) + shift))
