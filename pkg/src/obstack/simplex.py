"""Simplex-constrained vectors, projections onto the simplex, density floors.

Weight vectors and density vectors are plain float64 numpy arrays; the
helpers here validate and repair them.
"""

from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, InvalidMetricError, NumericError

DEFAULT_DENSITY_FLOOR = 1e-300
SIMPLEX_ATOL = 1e-9
KKT_TOL = 1e-8


class FlooredDensities(NamedTuple):
    values: np.ndarray
    floored: np.ndarray  # boolean mask of entries raised to the floor

    @property
    def any_floored(self):
        return bool(self.floored.any())


def _as_finite_vector(v, name="v"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries: {v}")
    return v


def renormalize(w):
    """Clip tiny negative rounding noise and rescale to unit sum."""
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    s = w.sum()
    if not np.isfinite(s) or s <= 0.0:
        raise NumericError(f"cannot renormalize weights with sum {s}")
    return w / s


def uniform(k):
    return np.full(k, 1.0 / k)


def is_simplex(w, atol=SIMPLEX_ATOL):
    w = np.asarray(w, dtype=float)
    return bool(w.ndim == 1 and w.size >= 1 and np.all(np.isfinite(w))
                and np.all(w >= 0.0) and abs(w.sum() - 1.0) <= atol)


def as_simplex(w, atol=1e-6):
    """Validate a user-supplied weight vector and renormalize it exactly."""
    w = _as_finite_vector(w, "weights")
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > atol:
        raise InvalidInputError(f"weights are not on the simplex: {w}")
    return renormalize(w)


def project_simplex_euclidean(v):
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = _as_finite_vector(v)
    if v.size == 1:
        return np.ones(1)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return renormalize(v - theta)


def check_metric(A, k=None):
    """Return ``A`` as a float array after checking it is symmetric positive definite."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or (k is not None and A.shape[0] != k):
        raise InvalidMetricError(f"metric must be a square {k}x{k} matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMetricError("metric contains non-finite entries")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-9 * scale:
        raise InvalidMetricError("metric is not symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise InvalidMetricError("metric is not positive definite") from exc
    return A


def _lambda_max(A):
    return float(np.linalg.eigvalsh(A)[-1])


def kkt_residual(w, v, A, lipschitz=None):
    """Fixed-point residual of the projected-gradient map at ``w``.

    Zero exactly at the minimiser of ``(w - v)^T A (w - v)`` over the simplex.
    """
    L = _lambda_max(A) if lipschitz is None else lipschitz
    g = A @ (w - v)
    return float(np.abs(w - project_simplex_euclidean(w - g / L)).max())


def _metric_projection_active_set(v, A, max_iter, x0=None):
    # Primal active-set method on 1/2 w'Aw - (Av)'w subject to sum(w) = 1, w >= 0.
    c = A @ v
    w = project_simplex_euclidean(v) if x0 is None else renormalize(x0)
    free = w > 0.0
    scale = max(1.0, float(np.abs(A).max()))
    at_min = False  # True right after a full step: w minimises over the free face
    for _ in range(max_iter):
        F = np.flatnonzero(free)
        g = A @ w - c
        n = F.size
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = A[np.ix_(F, F)]
        kkt[:n, n] = 1.0
        kkt[n, :n] = 1.0
        rhs = np.concatenate([-g[F], [0.0]])
        sol = np.linalg.solve(kkt, rhs)
        p = sol[:n]
        if at_min or np.abs(p).max() <= 1e-13 * (1.0 + np.abs(w).max()):
            at_min = False
            mu = g + sol[n]
            mu[F] = 0.0
            j = int(np.argmin(mu))
            if mu[j] >= -1e-12 * scale:
                return w
            free[j] = True
            continue
        alpha, block = 1.0, -1
        for i, pi in zip(F, p):
            if pi < 0.0:
                step = -w[i] / pi
                if step < alpha:
                    alpha, block = step, i
        w = w.copy()
        w[F] += alpha * p
        if block >= 0:
            w[block] = 0.0
            free[block] = False
        else:
            at_min = True
        w = np.maximum(w, 0.0)
    raise NumericError(f"active-set projection did not terminate in {max_iter} iterations",
                       residual=kkt_residual(renormalize(w), v, A))


def _metric_projection_pgd(v, A, max_iter, tol):
    L = _lambda_max(A)
    w = project_simplex_euclidean(v)
    res = np.inf
    for _ in range(max_iter):
        w_new = project_simplex_euclidean(w - (A @ (w - v)) / L)
        res = float(np.abs(w_new - w).max())
        w = w_new
        if res <= tol:
            return w
    raise NumericError(f"projected gradient did not reach KKT residual {tol} "
                       f"in {max_iter} iterations", residual=res)


def project_simplex_metric(v, A, method="active-set", tol=KKT_TOL, max_iter=None, x0=None):
    """Minimise ``(w - v)^T A (w - v)`` over the probability simplex.

    ``method="active-set"`` solves the small QP exactly by a primal active-set
    iteration, optionally warm-started at the feasible point ``x0`` (its
    support is the initial guess of the active set); ``method="pgd"`` runs
    projected gradient descent with step ``1/lambda_max(A)`` and at most
    ``max_iter`` (default 10,000) iterations. Either way the result is
    certified by :func:`kkt_residual` <= ``tol``.
    """
    v = _as_finite_vector(v)
    A = check_metric(A, v.size)
    if v.size == 1:
        return np.ones(1)
    if method == "active-set":
        if x0 is not None and not is_simplex(x0):
            raise InvalidInputError("warm start must lie on the simplex")
        w = _metric_projection_active_set(v, A, max_iter or 50 * v.size + 50, x0)
    elif method == "pgd":
        w = _metric_projection_pgd(v, A, max_iter or 10_000, tol)
    else:
        raise ValueError(f"unknown projection method {method!r}")
    w = renormalize(w)
    res = kkt_residual(w, v, A)
    if res > tol:
        raise NumericError(f"metric projection KKT residual {res:.3e} exceeds {tol:.1e}",
                           residual=res)
    return w


def floor_densities(p, floor=DEFAULT_DENSITY_FLOOR):
    """Raise every density below ``floor`` up to it; NaN is rejected."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError(f"densities must be a non-empty 1-D vector, got shape {p.shape}")
    if np.any(np.isnan(p)) or np.any(np.isinf(p)):
        raise InvalidInputError(f"densities must be finite: {p}")
    if np.any(p < 0.0):
        raise InvalidInputError(f"densities must be non-negative: {p}")
    if not floor > 0.0:
        raise InvalidInputError(f"density floor must be positive, got {floor}")
    mask = p < floor
    return FlooredDensities(np.where(mask, floor, p), mask)


def market_variability(r):
    """Ratio min(r) / max(r) of one density vector."""
    r = np.asarray(r, dtype=float)
    return float(r.min() / r.max())
