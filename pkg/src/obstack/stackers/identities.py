"""Runtime identity checks and diagnostics on stacker traces."""

import numpy as np

from ..errors import ContractViolationError
from .runner import scaled_densities


def _used_log_densities(log_densities, floor):
    # Recreate exactly the floored densities the stacker saw, in log space.
    rows = []
    for row in np.asarray(log_densities, dtype=float):
        r, shift, _ = scaled_densities(row, floor)
        rows.append(np.log(r) + shift)
    return np.array(rows).reshape(np.shape(log_densities))


def telescoping_regret_check(log_densities, trace, prior=None):
    """Per-model residual of the O-BMA telescoping identity.

    For each model k, ``sum_t log r_tk - sum_t log(w_t . r_t)`` must equal
    ``log(w_Tk / w_0k)``; the returned vector is left side minus right side.
    """
    if trace.algorithm != "OBMA":
        raise ContractViolationError(f"telescoping identity is defined for O-BMA traces, got {trace.algorithm}")
    if not trace.ok:
        raise ContractViolationError(f"trace {trace.name!r} aborted: {trace.error}")
    L = np.asarray(log_densities, dtype=float)
    T = L.shape[0]
    w0 = np.asarray(trace.weights[0] if prior is None and T > 0 else prior, dtype=float)
    if T == 0:
        return np.zeros(w0.size if w0.ndim else trace.final_weights.size)
    used = _used_log_densities(L, trace.config.density_floor)
    lhs = used.sum(axis=0) - np.sum(trace.log_ens)
    with np.errstate(divide="ignore"):
        rhs = np.log(trace.final_weights) - np.log(w0)
    return lhs - rhs


def best_model(log_densities):
    """Index of the model with the largest cumulative log-density (lowest index on ties)."""
    return int(np.argmax(np.sum(log_densities, axis=0)))


def regret_vs_best_model(log_densities, log_ens):
    """``max_k sum_t log r_tk - sum_t log(w_t . r_t)``."""
    L = np.asarray(log_densities, dtype=float)
    if L.shape[0] == 0:
        return 0.0
    return float(L.sum(axis=0).max() - np.sum(log_ens))


def trace_statistics(log_densities, traces):
    """Diagnostics that never enter any update.

    ``alpha_min`` is the smallest per-step ratio min(r)/max(r); ``grad_inf_max``
    is, per stacker, the largest sup-norm of the gradient ``r / (w . r)``.
    """
    L = np.asarray(log_densities, dtype=float)
    out = {"alpha_min": None, "grad_inf_max": {}}
    if L.shape[0] == 0:
        return out
    with np.errstate(invalid="ignore"):
        alpha = np.exp(L.min(axis=1) - L.max(axis=1))
    out["alpha_min"] = float(np.nanmin(alpha))
    shift = L.max(axis=1, keepdims=True)
    R = np.exp(L - shift)
    for tr in traces:
        ok = np.all(np.isfinite(tr.weights), axis=1)
        if not ok.any():
            out["grad_inf_max"][tr.name] = None
            continue
        wr = np.sum(tr.weights[ok] * R[ok], axis=1)
        out["grad_inf_max"][tr.name] = float(np.max(R[ok].max(axis=1) / wr))
    return out
