"""Run a stacker over a whole stream of per-model log-densities."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import InvalidInputError, NumericError, ObstackError
from ..simplex import floor_densities
from .updates import StackerConfig, apply_update, init_state


def scaled_densities(log_r, floor):
    """Shift one row of log-densities so its maximum is zero, exponentiate, floor.

    Returns ``(r, shift, floored_mask)`` with ``r * exp(shift)`` the floored
    densities. Only ratios of densities enter the updates, so the shift is
    exact bookkeeping rather than an approximation.
    """
    log_r = np.asarray(log_r, dtype=float)
    if np.any(np.isnan(log_r)) or np.any(log_r == np.inf):
        raise InvalidInputError(f"log-densities must not be NaN or +inf: {log_r}")
    shift = float(log_r.max())
    if not np.isfinite(shift):
        raise NumericError("every model assigned zero density to the observation")
    floored = floor_densities(np.exp(log_r - shift), floor)
    return floored.values, shift, floored.floored


@dataclass
class StackerTrace:
    """Per-step record of one stacker on one stream."""

    name: str
    config: StackerConfig
    weights: np.ndarray  # (T, K): weights used to predict step t
    log_ens: np.ndarray  # (T,): log of the ensemble density at the observation
    final_weights: np.ndarray
    collapse_events: list = field(default_factory=list)
    n_floored: int = 0
    error: Optional[str] = None
    error_step: Optional[int] = None
    final_state: object = None

    @property
    def algorithm(self):
        return self.config.algorithm

    @property
    def ok(self):
        return self.error is None

    def avg_pll(self):
        t = np.arange(1, self.log_ens.size + 1)
        return np.cumsum(self.log_ens) / t


def run_stacker(config, log_densities, name=None):
    """Feed every row of ``log_densities`` (T x K) through one stacker.

    A numeric failure stops this stacker only; the remaining rows of its
    trace are NaN and the failure is recorded on the trace.
    """
    log_densities = np.asarray(log_densities, dtype=float)
    if log_densities.ndim != 2:
        raise InvalidInputError(f"log_densities must be a (T, K) array, got {log_densities.shape}")
    T, K = log_densities.shape
    initial = K if config.initial_weights is None else config.initial_weights
    state = init_state(initial)
    if state.k != K:
        raise InvalidInputError(f"initial weights have {state.k} entries but the stream has {K} models")
    weights = np.full((T, K), np.nan)
    log_ens = np.full(T, np.nan)
    n_floored = 0
    error = error_step = None
    for t in range(T):
        try:
            r, shift, mask = scaled_densities(log_densities[t], config.density_floor)
            weights[t] = state.weights
            log_ens[t] = np.log(state.weights @ r) + shift
            n_floored += int(mask.any())
            state = apply_update(state, config, r, log_scale=shift)
        except ObstackError as exc:
            weights[t] = np.nan
            log_ens[t] = np.nan
            error, error_step = f"{type(exc).__name__}: {exc}", t + 1
            break
    return StackerTrace(
        name=name or config.label,
        config=config,
        weights=weights,
        log_ens=log_ens,
        final_weights=state.weights.copy() if error is None else np.full(K, np.nan),
        collapse_events=[list(e) for e in state.collapse_events],
        n_floored=n_floored,
        error=error,
        error_step=error_step,
        final_state=state,
    )
