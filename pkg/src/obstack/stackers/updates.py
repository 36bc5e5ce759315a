"""Sequential ensemble-weight updates.

Every update takes the current :class:`StackerState` and a positive density
vector ``r`` (one predictive density per model at the realised observation)
and returns a new state. Updates only depend on ratios ``r_k / (w . r)``, so
callers may pass densities divided by a common factor ``exp(log_scale)``;
the log-wealth bookkeeping adds ``log_scale`` back.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import InvalidInputError, NumericCollapseError, NumericError
from ..simplex import (DEFAULT_DENSITY_FLOOR, as_simplex, project_simplex_metric,
                       renormalize, uniform)

ALGORITHMS = ("OBMA", "DMA", "EG", "SmoothedEG", "SoftBayes", "ONS", "DONS", "Hedge")

DEFAULT_LEARNING_RATES = {
    "EG": 1e-2,
    "SmoothedEG": 1e-3,
    "ONS": 1e-2,  # smoothing weight towards uniform
    "DONS": 1.0,
    "Hedge": 1.0,
}

COLLAPSE_THRESHOLD = 1e-280


@dataclass(frozen=True)
class StackerConfig:
    """Algorithm choice plus hyperparameters.

    ``learning_rate=None`` selects the per-algorithm default. For SoftBayes it
    selects the time-varying schedule ``log K / (2 K t)``; a number selects the
    fixed-rate update instead.
    """

    algorithm: str
    learning_rate: Optional[float] = None
    dma_forget: float = 0.99
    ons_delta: float = 0.8
    ons_beta: float = 1e-2
    dons_forget: float = 0.99
    eg_smooth: float = 1e-2
    initial_weights: Optional[tuple] = None
    density_floor: float = DEFAULT_DENSITY_FLOOR
    name: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        eta = self.eta
        a = self.algorithm
        if a in ("EG", "SmoothedEG", "DONS", "Hedge") and not eta > 0:
            raise InvalidInputError(f"{a} learning rate must be positive, got {eta}")
        if a == "SoftBayes" and eta is not None and not 0.0 <= eta < 1.0:
            raise InvalidInputError(f"SoftBayes learning rate must lie in [0, 1), got {eta}")
        if a == "ONS":
            if not 0.0 <= eta < 1.0:
                raise InvalidInputError(f"ONS smoothing rate must lie in [0, 1), got {eta}")
            if not 0.0 < self.ons_delta <= 1.0:
                raise InvalidInputError(f"ons_delta must lie in (0, 1], got {self.ons_delta}")
            if not self.ons_beta > 0.0:
                raise InvalidInputError(f"ons_beta must be positive, got {self.ons_beta}")
        if a == "DMA" and not 0.0 < self.dma_forget <= 1.0:
            raise InvalidInputError(f"dma_forget must lie in (0, 1], got {self.dma_forget}")
        if a == "DONS" and not 0.0 < self.dons_forget <= 1.0:
            raise InvalidInputError(f"dons_forget must lie in (0, 1], got {self.dons_forget}")
        if a == "SmoothedEG" and not 0.0 <= self.eg_smooth < 1.0:
            raise InvalidInputError(f"eg_smooth must lie in [0, 1), got {self.eg_smooth}")
        if not self.density_floor > 0.0:
            raise InvalidInputError(f"density_floor must be positive, got {self.density_floor}")

    @property
    def eta(self):
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return DEFAULT_LEARNING_RATES.get(self.algorithm)

    @property
    def label(self):
        return self.name or self.algorithm.lower()

    def params(self):
        """Hyperparameters that the chosen algorithm actually reads."""
        a = self.algorithm
        out = {}
        if a in ("EG", "SmoothedEG", "ONS", "DONS", "Hedge") or (a == "SoftBayes" and self.eta is not None):
            out["learning_rate"] = self.eta
        if a == "SoftBayes" and self.eta is None:
            out["schedule"] = "log(K)/(2Kt)"
        if a == "DMA":
            out["dma_forget"] = self.dma_forget
        if a == "SmoothedEG":
            out["eg_smooth"] = self.eg_smooth
        if a == "ONS":
            out["ons_delta"] = self.ons_delta
            out["ons_beta"] = self.ons_beta
        if a == "DONS":
            out["dons_forget"] = self.dons_forget
        out["density_floor"] = self.density_floor
        return out


@dataclass(frozen=True)
class StackerState:
    weights: np.ndarray  # weights played at the next step
    raw_weights: np.ndarray  # ONS projection output before smoothing; equals weights otherwise
    w0: np.ndarray
    t: int = 0
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    P: Optional[np.ndarray] = None
    cum_log_wealth: float = 0.0
    cum_log_density: Optional[np.ndarray] = None
    collapse_events: tuple = field(default=())

    @property
    def k(self):
        return self.weights.size


def init_state(initial):
    """Fresh state from a number of models or an explicit initial weight vector."""
    w0 = uniform(int(initial)) if np.isscalar(initial) else as_simplex(initial)
    k = w0.size
    return StackerState(weights=w0.copy(), raw_weights=w0.copy(), w0=w0, t=0,
                        A=np.eye(k), b=np.zeros(k), P=np.eye(k),
                        cum_log_wealth=0.0, cum_log_density=np.zeros(k))


def _check_r(state, r):
    r = np.asarray(r, dtype=float)
    if r.shape != state.weights.shape:
        raise InvalidInputError(f"density vector has shape {r.shape}, expected {state.weights.shape}")
    if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
        raise InvalidInputError(f"densities must be finite and strictly positive: {r}")
    return r


def _advance(state, r, log_scale, weights, raw_weights=None, **changes):
    wr = float(state.weights @ r)
    return dataclasses.replace(
        state,
        weights=weights,
        raw_weights=weights if raw_weights is None else raw_weights,
        t=state.t + 1,
        cum_log_wealth=state.cum_log_wealth + np.log(wr) + log_scale,
        cum_log_density=state.cum_log_density + np.log(r) + log_scale,
        **changes,
    )


def _collapse_events(state, new_w):
    seen = {k for _, k in state.collapse_events}
    fresh = tuple((state.t + 1, int(k)) for k in np.flatnonzero(new_w < COLLAPSE_THRESHOLD)
                  if int(k) not in seen and state.weights[k] >= COLLAPSE_THRESHOLD)
    return state.collapse_events + fresh


def _normalize_products(state, num):
    s = num.sum()
    if not s > 0.0 or not np.isfinite(s):
        raise NumericCollapseError(f"mixture weights underflowed to zero at step {state.t + 1}",
                                   step=state.t + 1)
    return renormalize(num / s)


def obma_update(state, r, log_scale=0.0):
    """Online Bayesian model averaging: ``w_k <- w_k r_k / sum_j w_j r_j``."""
    r = _check_r(state, r)
    new_w = _normalize_products(state, state.weights * r)
    return _advance(state, r, log_scale, new_w, collapse_events=_collapse_events(state, new_w))


def dma_update(state, r, gamma, log_scale=0.0):
    """Dynamic model averaging: prior weights are flattened by ``w ** gamma`` first."""
    r = _check_r(state, r)
    new_w = _normalize_products(state, state.weights ** gamma * r)
    return _advance(state, r, log_scale, new_w, collapse_events=_collapse_events(state, new_w))


def _eg_weights(w, r, eta):
    x = eta * r / (w @ r)
    new_w = w * np.exp(x - x.max())
    if not np.all(np.isfinite(new_w)):
        raise NumericError(f"exponentiated-gradient update produced non-finite weights (eta={eta})")
    return renormalize(new_w)


def eg_update(state, r, eta, log_scale=0.0):
    """Exponentiated gradient on the loss ``-log(w . r)``."""
    r = _check_r(state, r)
    return _advance(state, r, log_scale, _eg_weights(state.weights, r, eta))


def smoothed_eg_update(state, r, eta, smooth, log_scale=0.0):
    """EG followed by mixing ``smooth`` of the mass back to uniform."""
    r = _check_r(state, r)
    w = _eg_weights(state.weights, r, eta)
    w = renormalize((1.0 - smooth) * w + smooth / w.size)
    return _advance(state, r, log_scale, w)


def softbayes_factors(w, r, eta):
    """Unnormalised Soft-Bayes product ``w * (1 - eta + eta r / (w . r))``."""
    return w * (1.0 - eta + eta * r / (w @ r))


def softbayes_update(state, r, eta, log_scale=0.0):
    """Soft-Bayes with a fixed learning rate; the product already sums to one."""
    r = _check_r(state, r)
    new_w = softbayes_factors(state.weights, r, eta)
    drift = abs(new_w.sum() - 1.0)
    if drift > 1e-9:
        raise NumericError(f"Soft-Bayes weights sum to {new_w.sum()!r} before renormalisation",
                           residual=drift, step=state.t + 1)
    return _advance(state, r, log_scale, renormalize(new_w))


def softbayes_rate(k, t):
    """Time-varying rate ``log K / (2 K t)`` for step ``t >= 1``."""
    return np.log(k) / (2.0 * k * t)


def softbayes_online_update(state, r, w0=None, log_scale=0.0):
    """Soft-Bayes with the anytime schedule, shrinking towards ``w0`` by ``1 - t/(t+1)``."""
    r = _check_r(state, r)
    w0 = state.w0 if w0 is None else np.asarray(w0, dtype=float)
    k = r.size
    if k == 1:
        return _advance(state, r, log_scale, state.weights.copy())
    t = state.t + 1
    eta_t = softbayes_rate(k, t)
    ratio = t / (t + 1.0)  # eta_{t+1} / eta_t
    new_w = softbayes_factors(state.weights, r, eta_t) * ratio + (1.0 - ratio) * w0
    return _advance(state, r, log_scale, renormalize(new_w))


def ons_update(state, r, delta, beta, eta, log_scale=0.0):
    """Online Newton step for portfolios with A-norm projection.

    Gradients are taken at the played (smoothed) weights. The projection
    output is kept in ``raw_weights``; the played weights mix ``eta`` of
    uniform into it.
    """
    r = _check_r(state, r)
    k = r.size
    if k == 1:
        return _advance(state, r, log_scale, np.ones(1))
    grad = r / (state.weights @ r)  # gradient of log(w . r)
    A = state.A + np.outer(grad, grad)
    A = 0.5 * (A + A.T)
    b = state.b + (1.0 + 1.0 / beta) * grad
    raw = project_simplex_metric(delta * np.linalg.solve(A, b), A, x0=state.raw_weights)
    played = renormalize((1.0 - eta) * raw + eta / k) if eta > 0.0 else raw
    return _advance(state, r, log_scale, played, raw_weights=raw, A=A, b=b)


def dons_update(state, r, eta, gamma, log_scale=0.0):
    """Discounted online Newton step on the loss ``-log(w . r)`` with ``P_0 = I``."""
    r = _check_r(state, r)
    k = r.size
    if k == 1:
        return _advance(state, r, log_scale, np.ones(1))
    w = state.weights
    wr = w @ r
    grad_loss = -r / wr
    P = (1.0 - gamma) * np.eye(k) + gamma * state.P + np.outer(r, r) / wr ** 2
    P = 0.5 * (P + P.T)
    try:
        step = np.linalg.solve(P, grad_loss)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"D-ONS matrix became singular at step {state.t + 1}",
                           step=state.t + 1) from exc
    new_w = project_simplex_metric(w - step / eta, P, x0=w)
    return _advance(state, r, log_scale, new_w, P=P)


def hedge_update(state, r, eta, log_scale=0.0):
    """Hedge: EG on the linearised loss whose gradient is ``-log r_k``."""
    r = _check_r(state, r)
    grad = -np.log(r)
    x = -eta * grad
    new_w = _normalize_products(state, state.weights * np.exp(x - x.max()))
    return _advance(state, r, log_scale, new_w, collapse_events=_collapse_events(state, new_w))


def bma_hedge_equivalence_step(w, r):
    """One Hedge step with learning rate one; reproduces the O-BMA update."""
    state = init_state(w)
    return hedge_update(state, r, 1.0).weights


def apply_update(state, config, r, log_scale=0.0):
    """Dispatch one update according to ``config.algorithm``."""
    a = config.algorithm
    if a == "OBMA":
        return obma_update(state, r, log_scale)
    if a == "DMA":
        return dma_update(state, r, config.dma_forget, log_scale)
    if a == "EG":
        return eg_update(state, r, config.eta, log_scale)
    if a == "SmoothedEG":
        return smoothed_eg_update(state, r, config.eta, config.eg_smooth, log_scale)
    if a == "SoftBayes":
        if config.eta is None:
            return softbayes_online_update(state, r, log_scale=log_scale)
        return softbayes_update(state, r, config.eta, log_scale)
    if a == "ONS":
        return ons_update(state, r, config.ons_delta, config.ons_beta, config.eta, log_scale)
    if a == "DONS":
        return dons_update(state, r, config.eta, config.dons_forget, log_scale)
    if a == "Hedge":
        return hedge_update(state, r, config.eta, log_scale)
    raise InvalidInputError(f"unknown algorithm {a!r}")
