"""GARCH(1,1) with Gaussian innovations, parameters learnt online by SMC.

Each particle carries ``(alpha0, alpha1, beta, sigma2)`` where ``sigma2`` is
the conditional variance for the next observation. A step evaluates the
mixture predictive, reweights, propagates the variance recursion
``sigma2 <- alpha0 + alpha1 y^2 + beta sigma2`` and, when the effective
sample size drops below ``resample_threshold * N``, resamples
systematically and rejuvenates with random-walk Metropolis moves.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import DegenerateFilterError, InvalidInputError

LOG_2PI = np.log(2.0 * np.pi)
PARAMS = ("alpha0", "alpha1", "beta")


@dataclass(frozen=True)
class GarchPrior:
    """Independent truncated Gaussians on the three parameters, restricted to
    ``alpha1 + beta < 1``."""

    center: tuple = (0.05, 0.08, 0.85)
    scale: tuple = (0.05, 0.05, 0.05)
    lower: tuple = (0.0, 0.0, 0.0)
    upper: tuple = (0.5, 0.5, 0.98)

    def in_support(self, theta):
        theta = np.atleast_2d(theta)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        ok = np.all((theta >= lo) & (theta <= hi), axis=1)
        ok &= theta[:, 0] > 0.0
        ok &= theta[:, 1] + theta[:, 2] < 1.0
        return ok

    def log_density(self, theta):
        """Unnormalised log-density; ``-inf`` outside the support."""
        theta = np.atleast_2d(theta)
        z = (theta - np.asarray(self.center)) / np.asarray(self.scale)
        out = -0.5 * np.sum(z * z, axis=1)
        return np.where(self.in_support(theta), out, -np.inf)

    def sample(self, n, rng):
        out = np.empty((0, 3))
        center, scale = np.asarray(self.center), np.asarray(self.scale)
        for _ in range(1000):
            draw = center + scale * rng.standard_normal((max(2 * n, 64), 3))
            out = np.vstack([out, draw[self.in_support(draw)]])
            if out.shape[0] >= n:
                return out[:n]
        raise InvalidInputError("GARCH prior truncation region has negligible mass")


@dataclass(frozen=True)
class GarchParticleSet:
    particles: np.ndarray  # (N, 4): alpha0, alpha1, beta, sigma2
    weights: np.ndarray  # (N,) on the simplex
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))  # recent observations

    @property
    def n(self):
        return self.weights.size

    @property
    def ess(self):
        return float(1.0 / np.sum(self.weights ** 2))


def stationary_variance(theta):
    theta = np.atleast_2d(theta)
    return theta[:, 0] / (1.0 - theta[:, 1] - theta[:, 2])


def init_particles(prior, n, rng):
    theta = prior.sample(n, rng)
    particles = np.column_stack([theta, stationary_variance(theta)])
    return GarchParticleSet(particles, np.full(n, 1.0 / n))


def gaussian_log_density(y, var):
    return -0.5 * (LOG_2PI + np.log(var) + y * y / var)


def mixture_log_predictive(pset, y):
    """``log sum_i rho_i N(y; 0, sigma2_i)``."""
    return float(logsumexp(np.log(pset.weights) + gaussian_log_density(y, pset.particles[:, 3])))


def systematic_resample(weights, rng):
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


def _window_loglik(theta, window):
    # Variance path over the window, started at each parameter's stationary variance.
    sigma2 = stationary_variance(theta)
    ll = np.zeros(theta.shape[0])
    for y in window:
        ll += gaussian_log_density(y, sigma2)
        sigma2 = theta[:, 0] + theta[:, 1] * y * y + theta[:, 2] * sigma2
    return ll, sigma2


def rejuvenate(particles, history, prior, rng, n_steps=5):
    """Random-walk Metropolis on the static parameters.

    The target is the prior times the likelihood of the recent observation
    window, with the variance recursion restarted at the stationary variance.
    Every rejuvenated particle's ``sigma2`` is reset to the end of its window
    path so that it is consistent with its parameters.
    """
    theta = particles[:, :3].copy()
    spread = np.maximum(theta.std(axis=0), 1e-4)
    step = 0.5 * spread
    ll, sigma2 = _window_loglik(theta, history)
    logp = prior.log_density(theta) + ll
    accepted = 0
    for _ in range(n_steps):
        prop = theta + step * rng.standard_normal(theta.shape)
        lp_prior = prior.log_density(prop)
        ok = np.isfinite(lp_prior)
        prop_ll = np.full(theta.shape[0], -np.inf)
        prop_sigma2 = sigma2.copy()
        if ok.any():
            prop_ll[ok], prop_sigma2[ok] = _window_loglik(prop[ok], history)
        prop_logp = lp_prior + prop_ll
        with np.errstate(invalid="ignore"):
            accept = np.log(rng.random(theta.shape[0])) < prop_logp - logp
        accept &= ok
        theta[accept] = prop[accept]
        logp[accept] = prop_logp[accept]
        sigma2[accept] = prop_sigma2[accept]
        accepted += int(accept.sum())
    return np.column_stack([theta, sigma2]), accepted / (n_steps * theta.shape[0])


def garch_smc_step(pset, y_new, rng, prior=None, resample_threshold=0.5,
                   n_rejuvenate=5, window=50):
    """Advance the particle set by one observation.

    Returns ``(log_predictive, new_pset, info)``; ``info`` reports the ESS
    before resampling and whether resampling/rejuvenation happened.
    Rejuvenation runs only when a ``prior`` is given and ``n_rejuvenate > 0``.
    """
    y_new = float(y_new)
    if not np.isfinite(y_new):
        raise InvalidInputError(f"observation must be finite, got {y_new}")
    log_lik = gaussian_log_density(y_new, pset.particles[:, 3])
    with np.errstate(divide="ignore"):
        log_w = np.log(pset.weights) + log_lik
    log_pred = float(logsumexp(log_w))
    if not np.isfinite(log_pred):
        raise DegenerateFilterError("every particle likelihood underflowed")
    weights = np.exp(log_w - log_pred)
    weights /= weights.sum()
    particles = pset.particles.copy()
    particles[:, 3] = particles[:, 0] + particles[:, 1] * y_new ** 2 + particles[:, 2] * particles[:, 3]
    history = np.append(pset.history, y_new)[-window:] if window > 0 else pset.history
    ess = float(1.0 / np.sum(weights ** 2))
    info = {"ess": ess, "resampled": False, "acceptance": None}
    if ess < resample_threshold * weights.size:
        idx = systematic_resample(weights, rng)
        particles = particles[idx]
        weights = np.full(weights.size, 1.0 / weights.size)
        info["resampled"] = True
        if prior is not None and n_rejuvenate > 0 and history.size > 0:
            particles, info["acceptance"] = rejuvenate(particles, history, prior, rng, n_rejuvenate)
    return log_pred, GarchParticleSet(particles, weights, history), info


class GarchSMCModel:
    """GARCH(1,1)-Normal predictive model. Inputs ``x`` are ignored."""

    def __init__(self, prior=None, n_particles=1000, seed=0, resample_threshold=0.5,
                 n_rejuvenate=5, window=50, name=None):
        self.prior = prior or GarchPrior()
        self.n_particles = int(n_particles)
        self.rng = np.random.default_rng(seed)
        self.resample_threshold = resample_threshold
        self.n_rejuvenate = n_rejuvenate
        self.window = window
        self.name = name or "garch11"
        self.pset = init_particles(self.prior, self.n_particles, self.rng)
        self.degenerate_events = []
        self.t = 0

    feature_dim = 0

    def predict_log_density(self, x, y):
        return mixture_log_predictive(self.pset, y)

    def observe(self, x, y):
        self.t += 1
        try:
            _, self.pset, _ = garch_smc_step(self.pset, y, self.rng, self.prior,
                                             self.resample_threshold, self.n_rejuvenate, self.window)
        except DegenerateFilterError:
            self.degenerate_events.append(self.t)
            history = np.append(self.pset.history, y)[-self.window:]
            self.pset = dataclasses.replace(init_particles(self.prior, self.n_particles, self.rng),
                                            history=history)

    def describe(self):
        return {"name": self.name, "family": "garch11-smc", "n_particles": self.n_particles,
                "prior_center": list(self.prior.center), "prior_scale": list(self.prior.scale)}
