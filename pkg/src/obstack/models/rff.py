"""Random Fourier feature GP regression with a random-walk drift on the weights.

The weights follow ``theta_t = theta_{t-1} + N(0, rw_var I)``, so each step is
a Kalman filter predict (covariance inflation) followed by the conjugate
update of :mod:`obstack.models.linear`.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .linear import (GaussianLinearPosterior, linreg_observe, linreg_predict_log_density,
                     predictive_moments, prior_posterior)


@dataclass(frozen=True)
class RFFBasis:
    """Squared-exponential RFF basis ``amplitude sqrt(2/F) cos(omega x / lengthscale + phase)``.

    ``omega`` holds unit-lengthscale spectral draws so that the lengthscale
    can be changed without redrawing. Feature norms never exceed
    ``amplitude * sqrt(2)``; with ``bounded=True`` the map is divided by
    ``sqrt(2)`` so that norms never exceed ``amplitude``.
    """

    omega: np.ndarray  # (F, d)
    phases: np.ndarray  # (F,)
    lengthscale: float = 1.0
    amplitude: float = 1.0
    random_walk_var: float = 0.0
    bounded: bool = False

    @property
    def dim(self):
        return self.phases.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        proj = x @ self.omega.T / self.lengthscale + self.phases
        scale = self.amplitude * np.sqrt(2.0 / self.dim)
        if self.bounded:
            scale /= np.sqrt(2.0)
        return scale * np.cos(proj)

    def describe(self):
        return {"type": "rff", "n_features": self.dim, "lengthscale": self.lengthscale,
                "amplitude": self.amplitude, "random_walk_var": self.random_walk_var}


def make_rff_basis(input_dim, n_features, seed, lengthscale=1.0, amplitude=1.0,
                   random_walk_var=0.0, bounded=False):
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n_features, input_dim))
    phases = rng.uniform(0.0, 2.0 * np.pi, n_features)
    return RFFBasis(omega, phases, float(lengthscale), float(amplitude), float(random_walk_var), bounded)


def diffuse(post, rw_var):
    """Kalman predict step: ``cov <- cov + rw_var I``."""
    if rw_var == 0.0:
        return post
    return dataclasses.replace(post, cov=post.cov + rw_var * np.eye(post.dim))


def rffgp_predict_log_density(post, basis, x, y):
    return linreg_predict_log_density(diffuse(post, basis.random_walk_var), basis(x), y)


def rffgp_observe(post, basis, x, y):
    """Diffuse by the random walk, then condition on ``(phi(x), y)``."""
    return linreg_observe(diffuse(post, basis.random_walk_var), basis(x), y)


class RFFGPModel:
    """Online RFF-GP regressor with random-walk weights."""

    def __init__(self, basis, prior_var=1.0, noise_var=1.0, name=None):
        self.basis = basis
        self.posterior: GaussianLinearPosterior = prior_posterior(basis.dim, prior_var, noise_var)
        self.name = name or f"rffgp(rw={basis.random_walk_var:g})"

    @property
    def feature_dim(self):
        return self.basis.dim

    def predict_log_density(self, x, y):
        return float(rffgp_predict_log_density(self.posterior, self.basis, x, y))

    def predictive(self, x):
        return predictive_moments(diffuse(self.posterior, self.basis.random_walk_var), self.basis(x))

    def observe(self, x, y):
        self.posterior = rffgp_observe(self.posterior, self.basis, x, y)

    def describe(self):
        return {"name": self.name, "family": "rffgp", "features": self.basis.describe(),
                "prior_var": self.posterior.prior_var, "noise_var": self.posterior.noise_var}
