"""Conjugate Bayesian linear regression on a fixed feature map."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, NumericError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianLinearPosterior:
    mean: np.ndarray
    cov: np.ndarray
    noise_var: float
    prior_var: float

    @property
    def dim(self):
        return self.mean.size


def prior_posterior(dim, prior_var, noise_var):
    """The prior ``N(0, prior_var I)`` viewed as a posterior with no data."""
    if not prior_var > 0 or not noise_var > 0:
        raise InvalidInputError(f"variances must be positive, got prior_var={prior_var}, noise_var={noise_var}")
    return GaussianLinearPosterior(np.zeros(dim), prior_var * np.eye(dim), float(noise_var), float(prior_var))


def _phi(post, phi):
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size != post.dim:
        raise InvalidInputError(f"feature vector has {phi.size} entries, posterior has {post.dim}")
    return phi


def predictive_moments(post, phi):
    phi = _phi(post, phi)
    mean = float(phi @ post.mean)
    quad = float(phi @ post.cov @ phi)
    if quad < -1e-12 * max(1.0, float(np.abs(post.cov).max())):
        raise NumericError(f"posterior covariance is not positive semi-definite (phi' S phi = {quad})")
    return mean, max(quad, 0.0) + post.noise_var


def linreg_predict_log_density(post, phi, y):
    """``log N(y; phi' mean, phi' cov phi + noise_var)``."""
    mean, var = predictive_moments(post, phi)
    return -0.5 * (LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def linreg_observe(post, phi, y):
    """Rank-one conjugate update of the Gaussian posterior."""
    phi = _phi(post, phi)
    s_phi = post.cov @ phi
    s = float(phi @ s_phi) + post.noise_var
    gain = s_phi / s
    mean = post.mean + gain * (y - float(phi @ post.mean))
    cov = post.cov - np.outer(gain, s_phi)
    cov = 0.5 * (cov + cov.T)
    return GaussianLinearPosterior(mean, cov, post.noise_var, post.prior_var)


def linreg_batch_posterior(Phi, y, prior_var, noise_var):
    """Posterior after all rows of ``Phi`` at once (ridge-regression closed form)."""
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    y = np.asarray(y, dtype=float)
    F = Phi.shape[1]
    precision = np.eye(F) / prior_var + Phi.T @ Phi / noise_var
    cov = np.linalg.inv(precision)
    mean = cov @ (Phi.T @ y) / noise_var
    return GaussianLinearPosterior(mean, 0.5 * (cov + cov.T), float(noise_var), float(prior_var))


class LinearEvidence:
    """Closed-form log marginal likelihood of a conjugate linear model.

    Sufficient statistics are computed once, so scoring many
    ``(prior_var, noise_var)`` pairs costs ``O(F^3)`` each.
    """

    def __init__(self, Phi, y):
        Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
        y = np.asarray(y, dtype=float)
        self.n, self.f = Phi.shape
        self.gram = Phi.T @ Phi
        self.pty = Phi.T @ y
        self.yty = float(y @ y)

    def __call__(self, prior_var, noise_var):
        ratio = prior_var / noise_var
        M = np.eye(self.f) + ratio * self.gram
        chol = np.linalg.cholesky(M)
        logdet = 2.0 * np.log(np.diag(chol)).sum() + self.n * np.log(noise_var)
        z = np.linalg.solve(M, self.pty)
        quad = (self.yty - ratio * float(self.pty @ z)) / noise_var
        return -0.5 * (self.n * LOG_2PI + logdet + quad)


def linreg_log_evidence(Phi, y, prior_var, noise_var):
    return LinearEvidence(Phi, y)(prior_var, noise_var)


class CoordinateFeatures:
    """Feature map that keeps a fixed subset of input coordinates."""

    def __init__(self, indices):
        self.indices = np.asarray(indices, dtype=int)
        self.dim = self.indices.size

    def __call__(self, x):
        return np.asarray(x, dtype=float)[..., self.indices]

    def describe(self):
        return {"type": "coordinates", "indices": self.indices.tolist()}


class BayesianLinearModel:
    """Online conjugate linear regression ``y = phi(x)' theta + noise``."""

    def __init__(self, features, prior_var=1.0, noise_var=1.0, name=None):
        self.features = features
        self.posterior = prior_posterior(features.dim, prior_var, noise_var)
        self.name = name or "linreg"

    @property
    def feature_dim(self):
        return self.features.dim

    def predict_log_density(self, x, y):
        return float(linreg_predict_log_density(self.posterior, self.features(x), y))

    def predictive(self, x):
        return predictive_moments(self.posterior, self.features(x))

    def observe(self, x, y):
        self.posterior = linreg_observe(self.posterior, self.features(x), y)

    def describe(self):
        return {"name": self.name, "family": "linear", "features": self.features.describe(),
                "prior_var": self.posterior.prior_var, "noise_var": self.posterior.noise_var}
