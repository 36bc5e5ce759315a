"""Type-II maximum likelihood by grid search over hyperparameters.

The score of a hyperparameter setting is the prequential log-score
``sum_i log p(y_i | y_{1:i-1}, psi)``. For static conjugate linear models
this equals the log marginal likelihood, which is available in closed form.
"""

import dataclasses
import itertools
from typing import NamedTuple

import numpy as np

from ..errors import NumericError
from .linear import LinearEvidence


class EBFit(NamedTuple):
    params: dict
    score: float
    scores: np.ndarray  # one per grid point, in grid order


def prequential_log_score(model, X, y):
    """Run ``model`` through the data, summing one-step-ahead log-densities."""
    total = 0.0
    for x_i, y_i in zip(X, y):
        total += model.predict_log_density(x_i, y_i)
        model.observe(x_i, y_i)
    return float(total)


def empirical_bayes_fit(score_fn, grid):
    """Grid point maximising ``score_fn(**params)``; ties go to the lowest index."""
    grid = list(grid)
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    scores = np.array([score_fn(**params) for params in grid], dtype=float)
    finite = np.where(np.isnan(scores), -np.inf, scores)
    if not np.any(np.isfinite(finite)):
        raise NumericError("every grid point produced a non-finite score")
    best = int(np.argmax(finite))
    return EBFit(dict(grid[best]), float(scores[best]), scores)


def product_grid(**axes):
    """Cartesian product of named axes as a list of dicts, last axis fastest."""
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]


DEFAULT_PRIOR_VARS = tuple(np.logspace(-3, 2, 11))
DEFAULT_NOISE_VARS = tuple(np.logspace(-2, 1.5, 15))


def fit_linear_hyperparameters(Phi, y, prior_vars=DEFAULT_PRIOR_VARS, noise_vars=DEFAULT_NOISE_VARS):
    evidence = LinearEvidence(Phi, y)
    return empirical_bayes_fit(evidence, product_grid(prior_var=prior_vars, noise_var=noise_vars))


def fit_rff_hyperparameters(X, y, basis, lengthscales, prior_vars=DEFAULT_PRIOR_VARS,
                            noise_vars=DEFAULT_NOISE_VARS):
    """Static (no random walk) RFF-GP evidence over a lengthscale x variance grid."""
    evidences = {}

    def score(lengthscale, prior_var, noise_var):
        if lengthscale not in evidences:
            b = dataclasses.replace(basis, lengthscale=lengthscale, random_walk_var=0.0)
            evidences[lengthscale] = LinearEvidence(b(X), y)
        return evidences[lengthscale](prior_var, noise_var)

    grid = product_grid(lengthscale=lengthscales, prior_var=prior_vars, noise_var=noise_vars)
    return empirical_bayes_fit(score, grid)
