"""Bayesian predictive models that supply per-step densities to the stackers."""

from .base import PredictiveModel
from .empirical_bayes import (EBFit, empirical_bayes_fit, fit_linear_hyperparameters,
                              fit_rff_hyperparameters, prequential_log_score, product_grid)
from .garch import (GarchParticleSet, GarchPrior, GarchSMCModel, garch_smc_step,
                    init_particles, mixture_log_predictive, systematic_resample)
from .linear import (BayesianLinearModel, CoordinateFeatures, GaussianLinearPosterior,
                     LinearEvidence, linreg_batch_posterior, linreg_log_evidence,
                     linreg_observe, linreg_predict_log_density, predictive_moments,
                     prior_posterior)
from .rff import RFFBasis, RFFGPModel, diffuse, make_rff_basis, rffgp_observe, rffgp_predict_log_density

__all__ = [
    "BayesianLinearModel", "CoordinateFeatures", "EBFit", "GarchParticleSet", "GarchPrior",
    "GarchSMCModel", "GaussianLinearPosterior", "LinearEvidence", "PredictiveModel",
    "RFFBasis", "RFFGPModel", "diffuse", "empirical_bayes_fit", "fit_linear_hyperparameters",
    "fit_rff_hyperparameters", "garch_smc_step", "init_particles", "linreg_batch_posterior",
    "linreg_log_evidence", "linreg_observe", "linreg_predict_log_density", "make_rff_basis",
    "mixture_log_predictive", "prequential_log_score", "predictive_moments", "prior_posterior",
    "product_grid", "rffgp_observe", "rffgp_predict_log_density", "systematic_resample",
]
