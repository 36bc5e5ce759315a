"""Data streams and model banks for the built-in experiment scenarios.

Every scenario turns ``(data options, model options, seed)`` into a matrix of
one-step-ahead log predictive densities, one column per model. The models
never see the stacker weights, so this matrix can be produced once per trial
and then replayed through any number of stackers.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..datagen import (SubsetRegressionSpec, build_closed_bank, build_open_bank,
                       gen_density_stream, gen_drift_stream, gen_garch_series,
                       gen_subset_regression)
from ..errors import InvalidInputError, ObstackError
from ..models import (BayesianLinearModel, CoordinateFeatures, GarchPrior, GarchSMCModel,
                      RFFGPModel, fit_linear_hyperparameters, make_rff_basis)

SCENARIOS = ("open", "closed", "drift", "garch-sim", "density-only")

DATA_DEFAULTS = {
    "open": {"dim": 15, "input_mean": 5.0, "noise_var": 1.0, "snr": 0.8,
             "n_pretrain": 1000, "n_stream": 5000},
    "drift": {"n_segments": 4, "segment_length": 500, "d": 2, "noise_var": 0.25, "snr": 1.0},
    "garch-sim": {"T": 1000, "alpha0": 0.05, "alpha1": 0.08, "beta": 0.9},
    "density-only": {"K": 5, "T": 2000, "regime": "iid-lognormal", "spread": 1.0,
                     "outlier_prob": 0.05},
}
DATA_DEFAULTS["closed"] = dict(DATA_DEFAULTS["open"])

MODEL_DEFAULTS = {
    "open": {"prior_vars": [float(v) for v in np.logspace(-3, 2, 11)],
             "noise_vars": [float(v) for v in np.logspace(-2, 1.5, 15)]},
    "drift": {"n_features": 50, "lengthscale": 1.0, "amplitude": 1.0, "prior_var": 1.0,
              "noise_var": 0.25, "random_walk_vars": [0.0, 1e-4, 1e-3, 1e-2]},
    "garch-sim": {"n_particles": 200, "n_rejuvenate": 5, "window": 50, "resample_threshold": 0.5,
                  "priors": [{"center": [0.1, 0.1, 0.5], "scale": [0.05, 0.05, 0.1]},
                             {"center": [0.05, 0.08, 0.85], "scale": [0.05, 0.05, 0.05]},
                             {"center": [0.02, 0.05, 0.93], "scale": [0.02, 0.02, 0.02]}]},
    "density-only": {},
}
MODEL_DEFAULTS["closed"] = dict(MODEL_DEFAULTS["open"])


class ModelFailure(ObstackError):
    """A model raised or produced an invalid density; the trial cannot continue."""

    def __init__(self, step, model, cause):
        super().__init__(f"model {model!r} failed at step {step}: {cause}")
        self.step = step
        self.model = model
        self.cause = cause


@dataclass
class ScenarioData:
    """Per-model log predictive densities for one trial."""

    log_densities: np.ndarray  # (T, K)
    model_names: list
    model_descriptions: list = field(default_factory=list)
    model_events: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failure: Optional[ModelFailure] = None


def model_seed(seed, k):
    """Independent seed material for model ``k`` of a trial seeded with ``seed``."""
    return [int(seed), 1, int(k)]


def stream_log_densities(models, X, y):
    """Predict-then-update loop over a stream: every model predicts, then every model observes.

    Returns the (T, K) log-density matrix. A model exception or a NaN/+inf
    log-density raises :class:`ModelFailure` carrying the 1-based step; the
    rows computed so far are attached as ``partial``.
    """
    T, K = len(y), len(models)
    out = np.empty((T, K))
    for t in range(T):
        x_t, y_t = (None if X is None else X[t]), float(y[t])
        for k, m in enumerate(models):
            try:
                v = float(m.predict_log_density(x_t, y_t))
                if np.isnan(v) or v == np.inf:
                    raise InvalidInputError(f"log-density {v}")
                out[t, k] = v
            except (ObstackError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                failure = ModelFailure(t + 1, getattr(m, "name", str(k)), f"{type(exc).__name__}: {exc}")
                failure.partial = out[:t]
                raise failure from exc
        for k, m in enumerate(models):
            try:
                m.observe(x_t, y_t)
            except (ObstackError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                failure = ModelFailure(t + 1, getattr(m, "name", str(k)), f"{type(exc).__name__}: {exc}")
                failure.partial = out[:t + 1]
                raise failure from exc
    return out


def _regression_models(scenario, data, models, seed):
    spec = SubsetRegressionSpec(dim=data["dim"], input_mean=data["input_mean"],
                                noise_var=data["noise_var"], snr=data["snr"],
                                n_pretrain=data["n_pretrain"], n_stream=data["n_stream"], seed=seed)
    pretrain, stream, theta = gen_subset_regression(spec)
    bank = build_open_bank(theta) if scenario == "open" else build_closed_bank(theta)
    out = []
    for ms in bank:
        feats = CoordinateFeatures(ms.indices)
        if pretrain.y.size:
            fit = fit_linear_hyperparameters(feats(pretrain.X), pretrain.y,
                                             models["prior_vars"], models["noise_vars"])
            params = fit.params
        else:
            params = {"prior_var": models["prior_vars"][0], "noise_var": models["noise_vars"][0]}
        out.append(BayesianLinearModel(feats, name=ms.name, **params))
    return out, stream.X, stream.y, {"theta": theta.tolist()}


def _drift_models(data, models, seed):
    stream = gen_drift_stream(data["n_segments"], data["segment_length"], data["d"], seed,
                              noise_var=data["noise_var"], snr=data["snr"])
    basis_seed = model_seed(seed, 0)
    out = []
    for rw in models["random_walk_vars"]:
        basis = make_rff_basis(data["d"], models["n_features"], basis_seed,
                               lengthscale=models["lengthscale"], amplitude=models["amplitude"],
                               random_walk_var=rw)
        out.append(RFFGPModel(basis, models["prior_var"], models["noise_var"],
                              name=f"rffgp(rw={rw:g})"))
    meta = {"boundaries": stream.metadata["boundaries"]}
    return out, stream.X, stream.y, meta


def _garch_models(data, models, seed):
    y = gen_garch_series(data["T"], data["alpha0"], data["alpha1"], data["beta"], seed=seed)
    out = []
    for k, p in enumerate(models["priors"]):
        prior = GarchPrior(center=tuple(p["center"]), scale=tuple(p["scale"]))
        out.append(GarchSMCModel(prior, models["n_particles"], seed=model_seed(seed, k),
                                 resample_threshold=models["resample_threshold"],
                                 n_rejuvenate=models["n_rejuvenate"], window=models["window"],
                                 name=f"garch11[{k + 1}]"))
    return out, None, y, {}


def build_scenario(scenario, data, models, seed):
    """Generate the stream, build the bank and run it; model failures are captured."""
    if scenario not in SCENARIOS:
        raise InvalidInputError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if scenario == "density-only":
        r = gen_density_stream(data["K"], data["T"], data["regime"], seed,
                               spread=data["spread"], outlier_prob=data["outlier_prob"])
        names = [f"m{k + 1}" for k in range(data["K"])]
        return ScenarioData(np.log(r), names, [{"name": n, "family": "synthetic-density"} for n in names],
                            {}, {"regime": data["regime"]})
    if scenario in ("open", "closed"):
        bank, X, y, meta = _regression_models(scenario, data, models, seed)
    elif scenario == "drift":
        bank, X, y, meta = _drift_models(data, models, seed)
    else:
        bank, X, y, meta = _garch_models(data, models, seed)
    names = [m.name for m in bank]
    failure = None
    try:
        L = stream_log_densities(bank, X, y)
    except ModelFailure as exc:
        L, failure = exc.partial, exc
    events = {m.name: list(m.degenerate_events) for m in bank if getattr(m, "degenerate_events", None)}
    return ScenarioData(L, names, [m.describe() for m in bank], events, meta, failure)
