"""Experiment configuration documents (YAML or JSON) and their schema.

A document looks like::

    scenario: open
    n_trials: 10          # or an explicit list under ``seeds``
    seed: 0               # seeds default to seed, seed+1, ...
    suppress: 100
    stackers:
      - {algorithm: OBMA}
      - {algorithm: EG, learning_rate: 0.01}
      - {algorithm: ONS, name: ons-beta1, ons_beta: 1.0}
    data: {n_stream: 2000}      # scenario-specific, see DATA_DEFAULTS
    models: {}                  # scenario-specific, see MODEL_DEFAULTS
    output: {dir: runs/open}
    sweep: {algorithms: [EG, ONS], rates: [1, 0.1, 0.01, 0.001, 0.0001]}

Unknown keys anywhere are errors.
"""

import copy
import dataclasses
from dataclasses import dataclass, field

import jsonschema
import yaml

from ..datagen import DENSITY_REGIMES
from ..errors import ConfigError, InvalidInputError
from ..stackers import ALGORITHMS, StackerConfig
from .scenarios import DATA_DEFAULTS, MODEL_DEFAULTS, SCENARIOS

SWEEP_ALGORITHMS = ("EG", "ONS", "SmoothedEG", "SoftBayes", "DONS")
DEFAULT_SWEEP = {"algorithms": ["EG", "ONS"], "rates": [1.0, 1e-1, 1e-2, 1e-3, 1e-4]}

_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_num = {"type": "number"}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


STACKER_SCHEMA = _obj({
    "algorithm": {"enum": list(ALGORITHMS)},
    "name": {"type": "string", "minLength": 1, "pattern": "^[^,.\\s]+$"},
    "learning_rate": {"type": ["number", "null"]},
    "dma_forget": _num,
    "ons_delta": _num,
    "ons_beta": _num,
    "dons_forget": _num,
    "eg_smooth": _num,
    "initial_weights": {"type": ["array", "null"], "items": _nonneg, "minItems": 1},
    "density_floor": _pos,
}, required=["algorithm"])

_regression_data = _obj({"dim": _pos_int, "input_mean": _num, "noise_var": _pos, "snr": _pos,
                         "n_pretrain": _nonneg_int, "n_stream": _nonneg_int})
_regression_models = _obj({"prior_vars": _pos_list, "noise_vars": _pos_list})
_garch_prior = _obj({"center": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                     "scale": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3}},
                    required=["center", "scale"])

DATA_SCHEMAS = {
    "open": _regression_data,
    "closed": _regression_data,
    "drift": _obj({"n_segments": _pos_int, "segment_length": _pos_int, "d": _pos_int,
                   "noise_var": _pos, "snr": _pos}),
    "garch-sim": _obj({"T": _nonneg_int, "alpha0": _pos, "alpha1": _nonneg, "beta": _nonneg}),
    "density-only": _obj({"K": _pos_int, "T": _nonneg_int, "regime": {"enum": list(DENSITY_REGIMES)},
                          "spread": _pos, "outlier_prob": {"type": "number", "minimum": 0, "maximum": 1}}),
}

MODEL_SCHEMAS = {
    "open": _regression_models,
    "closed": _regression_models,
    "drift": _obj({"n_features": _pos_int, "lengthscale": _pos, "amplitude": _pos, "prior_var": _pos,
                   "noise_var": _pos, "random_walk_vars": {"type": "array", "items": _nonneg, "minItems": 1}}),
    "garch-sim": _obj({"n_particles": _pos_int, "n_rejuvenate": _nonneg_int, "window": _nonneg_int,
                       "resample_threshold": {"type": "number", "minimum": 0, "maximum": 1},
                       "priors": {"type": "array", "items": _garch_prior, "minItems": 1}}),
    "density-only": _obj({}),
}

CONFIG_SCHEMA = _obj({
    "scenario": {"enum": list(SCENARIOS)},
    "n_trials": _pos_int,
    "seed": _nonneg_int,
    "seeds": {"type": "array", "items": _nonneg_int, "minItems": 1},
    "suppress": _nonneg_int,
    "stackers": {"type": "array", "items": STACKER_SCHEMA, "minItems": 1},
    "data": {"type": "object"},
    "models": {"type": "object"},
    "output": _obj({"dir": {"type": "string", "minLength": 1}}),
    "sweep": _obj({"algorithms": {"type": "array", "items": {"enum": list(SWEEP_ALGORITHMS)}, "minItems": 1},
                   "rates": _pos_list}),
}, required=["scenario", "stackers"])


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    stackers: tuple
    seeds: tuple
    data: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    suppress: int = 100
    out_dir: str = "runs"
    sweep: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_SWEEP))

    @property
    def n_trials(self):
        return len(self.seeds)

    def with_overrides(self, trials=None, seed=None, suppress=None, out_dir=None):
        """Apply command-line overrides; ``trials``/``seed`` regenerate the seed list."""
        seeds = self.seeds
        if trials is not None or seed is not None:
            n = self.n_trials if trials is None else int(trials)
            base = self.seeds[0] if seed is None else int(seed)
            if n < 1 or base < 0:
                raise ConfigError("trials must be >= 1 and seed >= 0")
            seeds = tuple(range(base, base + n))
        return dataclasses.replace(
            self, seeds=seeds,
            suppress=self.suppress if suppress is None else int(suppress),
            out_dir=self.out_dir if out_dir is None else str(out_dir))

    def to_dict(self):
        """Normalised document with every default filled in."""
        return {
            "scenario": self.scenario,
            "seeds": list(self.seeds),
            "n_trials": self.n_trials,
            "suppress": self.suppress,
            "stackers": [stacker_to_dict(s) for s in self.stackers],
            "data": copy.deepcopy(self.data),
            "models": copy.deepcopy(self.models),
            "output": {"dir": self.out_dir},
            "sweep": copy.deepcopy(self.sweep),
        }


def stacker_to_dict(cfg):
    """All fields of a stacker config; feeding the result back parses to an equal config."""
    d = dataclasses.asdict(cfg)
    d["name"] = cfg.label
    if d["initial_weights"] is not None:
        d["initial_weights"] = list(d["initial_weights"])
    return d


def _validate(doc, schema, where):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"{where}{'/' + path if path else ''}: {exc.message}") from None


def parse_config(doc):
    """Validate a parsed document and build an :class:`ExperimentConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    _validate(doc, CONFIG_SCHEMA, "config")
    scenario = doc["scenario"]
    data = dict(doc.get("data", {}))
    models = dict(doc.get("models", {}))
    _validate(data, DATA_SCHEMAS[scenario], "config/data")
    _validate(models, MODEL_SCHEMAS[scenario], "config/models")
    data = {**copy.deepcopy(DATA_DEFAULTS[scenario]), **data}
    models = {**copy.deepcopy(MODEL_DEFAULTS[scenario]), **models}

    if "seeds" in doc:
        seeds = tuple(doc["seeds"])
        if "n_trials" in doc and doc["n_trials"] != len(seeds):
            raise ConfigError(f"n_trials={doc['n_trials']} but {len(seeds)} seeds were given")
    else:
        base = doc.get("seed", 0)
        seeds = tuple(range(base, base + doc.get("n_trials", 1)))

    stackers = []
    for i, s in enumerate(doc["stackers"]):
        kwargs = dict(s)
        if kwargs.get("initial_weights") is not None:
            kwargs["initial_weights"] = tuple(float(v) for v in kwargs["initial_weights"])
        try:
            stackers.append(StackerConfig(**kwargs))
        except InvalidInputError as exc:
            raise ConfigError(f"config/stackers/{i}: {exc}") from None
    labels = [s.label for s in stackers]
    dupes = sorted({n for n in labels if labels.count(n) > 1})
    if dupes:
        raise ConfigError(f"stacker names must be unique; give explicit names for {dupes}")

    sweep = {**copy.deepcopy(DEFAULT_SWEEP), **doc.get("sweep", {})}
    return ExperimentConfig(scenario=scenario, stackers=tuple(stackers), seeds=seeds, data=data,
                            models=models, suppress=doc.get("suppress", 100),
                            out_dir=doc.get("output", {}).get("dir", "runs"), sweep=sweep)


def load_config(path):
    """Read a YAML (or JSON, which is valid YAML) configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parse_config(doc)
