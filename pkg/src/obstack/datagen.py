"""Seeded synthetic streams.

All randomness comes from ``numpy.random.default_rng(seed)``: the PCG64
generator (O'Neill 2014, 128-bit LCG state with XSL-RR output) seeded through
``SeedSequence(seed)``. Draw order is fixed per generator and documented in
each docstring, so a stream can be replayed bit-for-bit from ``(spec, seed)``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .simplex import DEFAULT_DENSITY_FLOOR

DENSITY_REGIMES = ("iid-lognormal", "single-dominant", "alternating-dominant", "near-zero-outlier")


@dataclass(frozen=True)
class SubsetRegressionSpec:
    dim: int = 15
    input_mean: float = 5.0
    noise_var: float = 1.0
    snr: float = 0.8
    n_pretrain: int = 1000
    n_stream: int = 5000
    seed: int = 0


@dataclass
class Stream:
    """Rows ``(t, x, y)`` of an online regression stream."""

    X: np.ndarray  # (T, d)
    y: np.ndarray  # (T,)
    t: np.ndarray  # (T,) strictly increasing step indices
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.y.size

    def __iter__(self):
        return zip(self.t.tolist(), self.X, self.y.tolist())

    def split(self, n):
        return (Stream(self.X[:n], self.y[:n], self.t[:n], dict(self.metadata)),
                Stream(self.X[n:], self.y[n:], self.t[n:], dict(self.metadata)))


def weak_predictor_theta(dim, snr, noise_var, rng):
    """Positive coefficients rescaled so that ``||theta||^2 / noise_var == snr``."""
    theta = np.abs(rng.standard_normal(dim))
    return theta * np.sqrt(snr * noise_var) / np.linalg.norm(theta)


def gen_subset_regression(spec=SubsetRegressionSpec()):
    """Breiman-style regression data split into pretraining and online parts.

    Draw order: ``theta`` (dim normals), inputs (N x dim normals), noise (N
    normals), with ``N = n_pretrain + n_stream``. Returns
    ``(pretrain, stream, theta)``.
    """
    if spec.dim < 1 or spec.n_pretrain < 0 or spec.n_stream < 0:
        raise InvalidInputError(f"invalid subset-regression spec: {spec}")
    rng = np.random.default_rng(spec.seed)
    theta = weak_predictor_theta(spec.dim, spec.snr, spec.noise_var, rng)
    n = spec.n_pretrain + spec.n_stream
    X = spec.input_mean + rng.standard_normal((n, spec.dim))
    y = X @ theta + np.sqrt(spec.noise_var) * rng.standard_normal(n)
    full = Stream(X, y, np.arange(n), {"generator": "subset-regression", "seed": spec.seed})
    pretrain, stream = full.split(spec.n_pretrain)
    return pretrain, stream, theta


@dataclass(frozen=True)
class ModelSpec:
    """A linear regression model restricted to some input coordinates (0-based)."""

    name: str
    indices: tuple

    @property
    def feature_dim(self):
        return len(self.indices)


def build_open_bank(theta):
    """Model k sees only coordinate k; no member matches the generating process."""
    return [ModelSpec(f"x{k + 1}", (k,)) for k in range(len(theta))]


def build_closed_bank(theta):
    """Model k sees coordinates 1..k; the last model is the true family."""
    return [ModelSpec(f"x1..x{k + 1}", tuple(range(k + 1))) for k in range(len(theta))]


def gen_drift_stream(n_segments, segment_length, d, seed, noise_var=1.0, snr=1.0):
    """Linear-Gaussian stream whose coefficients are redrawn at every segment boundary.

    Draw order: per segment, ``theta`` (d normals, rescaled to
    ``||theta||^2 = snr * noise_var``); then all inputs ``N(0, I_d)``; then noise.
    """
    if n_segments < 1 or segment_length < 1 or d < 1:
        raise InvalidInputError("n_segments, segment_length and d must all be positive")
    rng = np.random.default_rng(seed)
    thetas = []
    for _ in range(n_segments):
        th = rng.standard_normal(d)
        thetas.append(th * np.sqrt(snr * noise_var) / np.linalg.norm(th))
    n = n_segments * segment_length
    X = rng.standard_normal((n, d))
    coef = np.repeat(np.array(thetas), segment_length, axis=0)
    y = np.sum(X * coef, axis=1) + np.sqrt(noise_var) * rng.standard_normal(n)
    boundaries = [segment_length * s for s in range(1, n_segments)]
    meta = {"generator": "drift", "seed": seed, "boundaries": boundaries,
            "thetas": [th.tolist() for th in thetas]}
    return Stream(X, y, np.arange(n), meta)


def gen_density_stream(K, T, regime, seed, spread=1.0, outlier_prob=0.05,
                       floor=DEFAULT_DENSITY_FLOOR):
    """(T, K) strictly positive density vectors for stacker-only experiments.

    ``iid-lognormal``: ``exp(spread * N(0,1))`` entries.
    ``single-dominant``: lognormal, then model 0 is set above every other entry.
    ``alternating-dominant``: deterministic; model ``t mod K`` gets density 2,
    the others 0.5, so the stream is permutation-symmetric when ``K | T``.
    ``near-zero-outlier``: lognormal with entries replaced by ``floor`` with
    probability ``outlier_prob`` (never a whole row).
    """
    if regime not in DENSITY_REGIMES:
        raise InvalidInputError(f"unknown regime {regime!r}; expected one of {DENSITY_REGIMES}")
    if K < 1 or T < 0:
        raise InvalidInputError("K must be positive and T non-negative")
    rng = np.random.default_rng(seed)
    if regime == "alternating-dominant":
        r = np.full((T, K), 0.5)
        r[np.arange(T), np.arange(T) % K] = 2.0
        return r
    r = np.exp(spread * rng.standard_normal((T, K)))
    if regime == "single-dominant":
        rest = r[:, 1:].max(axis=1) if K > 1 else r[:, 0]
        r[:, 0] = rest * (1.1 + rng.random(T))
    elif regime == "near-zero-outlier":
        mask = rng.random((T, K)) < outlier_prob
        mask[mask.all(axis=1), 0] = False
        r[mask] = floor
    return r


def gen_garch_series(T, alpha0=0.05, alpha1=0.08, beta=0.9, seed=0):
    """GARCH(1,1)-Normal returns; the variance starts at its stationary value."""
    if not (alpha0 > 0 and alpha1 >= 0 and beta >= 0 and alpha1 + beta < 1):
        raise InvalidInputError("GARCH parameters must satisfy alpha0>0, alpha1,beta>=0, alpha1+beta<1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(T)
    y = np.empty(T)
    sigma2 = alpha0 / (1.0 - alpha1 - beta)
    for t in range(T):
        y[t] = np.sqrt(sigma2) * eps[t]
        sigma2 = alpha0 + alpha1 * y[t] ** 2 + beta * sigma2
    return y


def write_stream_csv(path, stream):
    """Columns ``t, x_1..x_d, y`` with 17 significant digits."""
    d = stream.X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{j + 1}" for j in range(d)] + ["y"])
        for t, x, y in stream:
            w.writerow([str(t)] + [format(v, ".17g") for v in x] + [format(y, ".17g")])


def read_stream_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    data = np.array([[float(v) for v in row] for row in body]).reshape(-1, d + 2)
    return Stream(data[:, 1:1 + d], data[:, -1], data[:, 0].astype(int))
