"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the verdict lines are written
straight to the terminal, so ``-s`` is not needed).
"""

import math
import time

import numpy as np
import pytest
import yaml

from obstack.datagen import gen_density_stream, gen_garch_series
from obstack.harness import experiment as experiment_mod
from obstack.harness import parse_config, run_experiment, sweep_learning_rates
from obstack.harness.cli import main
from obstack.models import GarchSMCModel, garch_smc_step, linreg_observe, predictive_moments, prior_posterior
from obstack.simplex import is_simplex, project_simplex_euclidean, project_simplex_metric
from obstack.stackers import StackerConfig, run_stacker, softbayes_factors, softbayes_rate, solve_bcrp
from obstack.stackers import solve_bcrp_log

from oracles import (garch_mixture_predictives, gaussian_nll, grid_bcrp, kakade_ng_bound,
                     metric_objective, refined_grid_metric_projection)

pytestmark = pytest.mark.slow

SEEDS = list(range(10))
_scenario_cache = {}


def verdict(capsys, number, passed, detail):
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, detail


@pytest.fixture
def cached_scenarios(monkeypatch):
    """Model densities depend only on (scenario, data, models, seed); compute each once."""
    real = experiment_mod.build_scenario

    def cached(scenario, data, models, seed):
        key = (scenario, repr(sorted(data.items())), repr(sorted(models.items())), seed)
        if key not in _scenario_cache:
            _scenario_cache[key] = real(scenario, data, models, seed)
        return _scenario_cache[key]

    monkeypatch.setattr(experiment_mod, "build_scenario", cached)


def random_obma_streams():
    rng = np.random.default_rng(20240101)
    out = []
    for _ in range(100):
        K = int(rng.integers(2, 9))
        T = int(rng.integers(1, 1001))
        out.append(rng.normal(0.0, 1.0, (T, K)))
    return out


def test_criterion_01_telescoping_identity(capsys):
    start = time.perf_counter()
    worst = 0.0
    for L in random_obma_streams():
        tr = run_stacker(StackerConfig("OBMA"), L)
        K = L.shape[1]
        lhs = L.sum(axis=0) - tr.log_ens.sum()
        rhs = np.log(tr.final_weights) - np.log(np.full(K, 1.0 / K))
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    elapsed = time.perf_counter() - start
    verdict(capsys, 1, worst < 1e-8 and elapsed < 10.0,
            f"max |LHS-RHS| = {worst:.2e} (< 1e-8) over 100 traces in {elapsed:.2f}s (< 10s)")


def test_criterion_02_hedge_equivalence(capsys):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        K = int(rng.integers(2, 9))
        L = rng.normal(0.0, 2.0, (int(rng.integers(1, 501)), K))
        a = run_stacker(StackerConfig("OBMA"), L)
        b = run_stacker(StackerConfig("Hedge", learning_rate=1.0), L)
        worst = max(worst, float(np.abs(a.weights - b.weights).max()),
                    float(np.abs(a.final_weights - b.final_weights).max()))
    elapsed = time.perf_counter() - start
    verdict(capsys, 2, worst <= 1e-10 and elapsed < 5.0,
            f"max weight difference {worst:.2e} (<= 1e-10) over 50 streams in {elapsed:.2f}s (< 5s)")


def test_criterion_03_obma_regret_bound(capsys):
    worst = -math.inf
    for L in random_obma_streams():
        tr = run_stacker(StackerConfig("OBMA"), L)
        regret = float(L.sum(axis=0).max() - tr.log_ens.sum())
        worst = max(worst, regret - math.log(L.shape[1]))
    verdict(capsys, 3, worst <= 1e-6,
            f"max (regret vs best model - log K) = {worst:.3e} (<= 1e-6) over 100 traces")


def test_criterion_04_bcrp_oracle(capsys):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst_gap, worst_diff = 0.0, 0.0
    for K in (2, 3):
        for _ in range(15):
            T = int(rng.integers(1, 51))
            R = rng.lognormal(0.0, 1.0, (T, K))
            res = solve_bcrp(R)
            _, best = grid_bcrp(R, 1e-3)
            worst_diff = max(worst_diff, abs(res.log_wealth - best))
            worst_gap = max(worst_gap, res.gap)
    elapsed = time.perf_counter() - start
    ok = worst_diff <= 1e-3 and worst_gap <= 1e-6 and elapsed < 30.0
    verdict(capsys, 4, ok, f"max |log-wealth - grid| = {worst_diff:.2e} (<= 1e-3), "
                           f"max FW gap = {worst_gap:.2e} (<= 1e-6), {elapsed:.2f}s (< 30s)")


def test_criterion_05_softbayes_simplex(capsys):
    rng = np.random.default_rng(5)
    worst, n_floor, n = 0.0, 0, 0
    K = 6
    w = np.full(K, 1.0 / K)
    for t in range(1, 100_001):
        if t % 1000 == 1:
            K = int(rng.integers(2, 11))
            w = rng.dirichlet(np.full(K, 0.5))
        r = np.exp(rng.normal(0.0, 3.0, K))
        r /= r.max()
        mask = rng.random(K) < 0.2
        mask[int(np.argmax(r))] = False
        r[mask] = 1e-300
        n_floor += int(mask.sum())
        eta = softbayes_rate(K, t % 1000 + 1) if t % 2 else float(rng.uniform(0.0, 0.999))
        new = softbayes_factors(w, r, eta)
        worst = max(worst, abs(new.sum() - 1.0))
        w = new / new.sum()
        n += 1
    verdict(capsys, 5, worst <= 1e-12 and n == 100_000,
            f"max |sum - 1| before renormalisation = {worst:.2e} (<= 1e-12) over {n} updates "
            f"with {n_floor} floor-level entries")


def random_spd(rng, k, cond):
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    return Q @ np.diag(np.geomspace(1.0, cond, k)) @ Q.T


def test_criterion_06_metric_projection(capsys):
    rng = np.random.default_rng(6)
    worst, worst_obj = 0.0, -math.inf
    for i in range(200):
        K = 2 if i < 100 else 3
        A = random_spd(rng, K, float(rng.uniform(1.0, 50.0)))
        v = rng.normal(1.0 / K, 1.0, K)
        w = project_simplex_metric(v, A)
        w_grid = refined_grid_metric_projection(v, A, 1e-6)
        worst = max(worst, float(np.abs(w - w_grid).max()))
        worst_obj = max(worst_obj, metric_objective(w, v, A) - metric_objective(w_grid, v, A))
    ident = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 12))
        v = rng.normal(0.0, 2.0, k)
        ident = max(ident, float(np.abs(project_simplex_metric(v, np.eye(k))
                                        - project_simplex_euclidean(v)).max()))
    ok = worst <= 1e-4 and worst_obj <= 1e-12 and ident <= 1e-8
    verdict(capsys, 6, ok, f"max |w - grid| = {worst:.2e} (<= 1e-4), objective excess {worst_obj:.1e}, "
                           f"identity vs Euclidean {ident:.2e} (<= 1e-8)")


def test_criterion_07_kakade_ng_bound(capsys):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    T, F = 2000, 4
    worst_margin, n_checked = math.inf, 0
    for _ in range(20):
        prior_var, noise_var = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.2, 2.0))
        Phi = rng.normal(size=(T, F))
        Phi *= (rng.uniform(0.0, 1.0, T) / np.linalg.norm(Phi, axis=1))[:, None]
        theta_gen = rng.normal(0.0, 1.0, F)
        y = Phi @ theta_gen + rng.normal(0.0, math.sqrt(noise_var), T)
        post = prior_posterior(F, prior_var, noise_var)
        bayes_loss = np.empty(T)
        for t in range(T):
            mean, var = predictive_moments(post, Phi[t])
            bayes_loss[t] = gaussian_nll(y[t], mean, var)
            post = linreg_observe(post, Phi[t], y[t])
        cum_bayes = np.cumsum(bayes_loss)
        for _ in range(10):
            d = rng.normal(size=F)
            theta = d / np.linalg.norm(d) * rng.uniform(0.0, 3.0)
            fixed = np.cumsum([gaussian_nll(y[t], Phi[t] @ theta, noise_var) for t in range(T)])
            # Check every prefix length, since the bound holds for each horizon.
            for tt in (1, 10, 100, 500, 1000, T):
                gap = cum_bayes[tt - 1] - fixed[tt - 1]
                worst_margin = min(worst_margin, kakade_ng_bound(theta, prior_var, noise_var, tt) - gap)
                n_checked += 1
    elapsed = time.perf_counter() - start
    verdict(capsys, 7, worst_margin >= 0.0 and elapsed < 60.0,
            f"min (bound - gap) = {worst_margin:.4f} (>= 0) over {n_checked} checks in {elapsed:.1f}s (< 60s)")


def regression_config(scenario):
    return parse_config({"scenario": scenario, "seeds": SEEDS,
                         "stackers": [{"algorithm": "OBMA"}, {"algorithm": "EG"}, {"algorithm": "ONS"}]})


def test_criterion_08_open_scenario(capsys, cached_scenarios):
    start = time.perf_counter()
    reps = run_experiment(regression_config("open"))
    elapsed = time.perf_counter() - start
    assert all(r.ok for r in reps)
    med = {n: float(np.median([r.avg_pll(n)[-1] for r in reps])) for n in ("obma", "eg", "ons")}
    eg_gap, ons_gap = med["eg"] - med["obma"], med["ons"] - med["obma"]
    ok = eg_gap > 0.05 and ons_gap > 0.05 and elapsed < 300.0
    verdict(capsys, 8, ok, f"median avg PLL at T=5000: O-BMA {med['obma']:.4f}, EG {med['eg']:.4f} "
                           f"(+{eg_gap:.4f}), ONS {med['ons']:.4f} (+{ons_gap:.4f}); margins > 0.05; "
                           f"{elapsed:.1f}s (< 300s)")


def test_criterion_09_closed_scenario(capsys, cached_scenarios):
    start = time.perf_counter()
    reps = run_experiment(regression_config("closed"))
    elapsed = time.perf_counter() - start
    assert all(r.ok for r in reps)
    w15 = [float(r.trace("obma").final_weights[14]) for r in reps]
    obma = float(np.median([r.avg_pll("obma")[-1] for r in reps]))
    ons = float(np.median([r.avg_pll("ons")[-1] for r in reps]))
    per_seed = max(abs(r.avg_pll("ons")[-1] - r.avg_pll("obma")[-1]) for r in reps)
    ok = np.median(w15) > 0.99 and abs(ons - obma) < 0.05 and elapsed < 300.0
    verdict(capsys, 9, ok, f"median O-BMA weight on model 15 = {np.median(w15):.4f} (> 0.99; "
                           f"{sum(w > 0.99 for w in w15)}/10 seeds individually); median avg PLL "
                           f"O-BMA {obma:.4f} vs ONS {ons:.4f}, |diff| {abs(ons - obma):.4f} (< 0.05; "
                           f"worst seed {per_seed:.4f}); {elapsed:.1f}s (< 300s)")


def test_criterion_10_sublinear_regret(capsys):
    names = ("EG", "SoftBayes", "ONS")
    regrets = {n: {T: [] for T in (500, 1000, 2000)} for n in names}
    for seed in SEEDS:
        L = np.log(gen_density_stream(5, 2000, "iid-lognormal", seed))
        for n in names:
            tr = run_stacker(StackerConfig(n), L)
            cum = np.cumsum(tr.log_ens)
            for T in (500, 1000, 2000):
                regrets[n][T].append(solve_bcrp_log(L[:T]).log_wealth - cum[T - 1])
    ok, parts = True, []
    for n in names:
        m = {T: float(np.median(v)) for T, v in regrets[n].items()}
        good = m[1000] < 2 * m[500] and m[2000] < 2 * m[1000]
        ok &= good
        parts.append(f"{n} R(500)={m[500]:.2f} R(1000)={m[1000]:.2f} R(2000)={m[2000]:.2f}")
    verdict(capsys, 10, ok, "median regret vs BCRP, R(2T) < 2 R(T): " + "; ".join(parts))


def test_criterion_11_sweep_stability(capsys, cached_scenarios):
    cfg = regression_config("open")
    rows = sweep_learning_rates(cfg)
    cells = {(r.algorithm, r.rate) for r in rows}
    expected = {(a, r) for a in ("EG", "ONS") for r in (1.0, 0.1, 0.01, 0.001, 0.0001)}
    ok = (cells == expected and len(rows) == 10
          and all(r.n_failed == 0 and r.weights_valid and r.median_pll is not None
                  and np.isfinite(r.median_pll) for r in rows))
    table = ", ".join(f"{r.algorithm}@{r.rate:g}={r.median_pll:.4f}" for r in rows if r.median_pll is not None)
    verdict(capsys, 11, ok, f"{len(rows)} cells finite and simplex-valid; median PLL {table}")


def test_criterion_12_garch_smc(capsys):
    y = gen_garch_series(300, seed=12)

    def run(seed):
        m = GarchSMCModel(n_particles=64, seed=seed)
        out = []
        for v in y:
            out.append(m.predict_log_density(None, v))
            m.observe(None, v)
        return np.array(out)

    deterministic = run(3).tobytes() == run(3).tobytes() and run(3).tobytes() != run(4).tobytes()
    worst = 0.0
    rng = np.random.default_rng(12)
    for n in (1, 2, 5, 8):
        m = GarchSMCModel(n_particles=n, seed=n)
        pset = m.pset
        params = pset.particles[:, :3].tolist()
        expected = garch_mixture_predictives(params, pset.weights.tolist(), pset.particles[:, 3].tolist(), y[:100])
        got = []
        for v in y[:100]:
            lp, pset, _ = garch_smc_step(pset, v, rng, resample_threshold=0.0)
            got.append(lp)
        worst = max(worst, float(np.abs(np.array(got) - expected).max()))
    verdict(capsys, 12, deterministic and worst <= 1e-10,
            f"seeded runs byte-identical: {deterministic}; max |log predictive - mixture oracle| = "
            f"{worst:.2e} (<= 1e-10)")


def test_criterion_13_end_to_end_determinism(capsys, tmp_path):
    stackers = [{"algorithm": a} for a in ("OBMA", "DMA", "EG", "SmoothedEG", "SoftBayes", "ONS", "DONS")]
    configs = {
        "open": {"scenario": "open", "seeds": [0, 1], "data": {"n_pretrain": 200, "n_stream": 300}},
        "drift": {"scenario": "drift", "seeds": [2], "data": {"n_segments": 2, "segment_length": 150}},
        "garch": {"scenario": "garch-sim", "seeds": [3], "data": {"T": 150}, "models": {"n_particles": 50}},
        "density": {"scenario": "density-only", "seeds": [4, 5], "data": {"regime": "near-zero-outlier", "T": 300}},
    }
    identical, compared = True, 0
    for name, doc in configs.items():
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump({**doc, "stackers": stackers}))
        out = tmp_path / name
        snapshots = []
        for _ in range(2):
            assert main(["run", "--config", str(path), "--out", str(out)]) == 0
            snapshots.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*"))
                              if p.name in ("trace.csv", "summary.json", "experiment.json")})
        compared += len(snapshots[0])
        identical &= snapshots[0] == snapshots[1]
    capsys.readouterr()
    verdict(capsys, 13, identical and compared > 0,
            f"{compared} trace/summary files byte-identical across repeated runs: {identical}")
