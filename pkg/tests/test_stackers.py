import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstack.errors import InvalidInputError, NumericCollapseError
from obstack.simplex import is_simplex, project_simplex_metric
from obstack.stackers import (StackerConfig, apply_update, bma_hedge_equivalence_step, dma_update,
                              dons_update, eg_update, hedge_update, init_state, obma_update,
                              ons_update, run_stacker, smoothed_eg_update, softbayes_factors,
                              softbayes_online_update, softbayes_rate, softbayes_update)

from oracles import obma_weights

R2 = np.array([0.2, 0.1])


def weights_and_densities(k_min=2, k_max=8):
    return st.integers(k_min, k_max).flatmap(lambda k: st.tuples(
        st.lists(st.floats(1e-3, 1.0), min_size=k, max_size=k),
        st.lists(st.floats(1e-6, 1e3), min_size=k, max_size=k)))


# O-BMA and DMA

def test_obma_examples():
    np.testing.assert_allclose(obma_update(init_state(2), [0.2, 0.2]).weights, [0.5, 0.5])
    np.testing.assert_allclose(obma_update(init_state(2), R2).weights, [2 / 3, 1 / 3], atol=1e-15)
    s = obma_update(init_state([1.0, 0.0]), [0.01, 5.0])
    np.testing.assert_array_equal(s.weights, [1.0, 0.0])


def test_obma_tracks_log_wealth():
    s = obma_update(init_state(2), R2)
    assert s.cum_log_wealth == pytest.approx(math.log(0.15))
    np.testing.assert_allclose(s.cum_log_density, np.log(R2))
    assert s.t == 1


def test_obma_collapse_raises_with_step():
    # 0.5 * 5e-324 rounds to zero, so the whole numerator underflows.
    with pytest.raises(NumericCollapseError) as info:
        obma_update(init_state(2), [5e-324, 5e-324])
    assert info.value.step == 1


def test_obma_flags_collapse_event_before_error():
    s = init_state(2)
    for _ in range(3):
        s = obma_update(s, [1.0, 1e-200])
    assert s.collapse_events == ((2, 1),)
    assert is_simplex(s.weights)


def test_dma_examples():
    np.testing.assert_allclose(dma_update(init_state(2), R2, 0.99).weights, [2 / 3, 1 / 3], atol=1e-12)
    s = dma_update(init_state([0.9, 0.1]), [0.1, 0.1], 0.5)
    np.testing.assert_allclose(s.weights, [0.75, 0.25], atol=1e-12)


@given(weights_and_densities())
def test_dma_gamma_one_is_obma(wr):
    w, r = wr
    s = init_state(np.array(w) / sum(w))
    np.testing.assert_allclose(dma_update(s, r, 1.0).weights, obma_update(s, r).weights, atol=1e-12)


# EG family

def test_eg_examples():
    np.testing.assert_allclose(eg_update(init_state(2), [3.0, 3.0], 0.01).weights, [0.5, 0.5])
    np.testing.assert_allclose(eg_update(init_state(2), R2, 0.01).weights,
                               [0.5016666604938546, 0.4983333395061454], atol=1e-15)
    w = np.array([0.3, 0.7])
    np.testing.assert_allclose(eg_update(init_state(w), R2, 1e-14).weights, w, atol=1e-13)


def test_eg_cannot_overflow():
    s = init_state([1 - 1e-12, 1e-12])
    out = eg_update(s, [1e-300, 1.0], 1.0)
    assert is_simplex(out.weights)


def test_smoothed_eg():
    s = init_state(2)
    np.testing.assert_allclose(smoothed_eg_update(s, R2, 0.01, 0.0).weights, eg_update(s, R2, 0.01).weights)
    out = smoothed_eg_update(init_state([1.0, 0.0]), R2, 0.01, 0.01)
    np.testing.assert_allclose(out.weights, [0.995, 0.005], atol=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = smoothed_eg_update(init_state(rng.dirichlet(np.ones(5))), rng.lognormal(size=5), 1.0, 0.05).weights
        assert w.min() >= 0.05 / 5 - 1e-15


# Soft-Bayes

def test_softbayes_examples():
    np.testing.assert_allclose(softbayes_update(init_state(2), R2, 0.5).weights,
                               [0.5833333333333333, 0.41666666666666663], atol=1e-15)
    w = np.array([0.2, 0.8])
    np.testing.assert_allclose(softbayes_update(init_state(w), R2, 0.0).weights, w)
    np.testing.assert_allclose(softbayes_update(init_state(w), [0.4, 0.4], 0.7).weights, w, atol=1e-15)


@given(weights_and_densities(), st.floats(0.0, 0.999))
def test_softbayes_sum_is_one_before_renormalisation(wr, eta):
    w, r = wr
    w = np.array(w) / sum(w)
    r = np.array(r)
    r[0] = 1e-300
    assert abs(softbayes_factors(w, r, eta).sum() - 1.0) < 1e-12


def test_softbayes_online_schedule():
    assert softbayes_rate(2, 1) == pytest.approx(0.17328679513998632, rel=1e-14)
    assert softbayes_rate(2, 2) / softbayes_rate(2, 1) == pytest.approx(0.5)
    s = init_state(3)
    np.testing.assert_allclose(softbayes_online_update(s, [0.7, 0.7, 0.7]).weights, s.weights, atol=1e-15)
    out = softbayes_online_update(init_state([0.6, 0.4]), R2)
    # eta_1 = ln2/4, ratio 1/2, shrink towards w0 = (0.6, 0.4).
    eta = math.log(2) / 4
    wr = 0.6 * 0.2 + 0.4 * 0.1
    expected = np.array([0.6 * (1 - eta + eta * 0.2 / wr), 0.4 * (1 - eta + eta * 0.1 / wr)]) * 0.5 + 0.5 * np.array([0.6, 0.4])
    np.testing.assert_allclose(out.weights, expected, atol=1e-15)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_softbayes_online_k1():
    assert softbayes_online_update(init_state(1), [0.3]).weights.tolist() == [1.0]


# ONS and D-ONS

def test_ons_first_step_dense_oracle():
    r = R2
    s = init_state(2)
    g = r / 0.15
    A = np.eye(2) + np.outer(g, g)
    b = 101.0 * g
    v = 0.8 * np.linalg.solve(A, b)
    out = ons_update(s, r, delta=0.8, beta=0.01, eta=0.0)
    np.testing.assert_allclose(out.A, A, atol=1e-14)
    np.testing.assert_allclose(out.b, b, atol=1e-12)
    np.testing.assert_allclose(out.weights, project_simplex_metric(v, A), atol=1e-12)
    np.testing.assert_allclose(out.weights, [1.0, 0.0], atol=1e-12)
    smoothed = ons_update(s, r, delta=0.8, beta=0.01, eta=0.01)
    np.testing.assert_allclose(smoothed.weights, [0.995, 0.005], atol=1e-12)
    np.testing.assert_allclose(smoothed.raw_weights, [1.0, 0.0], atol=1e-12)


def test_ons_interior_step():
    # beta = 1 keeps the step inside the simplex; closed form for K = 2.
    s = init_state(2)
    out = ons_update(s, R2, delta=0.8, beta=1.0, eta=0.0)
    g = R2 / 0.15
    A = np.eye(2) + np.outer(g, g)
    v = 0.8 * np.linalg.solve(A, 2.0 * g)
    e = np.array([1.0, -1.0])
    w1 = -(e @ A @ (np.array([0.0, 1.0]) - v)) / (e @ A @ e)
    np.testing.assert_allclose(out.weights, [w1, 1 - w1], atol=1e-12)


def test_ons_k1_and_pd():
    s = init_state(1)
    for _ in range(5):
        s = ons_update(s, [0.3], 0.8, 0.01, 0.01)
    assert s.weights.tolist() == [1.0]
    rng = np.random.default_rng(1)
    s = init_state(4)
    for _ in range(200):
        s = ons_update(s, rng.lognormal(size=4), 0.8, 0.01, 0.01)
    np.testing.assert_allclose(s.A, s.A.T)
    assert np.linalg.eigvalsh(s.A).min() >= 1.0 - 1e-9


def test_dons_single_step_oracle():
    out = dons_update(init_state(2), R2, eta=1.0, gamma=0.99)
    np.testing.assert_allclose(out.weights, [0.7727272727272726, 0.2272727272727274], atol=1e-12)
    np.testing.assert_allclose(out.P, np.eye(2) + np.outer(R2, R2) / 0.15 ** 2, atol=1e-12)


def test_dons_uniform_fixed_point():
    out = dons_update(init_state(3), [0.4, 0.4, 0.4], eta=1.0, gamma=0.99)
    np.testing.assert_allclose(out.weights, np.full(3, 1 / 3), atol=1e-12)


# Hedge equivalence

def test_hedge_examples():
    np.testing.assert_allclose(bma_hedge_equivalence_step([0.5, 0.5], R2), [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(bma_hedge_equivalence_step([0.3, 0.7], [0.5, 0.5]), [0.3, 0.7], atol=1e-15)


@given(weights_and_densities())
def test_hedge_equals_obma(wr):
    w, r = wr
    w = np.array(w) / sum(w)
    np.testing.assert_allclose(bma_hedge_equivalence_step(w, r), obma_update(init_state(w), r).weights,
                               atol=1e-12)


# Generic properties

ALL = ["OBMA", "DMA", "EG", "SmoothedEG", "SoftBayes", "ONS", "DONS", "Hedge"]


@pytest.mark.parametrize("algorithm", ALL)
def test_every_update_stays_on_simplex(algorithm):
    rng = np.random.default_rng(7)
    cfg = StackerConfig(algorithm)
    s = init_state(5)
    for _ in range(300):
        r = rng.lognormal(0.0, 2.0, 5)
        s = apply_update(s, cfg, r / r.max(), log_scale=np.log(r.max()))
        assert is_simplex(s.weights)


@pytest.mark.parametrize("algorithm", ALL)
def test_log_scale_bookkeeping(algorithm):
    rng = np.random.default_rng(3)
    cfg = StackerConfig(algorithm)
    a, b = init_state(3), init_state(3)
    for _ in range(20):
        r = rng.lognormal(size=3)
        a = apply_update(a, cfg, r)
        b = apply_update(b, cfg, r / 7.0, log_scale=np.log(7.0))
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)
    assert a.cum_log_wealth == pytest.approx(b.cum_log_wealth, abs=1e-10)


def test_update_rejects_bad_densities():
    with pytest.raises(InvalidInputError):
        obma_update(init_state(2), [0.0, 1.0])
    with pytest.raises(InvalidInputError):
        eg_update(init_state(2), [np.nan, 1.0], 0.1)
    with pytest.raises(InvalidInputError):
        hedge_update(init_state(2), [1.0, 1.0, 1.0], 1.0)


@pytest.mark.parametrize("kwargs", [
    {"algorithm": "Nope"}, {"algorithm": "EG", "learning_rate": 0.0},
    {"algorithm": "SoftBayes", "learning_rate": 1.0}, {"algorithm": "ONS", "ons_delta": 0.0},
    {"algorithm": "ONS", "ons_beta": -1.0}, {"algorithm": "DMA", "dma_forget": 1.5},
    {"algorithm": "DONS", "dons_forget": 0.0}, {"algorithm": "SmoothedEG", "eg_smooth": 1.0},
    {"algorithm": "OBMA", "density_floor": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidInputError):
        StackerConfig(**kwargs)


def test_config_defaults():
    assert StackerConfig("EG").eta == 1e-2
    assert StackerConfig("SmoothedEG").eta == 1e-3
    assert StackerConfig("ONS").eta == 1e-2 and StackerConfig("ONS").ons_delta == 0.8
    assert StackerConfig("DONS").eta == 1.0 and StackerConfig("DONS").dons_forget == 0.99
    assert StackerConfig("DMA").dma_forget == 0.99
    assert StackerConfig("SoftBayes").eta is None
    assert StackerConfig("SoftBayes").params()["schedule"] == "log(K)/(2Kt)"


def test_run_stacker_matches_pure_python_bayes():
    rng = np.random.default_rng(2)
    L = rng.normal(0.0, 2.0, (50, 4))
    tr = run_stacker(StackerConfig("OBMA"), L)
    ref = obma_weights(np.exp(L))
    np.testing.assert_allclose(tr.weights, ref[:-1], atol=1e-12)
    np.testing.assert_allclose(tr.final_weights, ref[-1], atol=1e-12)
    np.testing.assert_allclose(tr.log_ens, np.log(np.sum(ref[:-1] * np.exp(L), axis=1)), atol=1e-12)
    np.testing.assert_allclose(tr.avg_pll(), np.cumsum(tr.log_ens) / np.arange(1, 51))


def test_run_stacker_survives_extreme_log_densities():
    # Raw densities exp(-2000) underflow, but only ratios enter the updates.
    L = np.array([[-2000.0, -2001.0], [-3000.0, -2999.0]] * 10)
    tr = run_stacker(StackerConfig("EG"), L)
    assert tr.ok and np.all(np.isfinite(tr.log_ens))
    assert tr.log_ens[0] == pytest.approx(-2000.0 + np.log(0.5 + 0.5 * np.exp(-1.0)))


def test_run_stacker_failure_is_recorded():
    L = np.array([[0.0, -1.0], [-np.inf, -np.inf], [0.0, 0.0]])
    tr = run_stacker(StackerConfig("EG"), L)
    assert not tr.ok and tr.error_step == 2
    assert np.isnan(tr.log_ens[1:]).all() and np.isfinite(tr.log_ens[0])


def test_initial_weights_are_respected():
    tr = run_stacker(StackerConfig("OBMA", initial_weights=(0.9, 0.1)), np.zeros((3, 2)))
    np.testing.assert_allclose(tr.weights[0], [0.9, 0.1])
    with pytest.raises(InvalidInputError):
        run_stacker(StackerConfig("OBMA", initial_weights=(0.5, 0.5)), np.zeros((3, 3)))
