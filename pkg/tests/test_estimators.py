from __future__ import annotations

import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsgd.circuits import EncodingCircuit, ParamCircuit, build_sigma_block_ansatz
from dsgd.estimators import (EpochBatcher, EstimatorConfig, GradientEstimate, PolynomialEstimator, Regularizer,
                             add_regularizer, draw_batch, estimate_mse, estimate_vqe, estimate_vqe_doubly,
                             estimate_vqe_full, estimate_vqe_term_sampled, mse_cost, plugin_estimate, u_statistic,
                             vqe_cost)
from dsgd.gradients import derive_shift_rule, exact_gradient
from dsgd.rng import RngStream
from dsgd.simcore import PauliObservable, rx
from dsgd.tasks.tfim import tfim_hamiltonian

CONFIGS = {
    "full": EstimatorConfig(1),
    "term": EstimatorConfig(1, "uniform-term"),
    "group": EstimatorConfig(2, "uniform-group"),
    "doubly": EstimatorConfig(1, "uniform-term", "uniform"),
    "doubly-importance": EstimatorConfig(1, "uniform-group", "uniform", "importance"),
}


@pytest.fixture(scope="module")
def tfim2():
    c = build_sigma_block_ansatz(2, 2)
    return c, tfim_hamiltonian(2), np.random.default_rng(7).uniform(0, 2 * np.pi, c.num_params)


def z_scores(draws, exact):
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    return np.abs(draws.mean(axis=0) - exact) / np.where(se > 0, se, 1.0)


def test_config_validation():
    for bad in (dict(shots=0), dict(hamiltonian_sampling="all"), dict(shift_sampling="x"),
                dict(weighting="w"), dict(batch_size=0), dict(batch_mode="m")):
        with pytest.raises(ValueError):
            EstimatorConfig(**bad)
    assert EstimatorConfig(None).exact
    assert EstimatorConfig(1).kind == "full"
    assert EstimatorConfig(1, "uniform-term").kind == "term-sampled"
    assert EstimatorConfig(1, "uniform-term", "uniform").kind == "doubly"


@pytest.mark.parametrize("name", list(CONFIGS))
def test_vqe_estimators_unbiased(name, tfim2):
    c, H, theta = tfim2
    exact = exact_gradient(c, H, theta)
    est = estimate_vqe(c, H, theta, CONFIGS[name], RngStream(11), size=20_000)
    assert est.values.shape == (20_000, c.num_params)
    assert np.all(z_scores(est.values, exact) < 5)


def test_exact_full_estimator_equals_gradient(tfim2):
    c, H, theta = tfim2
    est = estimate_vqe(c, H, theta, EstimatorConfig(None), RngStream(0))
    np.testing.assert_allclose(est.values, exact_gradient(c, H, theta), atol=1e-12)
    assert est.measurements_used == 0


def test_many_shots_approach_exact(tfim2):
    c, H, theta = tfim2
    est = estimate_vqe(c, H, theta, EstimatorConfig(10_000), RngStream(3), size=50)
    assert np.all(z_scores(est.values, exact_gradient(c, H, theta)) < 5)
    assert np.all(est.values.std(axis=0) < 0.05)


def test_estimators_reject_wrong_kind(tfim2):
    c, H, theta = tfim2
    with pytest.raises(ValueError):
        estimate_vqe_full(c, H, theta, CONFIGS["term"], 0)
    with pytest.raises(ValueError):
        estimate_vqe_term_sampled(c, H, theta, CONFIGS["full"], 0)
    with pytest.raises(ValueError):
        estimate_vqe_doubly(c, H, theta, EstimatorConfig(1, "none", "uniform"), 0)
    with pytest.raises(ValueError):
        estimate_vqe(c, PauliObservable(), theta, CONFIGS["full"], 0)


def test_same_stream_same_draw(tfim2):
    c, H, theta = tfim2
    a = estimate_vqe(c, H, theta, CONFIGS["doubly"], RngStream(5, ("run",)))
    b = estimate_vqe(c, H, theta, CONFIGS["doubly"], RngStream(5, ("run",)))
    other = estimate_vqe(c, H, theta, CONFIGS["doubly"], RngStream(6, ("run",)), size=20)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.all(other.values == a.values)
    assert a.streams["shots"] == (5, ("run", "shots"))


def test_vqe_cost_ledger(tfim2):
    c, H, _ = tfim2
    rule = derive_shift_rule(c)
    d, K, M, n = c.num_params, 2, len(H), 3
    assert vqe_cost(rule, M, EstimatorConfig(n)) == (d * K * M * n, d * K)
    assert vqe_cost(rule, M, EstimatorConfig(n, "uniform-term")) == (d * K * n, d * K)
    assert vqe_cost(rule, M, EstimatorConfig(n, "uniform-term", "uniform")) == (d * n, d)
    assert vqe_cost(rule, M, EstimatorConfig(None)) == (0, d * K)
    est = estimate_vqe(c, H, np.zeros(d), EstimatorConfig(n, "uniform-group"), 0)
    assert (est.measurements_used, est.circuits_executed) == (d * K * n, d * K)


# -- MSE --------------------------------------------------------------------------------


def toy_regression():
    model = EncodingCircuit(ParamCircuit(1, [rx(0, 0)]))
    data = (np.array([[1.0, 0.0]]), np.array([0.5]))
    return model, PauliObservable.single("Z0"), data


@pytest.mark.parametrize("config", [EstimatorConfig(1), EstimatorConfig(3, shift_sampling="uniform")])
def test_mse_toy_matches_closed_form(config):
    model, obs, data = toy_regression()
    theta = np.array([0.9])
    exact = 2 * (np.cos(0.9) - 0.5) * (-np.sin(0.9))
    est = estimate_mse(model, obs, theta, data, config, RngStream(2), size=40_000)
    assert z_scores(est.values, exact)[0] < 5
    assert (est.measurements_used, est.circuits_executed) == mse_cost(derive_shift_rule(model.circuit), 1, config)


def test_mse_exact_matches_batch_gradient(rng):
    c = build_sigma_block_ansatz(2, 2)
    model = EncodingCircuit(c)
    obs = PauliObservable.single("Z0")
    x = rng.normal(size=(6, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = rng.choice([-1.0, 1.0], 6)
    theta = rng.uniform(0, 2 * np.pi, c.num_params)
    est = estimate_mse(model, obs, theta, (x, y), EstimatorConfig(None, batch_size=6), 0, batch=np.arange(6))
    expected = np.zeros(c.num_params)
    for xi, yi in zip(x, y):
        e = float(np.real(np.vdot(s := model.states(theta, xi[None])[0], np.diag([1, -1, 1, -1]) @ s)))
        expected += 2 * (e - yi) * exact_gradient(c, obs, theta, initial=xi) / 6
    np.testing.assert_allclose(est.values, expected, atol=1e-12)


def test_mse_unbiased_over_random_batches(rng):
    c = build_sigma_block_ansatz(2, 1)
    model = EncodingCircuit(c)
    obs = PauliObservable.single("Z0")
    x = rng.normal(size=(5, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = rng.choice([-1.0, 1.0], 5)
    theta = rng.uniform(0, 2 * np.pi, c.num_params)
    full = estimate_mse(model, obs, theta, (x, y), EstimatorConfig(None, batch_size=5), 0, batch=np.arange(5)).values
    est = estimate_mse(model, obs, theta, (x, y), EstimatorConfig(1, batch_size=2), RngStream(4), size=40_000)
    assert np.all(z_scores(est.values, full) < 5)


def test_mse_cost_ledger():
    rule = derive_shift_rule(build_sigma_block_ansatz(2, 1))
    assert mse_cost(rule, 1, EstimatorConfig(4, batch_size=3)) == (3 * 2 * 3 * 4, 3 * 2 * 3)
    assert mse_cost(rule, 1, EstimatorConfig(4, shift_sampling="uniform", batch_size=3)) == (3 * 2 * 2 * 4, 3 * 2 * 2)


def test_mse_rejects_term_sampling():
    model, obs, data = toy_regression()
    with pytest.raises(ValueError):
        estimate_mse(model, obs, np.zeros(1), data, EstimatorConfig(1, "uniform-term"), 0)


def test_batchers():
    b = draw_batch(10, 3, RngStream(1), size=4)
    assert b.shape == (4, 3) and b.min() >= 0 and b.max() < 10
    with pytest.raises(ValueError):
        draw_batch(2, 3, 0)
    walker = EpochBatcher(7, 3, RngStream(2))
    assert walker.batches_per_epoch == 3
    epoch = np.concatenate([walker.batch(t) for t in range(3)])
    assert sorted(epoch) == list(range(7))
    np.testing.assert_array_equal(walker.batch(1), EpochBatcher(7, 3, RngStream(2)).batch(1))


# -- regularizer --------------------------------------------------------------------------


def test_regularizer():
    reg = Regularizer(0.1)
    np.testing.assert_allclose(reg.gradient([1.0, -2.0]), [0.2, -0.4])
    assert reg.value([1.0, -2.0]) == pytest.approx(0.5)
    est = GradientEstimate(np.array([1.0, 1.0]), 4, 2)
    out = add_regularizer(est, reg, np.array([1.0, -2.0]))
    np.testing.assert_allclose(out.values, [1.2, 0.6])
    assert (out.measurements_used, out.circuits_executed) == (4, 2)
    with pytest.raises(ValueError):
        Regularizer(-1.0)


# -- U-statistics -------------------------------------------------------------------------


def brute_force_u(coeffs, samples):
    """Average of h over every ordered arrangement of the samples."""
    total = 0.0
    perms = list(itertools.permutations(samples))
    for p in perms:
        h, prod = coeffs[0], 1.0
        for j, a in enumerate(coeffs[1:], 1):
            prod *= p[j - 1]
            h += a * prod
        total += h
    return total / factorial(len(samples))


def test_u_statistic_square_two_samples():
    assert u_statistic(PolynomialEstimator((0, 0, 1), 2), [0.3, 0.7]) == pytest.approx(0.21)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.lists(st.floats(-2, 2), min_size=4, max_size=5))
def test_u_statistic_matches_permutation_average(coeffs, samples):
    m = len(samples)
    poly = PolynomialEstimator(tuple(coeffs), m)
    assert u_statistic(poly, samples) == pytest.approx(brute_force_u(coeffs, samples), abs=1e-9)
    assert u_statistic(poly, samples[::-1]) == u_statistic(poly, samples)


def test_u_statistic_unbiased_where_plugin_is_not():
    poly = PolynomialEstimator((0, 0, 1), 2)
    gen = np.random.default_rng(0)
    samples = gen.choice([-1.0, 1.0], size=(50_000, 2))
    u = u_statistic(poly, samples)
    assert abs(u.mean()) < 5 * u.std() / np.sqrt(u.size)
    assert plugin_estimate(poly, samples).mean() > 0.4


def test_polynomial_estimator_validation():
    with pytest.raises(ValueError):
        PolynomialEstimator((0, 0, 1), 1)
    with pytest.raises(ValueError):
        PolynomialEstimator((), 2)
    with pytest.raises(ValueError):
        u_statistic(PolynomialEstimator((0, 1), 2), [1.0, 2.0, 3.0])
