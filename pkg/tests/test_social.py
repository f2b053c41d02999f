import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beliefgraph import (
    BeliefState,
    adapt_step,
    combine_step,
    estimate_state_agent,
    estimate_states,
    generate_erdos_renyi,
    generate_model,
    initial_state,
    log_belief_matrix,
    log_likelihood_ratio_matrix,
    majority_vote,
    recursion_reference,
    sample_observations,
    step,
)
from beliefgraph.likelihoods import LogRatioMatrix, ObservationBatch
from beliefgraph.ogl import run_online

from conftest import make_matrix, make_model


def uniform_state(n, theta_count, matrix):
    return initial_state(n, theta_count, matrix)


def test_adapt_uninformative_likelihoods_keep_uniform():
    betas = np.tile(np.array([[0.6], [0.4]]), (1, 1, 3)).reshape(1, 2, 3)
    model = make_model(betas)
    state = uniform_state(1, 3, make_matrix([[1.0]]))
    psi = adapt_step(state, model, ObservationBatch(1, np.array([0])), 0.3)
    assert np.allclose(psi, 1.0 / 3.0, atol=1e-15)


def test_adapt_delta_near_one_follows_likelihood():
    model = make_model([[[0.7, 0.2], [0.3, 0.8]]])
    mu = np.array([[0.99, 0.01]])
    state = BeliefState(mu=mu, psi=mu, time=0)
    psi = adapt_step(state, model, ObservationBatch(1, np.array([0])), 1.0 - 1e-12)
    assert np.allclose(psi[0], [0.7 / 0.9, 0.2 / 0.9], atol=1e-9)


def test_adapt_hand_value():
    # direct evaluation oracle for one agent, two hypotheses
    model = make_model([[[0.7, 0.5], [0.3, 0.5]]])
    mu = np.array([[0.5, 0.5]])
    state = BeliefState(mu=mu, psi=mu, time=0)
    psi = adapt_step(state, model, ObservationBatch(1, np.array([0])), 0.1)
    p0 = 0.7**0.1 * 0.5**0.9
    p1 = 0.5**0.1 * 0.5**0.9
    assert psi[0, 0] == pytest.approx(p0 / (p0 + p1), rel=1e-12)
    assert psi[0, 0] / psi[0, 1] == pytest.approx(1.4**0.1, rel=1e-12)
    assert np.allclose(psi[0], [0.50841, 0.49159], atol=2e-5)


def test_combine_identity_is_noop():
    psi = np.array([[0.7, 0.3], [0.2, 0.8]])
    out = combine_step(psi, make_matrix(np.eye(2)))
    assert np.allclose(out, psi, atol=1e-15)


def test_combine_identical_rows_fixed_point():
    psi = np.tile(np.array([0.5, 0.3, 0.2]), (4, 1))
    m = generate_erdos_renyi(4, 0.6, seed=0)
    out = combine_step(psi, m)
    assert np.allclose(out, psi, atol=1e-14)


def test_combine_geometric_mean_hand_value():
    # agent 2 weighs itself and agent 1 equally: geometric mean
    w = np.array([[1.0, 0.5], [0.0, 0.5]])
    psi = np.array([[0.8, 0.2], [0.2, 0.8]])
    out = combine_step(psi, make_matrix(w))
    assert np.allclose(out[1], [0.5, 0.5], atol=1e-12)


def test_step_is_sample_adapt_combine():
    m = generate_erdos_renyi(5, 0.5, seed=3)
    model = generate_model(5, 3, 2, seed=4)
    state = uniform_state(5, 3, m)
    new_state, batch = step(state, model, m, 0, 0.2, np.random.default_rng(9))
    expected_batch = sample_observations(model, 0, np.random.default_rng(9), time=1)
    assert np.array_equal(batch.symbols, expected_batch.symbols)
    psi = adapt_step(state, model, batch, 0.2)
    assert np.allclose(new_state.psi, psi, atol=1e-15)
    assert np.allclose(new_state.mu, combine_step(psi, m), atol=1e-15)
    assert new_state.time == 1


def test_step_rows_stay_normalized():
    m = generate_erdos_renyi(4, 0.5, seed=1)
    model = generate_model(4, 3, 2, seed=2)
    state = uniform_state(4, 3, m)
    rng = np.random.default_rng(5)
    for _ in range(300):
        state, _ = step(state, model, m, 0, 0.1, rng)
        assert np.allclose(state.mu.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(state.psi.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(state.mu > 0) and np.all(state.psi > 0)


def test_steady_state_estimates_track_truth():
    # simulation oracle: with sharply informative likelihoods the belief
    # argmax matches the true state for every agent in nearly every step
    m = generate_erdos_renyi(30, 0.2, seed=7)
    model = generate_model(30, 10, 2, epsilon=0.05, seed=3)
    res = run_online(
        m, model, 0, 1500, 0.1, 0.0, seed=11,
        learn=False, record_beliefs=True, record_mu=True,
    )
    window = res.beliefs.mu[499:1500]
    correct = (np.argmax(window, axis=2) == 0).all(axis=1)
    assert correct.mean() >= 0.99


def test_log_belief_matrix_uniform_zero():
    m = make_matrix(np.eye(3))
    state = uniform_state(3, 4, m)
    assert np.array_equal(log_belief_matrix(state).values, np.zeros((3, 3)))


def test_log_belief_matrix_hand_value():
    psi = np.array([[0.5, 0.25, 0.25]])
    state = BeliefState(mu=psi, psi=psi, time=0)
    lam = log_belief_matrix(state)
    assert np.allclose(lam.values[0], [math.log(2), math.log(2)], atol=1e-14)


def test_log_belief_matrix_sign():
    rng = np.random.default_rng(3)
    psi = rng.dirichlet(np.ones(4), size=5)
    state = BeliefState(mu=psi, psi=psi, time=0)
    lam = log_belief_matrix(state).values
    for k in range(5):
        for j, theta in enumerate((1, 2, 3)):
            assert (lam[k, j] > 0) == (psi[k, 0] > psi[k, theta])


def test_recursion_identity_trivials():
    m = make_matrix(np.eye(3))
    values = np.random.default_rng(0).standard_normal((3, 2))
    mat = LogRatioMatrix(values, kind="belief")
    out = recursion_reference(mat, m, LogRatioMatrix(values), 0.5)
    assert np.allclose(out.values, values, atol=1e-15)
    zero = LogRatioMatrix(np.zeros((3, 2)), kind="belief")
    out = recursion_reference(zero, m, LogRatioMatrix(values), 0.3)
    assert np.allclose(out.values, 0.3 * values, atol=1e-15)


def test_recursion_identity_against_engine():
    # the engine itself validates the log-ratio recursion step by step
    m = generate_erdos_renyi(6, 0.4, seed=8)
    model = generate_model(6, 4, 3, seed=9)
    state = uniform_state(6, 4, m)
    rng = np.random.default_rng(10)
    lam = log_belief_matrix(state)
    for _ in range(100):
        state, batch = step(state, model, m, 0, 0.25, rng)
        lr = log_likelihood_ratio_matrix(model, batch)
        predicted = recursion_reference(lam, m, lr, 0.25)
        lam = log_belief_matrix(state)
        assert np.max(np.abs(predicted.values - lam.values)) <= 1e-10


def test_dimension_mismatch_rejected():
    m = make_matrix(np.eye(3))
    a = LogRatioMatrix(np.zeros((3, 2)), kind="belief")
    b = LogRatioMatrix(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        recursion_reference(a, m, b, 0.5)


def test_lemma1_envelope_small_run():
    # elementwise bound from iterating the envelope recurrence alongside
    m = generate_erdos_renyi(5, 0.5, seed=14)
    model = generate_model(5, 3, 2, epsilon=0.1, seed=15)
    b = model.log_ratio_bound
    delta = 0.2
    state = uniform_state(5, 3, m)
    rng = np.random.default_rng(16)
    envelope = np.zeros((5, 2))  # uniform start: log-ratio matrix is zero
    for _ in range(300):
        state, _ = step(state, model, m, 0, delta, rng)
        envelope = (1 - delta) * (m.weights.T @ envelope) + delta * b
        lam = np.abs(log_belief_matrix(state).values)
        assert np.all(lam <= envelope + 1e-12)


def test_estimate_state_agent():
    psi = np.array([[0.6, 0.4], [0.5, 0.5]])
    state = BeliefState(mu=psi, psi=psi, time=0)
    assert estimate_state_agent(state, 0) == 0
    assert estimate_state_agent(state, 1) == 0  # exact tie: lowest index
    assert np.array_equal(estimate_states(state), [0, 0])


def test_majority_vote_rules():
    assert majority_vote([1, 1, 2]) == 1
    assert majority_vote([2, 0, 1]) == 0
    votes = [0] * 16 + [1] * 7 + [2] * 7
    assert majority_vote(votes) == 0


@given(
    seed=st.integers(min_value=0, max_value=1000),
    delta=st.floats(min_value=0.05, max_value=0.9),
)
def test_belief_rows_normalized_property(seed, delta):
    m = generate_erdos_renyi(4, 0.5, seed=seed % 7)
    model = generate_model(4, 3, 2, seed=seed % 5)
    state = uniform_state(4, 3, m)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        state, _ = step(state, model, m, 0, delta, rng)
    assert np.allclose(state.mu.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(state.psi.sum(axis=1), 1.0, atol=1e-12)
