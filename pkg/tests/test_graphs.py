import numpy as np
import pytest
from hypothesis import given, strategies as st

from beliefgraph import (
    CombinationMatrix,
    generate_erdos_renyi,
    is_strongly_connected,
    load_graph,
    perturb_edges,
    regenerate_edges,
    save_graph,
    spectral_profile,
)
from beliefgraph.graphs import ConnectivityError

from conftest import make_matrix


# ---------------------------------------------------------------------------
# Independent oracle: all-pairs reachability by depth-first search
# ---------------------------------------------------------------------------

def dfs_strongly_connected(support):
    n = support.shape[0]
    for start in range(n):
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in range(n):
                if support[node, nxt] and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != n:
            return False
    return True


def test_generate_reference_size():
    m = generate_erdos_renyi(30, 0.2, seed=7)
    assert m.n == 30
    assert np.all(m.weights >= 0.0) and np.all(m.weights <= 1.0)
    assert np.allclose(m.weights.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(m.weights.diagonal() > 0)
    assert dfs_strongly_connected(m.support)


def test_generate_two_agents_dense_limit():
    m = generate_erdos_renyi(2, 0.999, seed=0)
    assert np.all(m.weights > 0)
    assert np.allclose(m.weights.sum(axis=0), 1.0, atol=1e-12)


def test_generate_deterministic():
    a = generate_erdos_renyi(5, 0.5, seed=1)
    b = generate_erdos_renyi(5, 0.5, seed=1)
    assert np.array_equal(a.weights, b.weights)


def test_generate_connectivity_budget():
    with pytest.raises(ConnectivityError):
        generate_erdos_renyi(4, 1e-12, seed=0, max_attempts=5)


def test_uniform_weight_rule():
    m = generate_erdos_renyi(10, 0.4, seed=3)
    counts = m.support.sum(axis=0)
    for k in range(10):
        col = m.weights[:, k]
        assert np.all(col[m.support[:, k]] == 1.0 / counts[k])


def test_strong_connectivity_identity_false():
    assert not is_strongly_connected(make_matrix(np.eye(3)))


def test_strong_connectivity_cycle_true():
    # directed 3-cycle 0->1->2->0 with a self-loop at node 1
    w = np.array(
        [
            [0.0, 0.5, 0.0],
            [0.0, 0.5, 1.0],
            [1.0, 0.0, 0.0],
        ]
    )
    assert is_strongly_connected(make_matrix(w))


def test_strong_connectivity_matches_dfs_oracle():
    for seed in range(20):
        m = generate_erdos_renyi(8, 0.25, seed=seed)
        assert is_strongly_connected(m) == dfs_strongly_connected(m.support)


def test_spectral_doubly_stochastic_uniform_perron():
    m = make_matrix(np.full((4, 4), 0.25))
    prof = spectral_profile(m)
    assert np.allclose(prof.perron, 0.25, atol=1e-10)


def test_spectral_positive_perron():
    m = generate_erdos_renyi(12, 0.3, seed=9)
    prof = spectral_profile(m)
    assert np.all(prof.perron > 0)
    assert abs(prof.perron.sum() - 1.0) < 1e-10
    assert np.max(np.abs(m.weights @ prof.perron - prof.perron)) < 1e-10
    assert 0.0 <= prof.beta2 < prof.beta < 1.0


def test_spectral_envelope_reference_graph():
    # direct matrix powering oracle for the fitted envelope
    m = generate_erdos_renyi(30, 0.2, seed=7)
    prof = spectral_profile(m)
    power = np.eye(30)
    for t in range(1, 201):
        power = power @ m.weights
        gap = np.max(np.abs(power - prof.perron[:, None]))
        assert gap <= prof.sigma * prof.beta**t * (1 + 1e-9)


def test_perturb_zero_flip_is_identity():
    m = generate_erdos_renyi(12, 0.3, seed=2)
    out = perturb_edges(m, 0.0, seed=5)
    assert np.array_equal(out.weights, m.weights)


def test_perturb_expected_flip_count():
    # Monte Carlo oracle: 870 off-diagonal bits, flip probability 0.005,
    # expectation 4.35 before connectivity resampling (conditioning bias
    # is far below the +-10% band for this dense graph)
    m = generate_erdos_renyi(30, 0.2, seed=7)
    off_diag = ~np.eye(30, dtype=bool)
    flips = 0
    draws = 10_000
    for seed in range(draws):
        out = perturb_edges(m, 0.005, seed=seed)
        flips += int((out.support ^ m.support)[off_diag].sum())
    mean = flips / draws
    assert abs(mean - 4.35) <= 0.435


def test_perturb_stays_connected():
    m = generate_erdos_renyi(10, 0.3, seed=4)
    for seed in range(30):
        out = perturb_edges(m, 0.2, seed=seed)
        assert is_strongly_connected(out)
        assert np.all(out.weights.diagonal() > 0)


def test_regenerate_deterministic_and_fresh():
    m = generate_erdos_renyi(30, 0.2, seed=7)
    a = regenerate_edges(m, 0.2, seed=100)
    b = regenerate_edges(m, 0.2, seed=100)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.support, m.support)


def test_regenerate_small():
    m = generate_erdos_renyi(2, 0.9, seed=0)
    out = regenerate_edges(m, 0.9, seed=1)
    assert np.allclose(out.weights.sum(axis=0), 1.0, atol=1e-12)


def test_graph_roundtrip_bit_exact(tmp_path):
    m = generate_erdos_renyi(9, 0.35, seed=11)
    path = tmp_path / "graph.json"
    save_graph(path, m, seed=11)
    rec = load_graph(path)
    assert rec.n == 9
    assert rec.seed == 11
    assert not rec.learned
    assert np.array_equal(rec.weights, m.weights)
    assert np.array_equal(rec.adjacency, m.support.astype(int))
    assert np.array_equal(rec.to_combination_matrix().weights, m.weights)


def test_graph_roundtrip_learned_flag(tmp_path):
    est = np.random.default_rng(0).standard_normal((4, 4))
    path = tmp_path / "learned.json"
    save_graph(path, est, learned=True)
    rec = load_graph(path)
    assert rec.learned
    assert np.array_equal(rec.weights, est)
    with pytest.raises(ValueError):
        rec.to_combination_matrix()


def test_combination_matrix_validation():
    with pytest.raises(ValueError):
        CombinationMatrix(2, np.array([[0.5, 0.2], [0.4, 0.8]]))
    with pytest.raises(ValueError):
        CombinationMatrix(2, np.array([[1.2, 0.0], [-0.2, 1.0]]))


@given(
    n=st.integers(min_value=2, max_value=10),
    p=st.floats(min_value=0.25, max_value=0.9),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_generator_invariants(n, p, seed):
    m = generate_erdos_renyi(n, p, seed=seed)
    assert np.all(m.weights >= 0.0) and np.all(m.weights <= 1.0)
    assert np.allclose(m.weights.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(m.weights.diagonal() > 0)
    assert dfs_strongly_connected(m.support)
