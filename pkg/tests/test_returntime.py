import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from conftest import central_fd, complete_graph, random_chain, random_weighted, rel_err, two_cycle
from patrolchain import kernels
from patrolchain.chaincore import stationary_distribution
from patrolchain.entropy import entropy_rate
from patrolchain.graphmodel import SurveillanceGraph, make_grid, sf_dataset, uniform_pi
from patrolchain.optimize import FeasibleSpec
from patrolchain.returntime import (
    quantize_weights,
    return_time_distribution,
    return_time_entropy,
    return_time_entropy_gradient,
    tail_horizon,
    truncation_horizon,
)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_quantize_examples():
    assert quantize_weights(np.array([[2.4]]))[0, 0] == 2
    assert quantize_weights(np.array([[0.3]]))[0, 0] == 1
    w = quantize_weights(np.array([[0.0, 7.6], [3.0, 0.0]]), unit=2.0)
    np.testing.assert_array_equal(w, [[0, 4], [2, 0]])
    g, _ = sf_dataset()
    np.testing.assert_array_equal(quantize_weights(g.weights.astype(float)), g.weights)
    with pytest.raises(ValueError):
        quantize_weights(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        quantize_weights(np.array([[1.0]]), unit=0)


def test_two_cycle_period_two():
    s = return_time_distribution(SWAP, two_cycle(), 10)
    expected = np.zeros(10)
    expected[1] = 1.0
    np.testing.assert_array_equal(s.returns(0), expected)
    assert s.tail_bound[0] == 0.0


def test_weighted_two_cycle_tour():
    s = return_time_distribution(SWAP, two_cycle(2, 3), 12)
    assert s.f[4, 0, 0] == 1.0
    assert s.f[:, 0, 0].sum() == 1.0
    assert s.f[1, 0, 1] == 1.0  # 0 -> 1 takes 2 units


@pytest.mark.parametrize("pi", [np.array([0.5, 0.5]), np.array([0.1, 0.2, 0.3, 0.4]), np.full(6, 1 / 6)])
def test_geometric_return_law(pi):
    n = pi.size
    p = np.outer(np.ones(n), pi)
    s = return_time_distribution(p, complete_graph(n), 200)
    k = np.arange(1, 201)
    for i in range(n):
        exact = pi[i] * (1 - pi[i]) ** (k - 1)
        assert np.max(np.abs(s.returns(i) - exact)) <= 1e-12


def test_truncation_horizon_examples():
    g, pi = sf_dataset()
    assert truncation_horizon(g, pi, 0.1) == 2292
    grid = make_grid(3, 3)
    assert truncation_horizon(grid, uniform_pi(grid), 0.1) == 90
    for n in (2, 5, 12):
        c = complete_graph(n)
        assert truncation_horizon(c, uniform_pi(c), 1.0) == n
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            truncation_horizon(grid, uniform_pi(grid), bad)


def test_entropy_small_cases():
    assert return_time_entropy(SWAP, two_cycle(), [0.5, 0.5], 50) == 0.0
    p = np.full((2, 2), 0.5)
    value = return_time_entropy(p, complete_graph(2), [0.5, 0.5], 200)
    assert value == pytest.approx(2 * np.log(2), abs=1e-12)


def test_entropy_guards():
    with pytest.raises(ValueError):
        return_time_entropy(SWAP, two_cycle(), [0.7, 0.3], 10)
    with pytest.raises(ValueError):
        return_time_distribution(SWAP, two_cycle(), 0)
    g = SurveillanceGraph(np.array([[0, 1], [1, 1]]))
    with pytest.raises(ValueError):
        return_time_distribution(np.full((2, 2), 0.5), g, 5)


def test_distribution_invariants(rng):
    for _ in range(30):
        n = int(rng.integers(2, 7))
        p, g = random_weighted(rng, n, density=0.5, wmax=4)
        s = return_time_distribution(p, g, 80)
        total = s.f.sum(axis=0)
        assert np.all(total <= 1 + 1e-12) and np.all(s.f >= 0)
        dist = shortest_path(g.weights.astype(float))
        k = np.arange(1, 81)[:, None, None]
        early = k < dist[None, :, :]
        assert np.all(s.f[early] == 0)


def test_mass_converges_when_horizon_doubles(rng):
    p, g = random_weighted(rng, 5, density=0.6, wmax=3)
    horizons = [16 * 2**k for k in range(9)]
    missing = [1 - np.min(return_time_distribution(p, g, N).f.sum(axis=0).diagonal()) for N in horizons]
    assert all(b <= a for a, b in zip(missing, missing[1:]))
    assert missing[-1] < 1e-6
    slope = np.polyfit(horizons[:5], np.log(missing[:5]), 1)[0]
    assert slope < 0


def test_markov_tail_control(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        p, g = random_weighted(rng, n, density=0.6, wmax=5)
        pi = stationary_distribution(p)
        for eta in (0.5, 0.1):
            N = truncation_horizon(g, pi, eta)
            s = return_time_distribution(p, g, N)
            assert np.all(s.tail_bound <= eta)


def _entropy_fixed_pi(g, pi, N):
    w = np.ascontiguousarray(g.weights)
    return lambda q: kernels.rt_entropy(np.ascontiguousarray(q), w, pi, N)[0]


def test_gradient_three_nodes_fd(rng):
    p = random_chain(rng, 3, density=1.0, self_loops=True)
    g = complete_graph(3)
    pi = stationary_distribution(p)
    eg = return_time_entropy_gradient(p, g, pi, 60)
    fd = central_fd(_entropy_fixed_pi(g, pi, 60), p, g.adjacency)
    assert rel_err(eg.grad, fd) <= 1e-4
    assert eg.value == pytest.approx(return_time_entropy(p, g, pi, 60), rel=1e-13)


def test_gradient_weighted_fd(rng):
    for _ in range(5):
        n = int(rng.integers(3, 6))
        p, g = random_weighted(rng, n, density=0.6, wmax=4)
        pi = stationary_distribution(p)
        eg = return_time_entropy_gradient(p, g, pi, 70)
        fd = central_fd(_entropy_fixed_pi(g, pi, 70), p, g.adjacency)
        assert rel_err(eg.grad, fd) <= 1e-4
        assert np.all(eg.grad[~g.adjacency] == 0)


def test_gradient_two_cycle_tangent_is_zero():
    g = two_cycle()
    eg = return_time_entropy_gradient(SWAP, g, [0.5, 0.5], 20)
    spec = FeasibleSpec(g, np.array([0.5, 0.5]))
    assert np.allclose(spec.proj @ spec.to_vector(eg.grad), 0.0, atol=1e-12)


def test_gradient_vanishes_on_tangent_at_rank_one():
    n = 4
    g = complete_graph(n)
    pi = uniform_pi(g)
    p = np.outer(np.ones(n), pi)
    eg = return_time_entropy_gradient(p, g, pi, 200)
    spec = FeasibleSpec(g, pi)
    assert np.linalg.norm(spec.proj @ spec.to_vector(eg.grad)) <= 1e-6


def test_sandwich_bounds(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        p = random_chain(rng, n, density=rng.uniform(0.3, 1.0), self_loops=bool(rng.integers(2)))
        g = SurveillanceGraph((p > 0).astype(np.int64))
        pi = stationary_distribution(p)
        N = tail_horizon(p, g, 1e-6)
        h_rate = entropy_rate(p, pi)
        h_ret = return_time_entropy(p, g, pi, N)
        assert h_rate <= h_ret + 1e-6
        assert h_ret <= n * h_rate + 1e-6
