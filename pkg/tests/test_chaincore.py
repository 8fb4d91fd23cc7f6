import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complete_graph, random_chain, random_pi, random_symmetric_graph
from patrolchain.chaincore import (
    ReducibleChainError,
    is_irreducible,
    is_reversible,
    metropolis_hastings,
    random_walk,
    stationary_distribution,
    validate,
)
from patrolchain.graphmodel import SurveillanceGraph, make_grid

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_identity_is_reducible():
    g = complete_graph(2)
    rep = validate(np.eye(2), g)
    assert rep.row_stochastic and rep.support_ok
    assert not rep.irreducible and not rep.ok


def test_swap_all_flags():
    rep = validate(SWAP, complete_graph(2), np.array([0.5, 0.5]))
    assert rep.row_stochastic and rep.support_ok and rep.irreducible
    assert rep.stationary_ok and rep.reversible and rep.ok


def test_short_row_violation():
    p = np.array([[0.5, 0.499], [0.5, 0.5]])
    rep = validate(p)
    assert not rep.row_stochastic
    assert rep.max_violation == pytest.approx(1e-3, rel=1e-6)


def test_off_support_entries_flagged():
    g = SurveillanceGraph(np.array([[0, 1], [1, 1]]))
    rep = validate(np.array([[0.5, 0.5], [0.5, 0.5]]), g)
    assert not rep.support_ok


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        validate(np.eye(3), complete_graph(2))
    with pytest.raises(ValueError):
        validate(np.eye(2), pi=np.ones(3) / 3)
    with pytest.raises(ValueError):
        validate(np.ones((2, 3)))


def test_stationary_small_cases():
    np.testing.assert_allclose(stationary_distribution(SWAP), [0.5, 0.5], atol=1e-15)
    pi = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(stationary_distribution(np.outer(np.ones(3), pi)), pi, atol=1e-14)


def test_stationary_matches_power_iteration(rng):
    p = random_chain(rng, 3, density=1.0, self_loops=True)
    pi = stationary_distribution(p)
    q = np.full(3, 1 / 3)
    for _ in range(10**6 // 1000):
        q = q @ np.linalg.matrix_power(p, 1000)
    np.testing.assert_allclose(pi, q, atol=1e-9)
    assert np.max(np.abs(pi @ p - pi)) <= 1e-12


def test_stationary_rejects_reducible():
    with pytest.raises(ReducibleChainError):
        stationary_distribution(np.eye(3))


def test_reversibility_examples():
    sym = np.array([[0.2, 0.8], [0.8, 0.2]])
    assert is_reversible(sym, [0.5, 0.5])
    cyc = np.roll(np.eye(3), 1, axis=1)
    assert not is_reversible(cyc, np.ones(3) / 3)


def test_mh_complete_graph_uniform():
    n = 5
    p = metropolis_hastings(complete_graph(n), np.ones(n) / n)
    expected = (np.ones((n, n)) - np.eye(n)) / (n - 1)
    np.testing.assert_allclose(p, expected, atol=1e-15)


def test_mh_two_node_hand_check():
    pi = np.array([2 / 3, 1 / 3])
    p = metropolis_hastings(complete_graph(2), pi)
    np.testing.assert_allclose(p, [[0.5, 0.5], [1.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(pi @ p, pi, atol=1e-15)


def test_mh_preconditions():
    with pytest.raises(ValueError):
        metropolis_hastings(make_grid(2, 2, self_loops=False), np.ones(4) / 4)
    asym = SurveillanceGraph(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]]))
    with pytest.raises(ValueError):
        metropolis_hastings(asym, np.ones(3) / 3)


def test_mh_random_instances(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        g = random_symmetric_graph(rng, n)
        pi = random_pi(rng, n)
        p = metropolis_hastings(g, pi)
        rep = validate(p, g, pi)
        assert rep.ok and rep.reversible
        np.testing.assert_allclose(stationary_distribution(p), pi, atol=1e-9)


def test_stationary_permutation_equivariance(rng):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        p = random_chain(rng, n)
        perm = rng.permutation(n)
        q = p[np.ix_(perm, perm)]
        np.testing.assert_allclose(stationary_distribution(q), stationary_distribution(p)[perm], atol=1e-12)


def test_detailed_balance_vector_is_stationary(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        g = random_symmetric_graph(rng, n)
        pi = random_pi(rng, n)
        # reversible chain from random symmetric flows: p_ij = s_ij / pi_i
        s = np.where(g.adjacency, rng.random((n, n)), 0.0)
        s = s + s.T
        s *= 0.9 / s.sum(axis=1).max()
        flows = s * pi.min()
        p = flows / pi[:, None]
        p[np.diag_indices(n)] += 1 - p.sum(axis=1)
        assert is_reversible(p, pi)
        np.testing.assert_allclose(stationary_distribution(p), pi, atol=1e-12)


def test_random_walk_rows():
    g = make_grid(3, 3)
    p = random_walk(g)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert p[4, 4] == pytest.approx(1 / 5)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=2, max_value=7), st.integers(min_value=0, max_value=2**32 - 1))
def test_irreducibility_matches_closure(n, seed):
    r = np.random.default_rng(seed)
    a = r.random((n, n)) < 0.35
    a[np.arange(n), r.integers(0, n, n)] = True  # every row nonempty
    reach = a | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    p = a / a.sum(axis=1, keepdims=True)
    assert is_irreducible(p) == bool(reach.all())
