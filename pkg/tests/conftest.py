import numpy as np
import pytest

from patrolchain.graphmodel import SurveillanceGraph, make_grid, sf_dataset, uniform_pi


def random_support(rng, n, density=0.5, self_loops=False):
    """Random strongly connected support: a random Hamiltonian cycle plus extra arcs."""
    a = rng.random((n, n)) < density
    perm = rng.permutation(n)
    a[perm, np.roll(perm, -1)] = True
    if self_loops:
        np.fill_diagonal(a, True)
    return a


def random_chain(rng, n, density=0.5, self_loops=False):
    a = random_support(rng, n, density, self_loops)
    p = np.where(a, rng.random((n, n)) + 0.05, 0.0)
    return p / p.sum(axis=1, keepdims=True)


def random_weighted(rng, n, density=0.5, wmax=5, self_loops=False):
    """Random chain together with a graph whose edges are exactly its support."""
    p = random_chain(rng, n, density, self_loops)
    w = np.where(p > 0, rng.integers(1, wmax + 1, (n, n)), 0)
    return p, SurveillanceGraph(w)


def random_symmetric_graph(rng, n, density=0.4):
    a = rng.random((n, n)) < density
    a = a | a.T
    perm = rng.permutation(n)
    a[perm, np.roll(perm, -1)] = True
    a[np.roll(perm, -1), perm] = True
    np.fill_diagonal(a, True)
    return SurveillanceGraph.from_adjacency(a)


def random_pi(rng, n):
    x = rng.random(n) + 0.1
    return x / x.sum()


def complete_graph(n, self_loops=True):
    a = np.ones((n, n), dtype=bool)
    if not self_loops:
        np.fill_diagonal(a, False)
    return SurveillanceGraph.from_adjacency(a)


def two_cycle(w12=1, w21=1):
    return SurveillanceGraph(np.array([[0, w12], [w21, 0]]))


def central_fd(f, p, mask, h=1e-6):
    """Central differences of scalar ``f`` in every masked entry of ``p``."""
    g = np.zeros_like(p)
    for i, j in zip(*np.nonzero(mask)):
        e = np.zeros_like(p)
        e[i, j] = h
        g[i, j] = (f(p + e) - f(p - e)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid():
    g = make_grid(3, 3)
    return g, uniform_pi(g)


@pytest.fixture(scope="session")
def sf():
    return sf_dataset()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
