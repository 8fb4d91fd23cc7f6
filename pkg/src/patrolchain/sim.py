"""Seeded Monte Carlo sampling of patrol trajectories and their statistics.

Random numbers come from numpy's counter-based Philox generator; independent
streams are derived with ``SeedSequence.spawn`` so that results do not depend
on how trajectories are distributed over workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chaincore import as_matrix, validate
from .graphmodel import SurveillanceGraph

PRNG_ALGORITHM = "philox4x64-10"
BURN_IN_FACTOR = 10.0


def rng_metadata() -> dict:
    return {"algorithm": PRNG_ALGORITHM, "bit_generator": "numpy.random.Philox",
            "numpy": np.__version__, "splitting": "SeedSequence.spawn"}


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass
class Trajectory:
    states: np.ndarray
    clock: np.ndarray  # cumulative travel time, clock[0] = 0
    seed: int
    stream: int = 0

    def __len__(self):
        return self.states.size


@dataclass
class Estimate:
    mean: float
    se: float
    samples: int
    censored: int = 0

    def within(self, value, k=3.0) -> bool:
        return abs(self.mean - value) <= k * self.se


@dataclass
class Histogram:
    values: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def mean(self) -> Estimate:
        n = self.total
        if n == 0:
            raise ValueError("empty histogram")
        m = float(self.values @ self.counts) / n
        var = float(((self.values - m) ** 2) @ self.counts) / max(n - 1, 1)
        return Estimate(m, math.sqrt(var / n), n)

    def entropy(self) -> float:
        """Plug-in entropy (nats) of the empirical distribution."""
        q = self.counts[self.counts > 0] / self.total
        return float(-np.sum(q * np.log(q)))


def _cdf(p):
    cdf = np.cumsum(p, axis=1)
    cdf /= cdf[:, -1:]
    cdf[:, -1] = 1.0  # u < 1 always lands inside the row
    return np.ascontiguousarray(cdf)


def _checked_chain(p, g: SurveillanceGraph | None):
    p = as_matrix(p)
    rep = validate(p, g)
    if not (rep.row_stochastic and rep.support_ok and rep.irreducible):
        raise ValueError(f"simulation needs a valid irreducible chain: {rep.as_dict()}")
    return p


def _weights(g, n):
    if g is None:
        return np.ones((n, n), dtype=np.int64)
    return g.weights


def simulate(p, g: SurveillanceGraph | None, start: int, steps: int, seed=0, stream: int = 0) -> Trajectory:
    """Sample ``steps`` transitions of the chain from ``start``.

    Without a graph every transition takes one time unit.
    """
    p = _checked_chain(p, g)
    n = p.shape[0]
    if not 0 <= start < n:
        raise ValueError(f"start node {start} outside 0..{n - 1}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    ss = np.random.SeedSequence(seed)
    if stream:
        ss = ss.spawn(stream + 1)[stream]
    u = make_rng(ss).random(steps)
    states = kernels.walk(_cdf(p), int(start), u)
    w = _weights(g, n)
    clock = np.zeros(steps + 1, dtype=np.int64)
    np.cumsum(w[states[:-1], states[1:]], out=clock[1:])
    return Trajectory(states=states, clock=clock, seed=seed, stream=stream)


def simulate_many(p, g, start, steps, count, seed=0):
    """``count`` independent trajectories on streams ``0..count-1`` of ``seed``."""
    return [simulate(p, g, start, steps, seed=seed, stream=k) for k in range(count)]


def _as_list(trajs):
    return [trajs] if isinstance(trajs, Trajectory) else list(trajs)


def empirical_visit_frequency(trajs, n: int | None = None) -> np.ndarray:
    """Fraction of steps spent at each node (initial state excluded)."""
    trajs = _as_list(trajs)
    if n is None:
        n = 1 + max(int(t.states.max()) for t in trajs)
    counts = np.zeros(n)
    for t in trajs:
        counts += np.bincount(t.states[1:], minlength=n)
    total = counts.sum()
    if total == 0:
        raise ValueError("no transitions to count")
    return counts / total


def visit_frequency_se(freq, steps: int) -> np.ndarray:
    """Naive binomial standard error; correlated samples make the true one larger."""
    return np.sqrt(freq * (1 - freq) / steps)


def visit_frequency_estimate(trajs, n: int | None = None, batches: int = 20):
    """Visit frequencies with batch-means standard errors.

    Independent trajectories serve as the batches when there are at least two;
    a single trajectory is cut into ``batches`` contiguous blocks.
    """
    trajs = _as_list(trajs)
    if n is None:
        n = 1 + max(int(t.states.max()) for t in trajs)
    if len(trajs) >= 2:
        blocks = [t.states[1:] for t in trajs]
    else:
        blocks = np.array_split(trajs[0].states[1:], batches)
    blocks = [b for b in blocks if b.size]
    if len(blocks) < 2:
        raise ValueError("batch means need at least two nonempty batches")
    sizes = np.array([b.size for b in blocks], dtype=float)
    freqs = np.array([np.bincount(b, minlength=n) / b.size for b in blocks])
    mean = sizes @ freqs / sizes.sum()
    se = np.sqrt(np.sum(sizes[:, None] ** 2 * (freqs - mean) ** 2, axis=0)
                 / (sizes.sum() ** 2) * len(blocks) / (len(blocks) - 1))
    return mean, se


def empirical_return_histogram(trajs, node: int, pi=None, burn_in: int | None = None) -> Histogram:
    """Histogram of return times (in travel-time units) to ``node``.

    The first ``burn_in`` steps of each trajectory are dropped; the default is
    ``10 / min(pi)`` with ``pi`` estimated from the trajectories if not given.
    """
    trajs = _as_list(trajs)
    if burn_in is None:
        if pi is None:
            pi = empirical_visit_frequency(trajs)
        pmin = float(np.min(pi))
        if pmin <= 0:
            raise ValueError("burn-in needs a positive visit distribution")
        burn_in = int(math.ceil(BURN_IN_FACTOR / pmin))
    samples = []
    for t in trajs:
        s, c = t.states[burn_in:], t.clock[burn_in:]
        samples.append(kernels.excursions(s, c, int(node), int(node)))
    data = np.concatenate(samples) if samples else np.empty(0, dtype=np.int64)
    if data.size == 0:
        raise ValueError(f"no returns to node {node} observed")
    values, counts = np.unique(data, return_counts=True)
    return Histogram(values=values, counts=counts)


def _estimate(data, censored=0) -> Estimate:
    if data.size == 0:
        if censored:
            return Estimate(float("nan"), float("inf"), 0, censored)
        raise ValueError("no samples")
    m = float(data.mean())
    se = float(data.std(ddof=1) / math.sqrt(data.size)) if data.size > 1 else float("inf")
    return Estimate(m, se, int(data.size), censored)


def empirical_mean_hitting(trajs, i: int, j: int) -> Estimate:
    """Mean travel time from ``i`` to the next visit of ``j``, from i.i.d. excursions."""
    data = [kernels.excursions(t.states, t.clock, int(i), int(j)) for t in _as_list(trajs)]
    return _estimate(np.concatenate(data))


def sample_hitting_times(p, g, i: int, j: int, samples: int, seed=0, max_steps: int = 10**7) -> Estimate:
    """Independent walkers from ``i`` advanced in lockstep until each reaches ``j``."""
    p = _checked_chain(p, g)
    w = _weights(g, p.shape[0])
    cdf = _cdf(p)
    rng = make_rng(seed)
    states = np.full(samples, int(i), dtype=np.int64)
    elapsed = np.zeros(samples, dtype=np.int64)
    active = np.arange(samples)
    for _ in range(max_steps):
        if active.size == 0:
            break
        cur = states[active]
        nxt = kernels.advance(cdf, cur, rng.random(active.size))
        elapsed[active] += w[cur, nxt]
        states[active] = nxt
        active = active[nxt != j]
    done = np.ones(samples, dtype=bool)
    done[active] = False
    return _estimate(elapsed[done], censored=int(active.size))


def empirical_meeting(pp, pe, starts, samples: int, seed=0, max_steps: int = 10**6) -> Estimate:
    """Monte Carlo meeting time of a pursuer and an evader.

    ``starts`` is a pair ``(i, j)``: pursuer at ``i``, evader at ``j``. Both
    move every step; the meeting time is the first step ``k >= 1`` at which
    they share a node. Walkers that have not met after ``max_steps`` are
    reported as censored.
    """
    pp = as_matrix(pp)
    pe = as_matrix(pe)
    if samples <= 0:
        raise ValueError("samples must be positive")
    i, j = (int(s) for s in starts)
    ss_p, ss_e = np.random.SeedSequence(seed).spawn(2)
    rng_p, rng_e = make_rng(ss_p), make_rng(ss_e)
    cdf_p, cdf_e = _cdf(pp), _cdf(pe)
    a = np.full(samples, i, dtype=np.int64)
    b = np.full(samples, j, dtype=np.int64)
    t_meet = np.zeros(samples, dtype=np.int64)
    active = np.arange(samples)
    for k in range(1, max_steps + 1):
        if active.size == 0:
            break
        a[active] = kernels.advance(cdf_p, a[active], rng_p.random(active.size))
        b[active] = kernels.advance(cdf_e, b[active], rng_e.random(active.size))
        met = a[active] == b[active]
        t_meet[active[met]] = k
        active = active[~met]
    done = np.ones(samples, dtype=bool)
    done[active] = False
    return _estimate(t_meet[done].astype(float), censored=int(active.size))
