"""First-passage and return-time distributions over integer travel times.

``F_k(i, j)`` is the probability that a patroller leaving ``i`` first reaches
``j`` after exactly ``k`` time units. It obeys the delayed recursion

    F_k(i, j) = p_ij [k == w_ij] + sum_{h != j} p_ih F_{k - w_ih}(h, j)

with ``F_k = 0`` for ``k <= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chaincore import as_matrix
from .graphmodel import SurveillanceGraph

STATIONARITY_GUARD = 1e-6


@dataclass
class ReturnTimeSeries:
    horizon: int
    f: np.ndarray  # (horizon, n, n); f[k - 1] = F_k
    tail_bound: np.ndarray  # 1 - sum_{k <= horizon} F_k(i, i)

    def returns(self, node: int) -> np.ndarray:
        """``F_1(i, i) .. F_N(i, i)`` for one node."""
        return self.f[:, node, node]


@dataclass
class EntropyGradient:
    value: float
    grad: np.ndarray


def quantize_weights(w_real, unit: float = 1.0) -> np.ndarray:
    """Round travel times to integer multiples of ``unit``, at least 1 on every edge.

    Zero entries mean "no edge" and stay zero.
    """
    if unit <= 0:
        raise ValueError("quantization unit must be positive")
    w = np.asarray(w_real, dtype=float)
    if np.any(w < 0):
        raise ValueError("travel times must be positive")
    q = np.rint(w / unit).astype(np.int64)
    return np.where(w > 0, np.maximum(q, 1), 0)


def _prepare(p, g: SurveillanceGraph):
    p = as_matrix(p)
    if p.shape[0] != g.n:
        raise ValueError("chain and graph sizes differ")
    if np.any(p[~g.adjacency] != 0):
        raise ValueError("chain uses transitions that are not graph edges")
    return np.ascontiguousarray(p), np.ascontiguousarray(g.weights)


def _check_stationary(p, pi):
    resid = float(np.max(np.abs(pi @ p - pi)))
    if resid > STATIONARITY_GUARD:
        raise ValueError(f"pi is not stationary for P (residual {resid:.2e})")


def return_time_distribution(p, g: SurveillanceGraph, horizon: int) -> ReturnTimeSeries:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p, w = _prepare(p, g)
    F = kernels.rt_forward(p, w, int(horizon))
    diag_mass = np.einsum("kii->i", F)
    return ReturnTimeSeries(horizon=int(horizon), f=F[1:], tail_bound=np.maximum(1.0 - diag_mass, 0.0))


def truncation_horizon(g: SurveillanceGraph, pi, eta: float) -> int:
    """Horizon whose discarded return-time mass is at most ``eta`` at every node.

    Markov's inequality with ``E[T_ii] = pi^T (P o W) 1 / pi_i <= w_max / pi_i``
    gives ``floor(w_max / (min_i pi_i * eta))``, valid for every feasible chain.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    bound = g.max_weight / (float(np.min(pi)) * eta)
    # guard against 2292.0000000001-style rounding before the floor
    return int(math.floor(bound + 1e-9))


def return_time_entropy(p, g: SurveillanceGraph, pi, horizon: int) -> float:
    """Truncated return-time entropy ``-sum_i pi_i sum_{k<=N} F_k(i,i) log F_k(i,i)``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p, w = _prepare(p, g)
    pi = np.asarray(pi, dtype=float)
    _check_stationary(p, pi)
    value, _ = kernels.rt_entropy(p, w, pi, int(horizon))
    return float(value)


def return_time_entropy_gradient(p, g: SurveillanceGraph, pi, horizon: int) -> EntropyGradient:
    """Value and gradient of the truncated return-time entropy.

    The gradient is taken entrywise in ``p_uv`` on the graph's edges with the
    weights ``pi`` held fixed, by a reverse (adjoint) sweep through the
    recursion; entries off the edge set are zero.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p, w = _prepare(p, g)
    pi = np.asarray(pi, dtype=float)
    _check_stationary(p, pi)
    F = kernels.rt_forward(p, w, int(horizon))
    diag = np.einsum("kii->ki", F[1:])
    pos = diag > 0
    value = float(-np.sum((pi[None, :] * diag * np.log(np.where(pos, diag, 1.0)))[pos]))
    grad = kernels.rt_gradient(p, w, F, pi)
    grad = np.where(g.adjacency, grad, 0.0)
    return EntropyGradient(value=value, grad=grad)


def tail_horizon(p, g: SurveillanceGraph, tail: float, start: int = 64, limit: int = 10**7) -> int:
    """Smallest doubling of ``start`` whose exact discarded return mass is ``<= tail``."""
    p, w = _prepare(p, g)
    pi = np.full(p.shape[0], 1.0 / p.shape[0])
    n = start
    while n <= limit:
        _, mass = kernels.rt_entropy(p, w, pi, n)
        if np.max(1.0 - mass) <= tail:
            return n
        n *= 2
    raise ValueError(f"return-time tail above {tail} even at horizon {limit}")
