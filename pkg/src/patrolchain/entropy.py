"""Entropy rate and the maxentropic chain on symmetric graphs with self loops."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chaincore import as_matrix
from .graphmodel import SurveillanceGraph, as_distribution

STATIONARITY_GUARD = 1e-6
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6
TRACE_CHUNK = 1000


class ConvergenceError(RuntimeError):
    pass


@dataclass
class MaxentropicSolution:
    x_star: np.ndarray
    p_star: np.ndarray
    value: float
    iterations: int
    residual: float
    residual_trace: list = field(default_factory=list)


def _xlogx_rows(p):
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out.sum(axis=1)


def _entropy_rate(p, pi):
    return float(-np.asarray(pi) @ _xlogx_rows(p))


def entropy_rate(p, pi) -> float:
    """``-sum_i pi_i sum_j p_ij log p_ij`` in nats."""
    p = as_matrix(p)
    pi = np.asarray(pi, dtype=float)
    resid = np.max(np.abs(pi @ p - pi))
    if resid > STATIONARITY_GUARD:
        raise ValueError(f"pi is not stationary for P (residual {resid:.2e})")
    return _entropy_rate(p, pi)


def phi(x, adjacency):
    """Maxentropic vector map ``diag(x) A x``."""
    return x * (adjacency @ x)


def Phi(x, adjacency):
    """Maxentropic matrix map ``diag(A x)^{-1} A diag(x)``."""
    return adjacency * x[None, :] / (adjacency @ x)[:, None]


def maxentropic_value(x, adjacency, pi) -> float:
    """Entropy rate of ``Phi(x)`` in closed form, valid at ``phi(x) = pi``."""
    return float(-2.0 * x @ adjacency @ (x * np.log(x)) + pi @ np.log(pi))


def _check_graph(g: SurveillanceGraph):
    if not g.is_symmetric():
        raise ValueError("maxentropic construction needs a symmetric adjacency matrix")
    if not g.has_self_loops():
        raise ValueError("maxentropic construction needs self loops at every node")


def initial_point(adjacency, pi):
    return pi / np.sqrt(np.max(adjacency @ pi))


def maximize_entropy_rate(
    g: SurveillanceGraph,
    pi,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    x0=None,
) -> MaxentropicSolution:
    """Entropy-rate-maximal chain with stationary distribution ``pi``.

    Inverts the maxentropic vector map with the fixed-step iteration
    ``x <- x - (phi(x) - pi) / (2 eta)``, ``eta = max_i sum_j a_ij sqrt(pi_j)``,
    then returns ``Phi(x*)`` and its entropy rate.
    """
    _check_graph(g)
    pi = as_distribution(pi, g.n)
    a = g.adjacency.astype(float)
    eta = float(np.max(a @ np.sqrt(pi)))
    x = initial_point(a, pi) if x0 is None else np.asarray(x0, dtype=float).copy()
    step = 1.0 / (2.0 * eta)

    trace = []
    done = 0
    residual = float(np.max(np.abs(phi(x, a) - pi)))
    while done < max_iter:
        chunk = min(TRACE_CHUNK, max_iter - done)
        x, it, residual = kernels.maxent(a, pi, x, step, tol, chunk)
        done += it
        trace.append(float(residual))
        if residual <= tol:
            break
    if residual > tol:
        raise ConvergenceError(f"no convergence after {max_iter} iterations (residual {residual:.2e})")

    return MaxentropicSolution(
        x_star=x,
        p_star=Phi(x, a),
        value=maxentropic_value(x, a, pi),
        iterations=done,
        residual=float(residual),
        residual_trace=trace,
    )


def entropy_rate_gap(sol: MaxentropicSolution, g: SurveillanceGraph, pi) -> float:
    """Entropy rate of ``sol.p_star`` minus the closed-form ``sol.value``."""
    return _entropy_rate(sol.p_star, pi) - sol.value
