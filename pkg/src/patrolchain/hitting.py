"""Hitting-time statistics for single patrollers, robot teams and pursuer/evader pairs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .chaincore import ReducibleChainError, as_matrix, is_irreducible, stationary_distribution
from .graphmodel import SurveillanceGraph

TEAM_ENTRY_CAP = 10**6
PERRON_TOL = 1e-9


@dataclass
class HittingSummary:
    m: np.ndarray
    kemeny: float
    expected_returns: np.ndarray
    pi: np.ndarray


@dataclass
class TeamHittingTable:
    robots: int
    m: np.ndarray  # (n**robots, n); row index enumerates configurations, last robot fastest

    def row(self, locations) -> np.ndarray:
        n = self.m.shape[1]
        idx = 0
        for loc in locations:
            idx = idx * n + int(loc)
        return self.m[idx]


@dataclass
class MeetingSummary:
    m: np.ndarray  # m[i, j]: pursuer starts at i, evader at j
    finite: np.ndarray
    expected: float


def _require_irreducible(p):
    if not is_irreducible(p):
        raise ReducibleChainError("hitting times are infinite for a reducible chain")


def _deleted_column_solves(p, step_cost):
    """Columns of the mean hitting matrix for per-step costs ``step_cost``.

    For target ``j``: ``m_ij = c_i + sum_{k != j} p_ik m_kj``. Off-target
    entries come from the system with row/column ``j`` deleted; the return
    time ``m_jj`` then follows from the same recursion.
    """
    n = p.shape[0]
    m = np.empty((n, n))
    eye = np.eye(n - 1)
    for j in range(n):
        keep = np.r_[0:j, j + 1:n]
        if n > 1:
            col = np.linalg.solve(eye - p[np.ix_(keep, keep)], step_cost[keep])
            m[keep, j] = col
            m[j, j] = step_cost[j] + p[j, keep] @ col
        else:
            m[j, j] = step_cost[j]
    return m


def mean_hitting_times(p) -> HittingSummary:
    """Mean first-passage matrix ``M = 11^T + P(M - diag(M))`` with unit step times."""
    p = as_matrix(p)
    _require_irreducible(p)
    pi = stationary_distribution(p)
    m = _deleted_column_solves(p, np.ones(p.shape[0]))
    kemeny = float((m @ pi)[0])
    return HittingSummary(m=m, kemeny=kemeny, expected_returns=np.diag(m).copy(), pi=pi)


def kemeny_constant(p) -> float:
    """Kemeny constant from the spectrum: ``1 + sum_{j>=2} 1/(1 - lambda_j)``."""
    p = as_matrix(p)
    _require_irreducible(p)
    lam = np.linalg.eigvals(p)
    near_one = np.abs(lam - 1.0) <= PERRON_TOL
    if near_one.sum() != 1:
        # irreducible chains have a simple Perron root; fall back to the closest one
        near_one = np.zeros(lam.shape, dtype=bool)
        near_one[np.argmin(np.abs(lam - 1.0))] = True
    rest = lam[~near_one]
    return float(1.0 + np.sum(1.0 / (1.0 - rest)).real)


def weighted_mean_hitting_times(p, g: SurveillanceGraph) -> HittingSummary:
    """Mean hitting matrix when each transition takes its edge's travel time.

    ``kemeny`` holds ``sum_ij pi_i pi_j m^w_ij``.
    """
    p = as_matrix(p)
    if g.n != p.shape[0]:
        raise ValueError("chain and graph sizes differ")
    if np.any(p[~g.adjacency] != 0):
        raise ValueError("chain uses transitions that are not graph edges")
    _require_irreducible(p)
    pi = stationary_distribution(p)
    step_cost = (p * g.weights).sum(axis=1)
    m = _deleted_column_solves(p, step_cost)
    value = float(pi @ m @ pi)
    return HittingSummary(m=m, kemeny=value, expected_returns=np.diag(m).copy(), pi=pi)


def mean_travel_time(p, pi, weights) -> float:
    """Average duration of one step in stationarity, ``pi^T (P o W) 1``."""
    return float(np.asarray(pi) @ (np.asarray(p) * np.asarray(weights)).sum(axis=1))


def team_hitting_times(ps, cap: int = TEAM_ENTRY_CAP) -> TeamHittingTable:
    """Mean time until any robot of a team reaches each target node.

    Solves ``m_j = 1 + K (I - E_j) m_j`` per target ``j`` where ``K`` is the
    sparse Kronecker product of the robots' chains and ``E_j`` selects the
    configurations already containing ``j``.
    """
    ps = [as_matrix(p) for p in ps]
    if not ps:
        raise ValueError("need at least one robot")
    n = ps[0].shape[0]
    if any(p.shape[0] != n for p in ps):
        raise ValueError("robots must patrol a common node set")
    robots = len(ps)
    if n ** (robots + 1) > cap:
        raise ValueError(f"team table needs n^(N+1) = {n ** (robots + 1)} entries, cap is {cap}")
    for p in ps:
        _require_irreducible(p)

    K = reduce(lambda a, b: sp.kron(a, b, format="csr"), [sp.csr_matrix(p) for p in ps])
    configs = np.indices((n,) * robots).reshape(robots, -1).T  # last robot varies fastest
    size = n**robots
    eye = sp.identity(size, format="csc")
    m = np.empty((size, n))
    for j in range(n):
        free = (~np.any(configs == j, axis=1)).astype(float)
        a = (eye - K @ sp.diags(free)).tocsc()
        try:
            m[:, j] = splu(a).solve(np.ones(size))
        except RuntimeError as exc:  # singular factor
            raise np.linalg.LinAlgError(f"team hitting system for target {j} is singular") from exc
    return TeamHittingTable(robots=robots, m=m)


# -- meeting times -------------------------------------------------------------


def _successors(pp, pe):
    n = pp.shape[0]
    sp_ = [np.flatnonzero(pp[i] > 0) for i in range(n)]
    se = [np.flatnonzero(pe[j] > 0) for j in range(n)]
    return [[k * n + h for k in sp_[i] for h in se[j]] for i in range(n) for j in range(n)]


def meeting_finiteness(pp, pe) -> np.ndarray:
    """Which start pairs meet in finite expected time.

    A pair state is finite iff no pair state reachable from it before the first
    meeting is unable to reach the diagonal at all.
    """
    pp = as_matrix(pp)
    pe = as_matrix(pe)
    n = pp.shape[0]
    succ = _successors(pp, pe)
    diag = np.zeros(n * n, dtype=bool)
    diag[np.arange(n) * (n + 1)] = True
    pred = [[] for _ in range(n * n)]
    for s, targets in enumerate(succ):
        for t in targets:
            pred[t].append(s)

    # states with a path of length >= 1 into the diagonal
    reaches = np.zeros(n * n, dtype=bool)
    queue = deque()
    for d in np.flatnonzero(diag):
        for s in pred[d]:
            if not reaches[s]:
                reaches[s] = True
                queue.append(s)
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if not reaches[s]:
                reaches[s] = True
                queue.append(s)

    # off-diagonal states that lead, without meeting, into a trapped state
    doomed = (~reaches) & (~diag)
    queue = deque(np.flatnonzero(doomed))
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if not diag[s] and not doomed[s]:
                doomed[s] = True
                queue.append(s)

    finite = np.array([not any(doomed[t] for t in succ[s]) for s in range(n * n)])
    return finite.reshape(n, n)


def meeting_times(pp, pe, pi_p=None, pi_e=None) -> MeetingSummary:
    """Mean meeting times ``M = 11^T + P^p (M - diag(M)) P^e^T``.

    Infinite entries are reported as ``inf`` with ``finite`` false. The
    expected meeting time ``pi_p^T M pi_e`` uses the stationary distributions
    when they are not supplied and the chains are irreducible.
    """
    pp = as_matrix(pp)
    pe = as_matrix(pe)
    n = pp.shape[0]
    if pe.shape[0] != n:
        raise ValueError("pursuer and evader must share the node set")
    finite = meeting_finiteness(pp, pe).ravel()
    diag = np.zeros(n * n, dtype=bool)
    diag[np.arange(n) * (n + 1)] = True

    K = np.kron(pp, pe)  # pair index i * n + j
    m = np.full(n * n, np.inf)
    inner = np.flatnonzero(finite & ~diag)
    if inner.size:
        a = np.eye(inner.size) - K[np.ix_(inner, inner)]
        m[inner] = np.linalg.solve(a, np.ones(inner.size))
    for s in np.flatnonzero(finite & diag):
        m[s] = 1.0 + K[s, inner] @ m[inner]
    M = m.reshape(n, n)
    finite = finite.reshape(n, n)

    if pi_p is None:
        pi_p = stationary_distribution(pp) if is_irreducible(pp) else None
    if pi_e is None:
        pi_e = stationary_distribution(pe) if is_irreducible(pe) else None
    if pi_p is None or pi_e is None:
        expected = float("nan")
    else:
        weight = np.outer(pi_p, pi_e)
        active = weight > 0
        if np.all(finite[active]):
            expected = float(np.sum(weight[active] * M[active]))
        else:
            expected = float("inf")
    return MeetingSummary(m=M, finite=finite, expected=expected)
