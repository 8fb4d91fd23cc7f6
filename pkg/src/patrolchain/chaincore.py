"""Transition-matrix checks: stochasticity, support, irreducibility, stationarity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .graphmodel import SurveillanceGraph

ROW_SUM_TOL = 1e-9
STATIONARY_TOL = 1e-8
BALANCE_TOL = 1e-8
NONNEG_TOL = 1e-12


class ReducibleChainError(ValueError):
    """Raised when an operation needs an irreducible transition matrix."""


@dataclass
class ValidationReport:
    row_stochastic: bool
    support_ok: bool
    irreducible: bool
    stationary_ok: bool | None = None
    reversible: bool | None = None
    max_violation: float = 0.0

    @property
    def ok(self) -> bool:
        flags = [self.row_stochastic, self.support_ok, self.irreducible, self.stationary_ok]
        return all(f is not False for f in flags)

    def as_dict(self) -> dict:
        return {
            "row_stochastic": self.row_stochastic,
            "support_ok": self.support_ok,
            "irreducible": self.irreducible,
            "stationary_ok": self.stationary_ok,
            "reversible": self.reversible,
            "max_violation": self.max_violation,
        }


def as_matrix(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {p.shape}")
    return p


def is_irreducible(p) -> bool:
    """Strong connectivity of the support digraph ``{(i, j): p_ij > 0}``."""
    p = as_matrix(p)
    ncomp, _ = connected_components(csr_matrix(p > 0), directed=True, connection="strong")
    return ncomp == 1


def validate(p, g: SurveillanceGraph | None = None, pi=None) -> ValidationReport:
    p = as_matrix(p)
    n = p.shape[0]
    if g is not None and g.n != n:
        raise ValueError(f"chain has {n} states but graph has {g.n} nodes")
    if pi is not None:
        pi = np.asarray(pi, dtype=float)
        if pi.shape != (n,):
            raise ValueError(f"distribution has shape {pi.shape}, expected ({n},)")

    row_err = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    neg_err = float(max(0.0, -p.min()))
    violations = [row_err, neg_err]
    support_ok = neg_err <= NONNEG_TOL
    if g is not None:
        off = np.abs(p[~g.adjacency])
        off_err = float(off.max()) if off.size else 0.0
        violations.append(off_err)
        support_ok = support_ok and off_err == 0.0

    report = ValidationReport(
        row_stochastic=row_err <= ROW_SUM_TOL,
        support_ok=bool(support_ok),
        irreducible=is_irreducible(p),
    )
    if pi is not None:
        stat_err = float(np.max(np.abs(pi @ p - pi)))
        flow = pi[:, None] * p
        bal_err = float(np.max(np.abs(flow - flow.T)))
        report.stationary_ok = stat_err <= STATIONARY_TOL
        report.reversible = bal_err <= BALANCE_TOL
        violations += [stat_err, bal_err]
    report.max_violation = float(max(violations))
    return report


def stationary_distribution(p) -> np.ndarray:
    """Solve ``pi^T P = pi^T``, ``sum(pi) = 1`` as one augmented linear system."""
    p = as_matrix(p)
    if not is_irreducible(p):
        raise ReducibleChainError("stationary distribution is not unique for a reducible chain")
    n = p.shape[0]
    # one balance equation is redundant; the normalization row replaces it
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(a, b)


def is_reversible(p, pi, tol: float = BALANCE_TOL) -> bool:
    p = as_matrix(p)
    flow = np.asarray(pi, dtype=float)[:, None] * p
    return bool(np.max(np.abs(flow - flow.T)) <= tol)


def metropolis_hastings(g: SurveillanceGraph, pi) -> np.ndarray:
    """Reversible chain with stationary distribution ``pi`` on ``g``.

    Proposals are uniform over out-neighbours other than the node itself and
    are accepted with probability ``min(1, pi_j d_i / (pi_i d_j))``; rejected
    mass stays on the self loop.
    """
    if not g.has_self_loops():
        raise ValueError("Metropolis-Hastings needs a self loop at every node")
    if not g.is_symmetric():
        raise ValueError("Metropolis-Hastings needs a symmetric edge set")
    pi = np.asarray(pi, dtype=float)
    adj = g.adjacency.copy()
    np.fill_diagonal(adj, False)
    deg = adj.sum(axis=1)
    n = g.n
    p = np.zeros((n, n))
    for i in range(n):
        for j in np.flatnonzero(adj[i]):
            p[i, j] = min(1.0, (pi[j] * deg[i]) / (pi[i] * deg[j])) / deg[i]
        p[i, i] = max(0.0, 1.0 - p[i].sum())
    return p


def random_walk(g: SurveillanceGraph) -> np.ndarray:
    """Uniform choice among out-neighbours (the closed neighbourhood when every node has a self loop)."""
    a = g.adjacency.astype(float)
    return a / a.sum(axis=1, keepdims=True)
