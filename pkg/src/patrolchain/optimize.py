"""Strategy synthesis by projected gradient over the feasible transition polytope.

The polytope for a graph ``G``, visit distribution ``pi`` and floor ``epsilon`` is

    {P : P 1 = 1, pi^T P = pi^T, p_ij >= epsilon on edges, p_ij = 0 off edges}

optionally intersected with detailed balance ``pi_i p_ij = pi_j p_ji``. Points
are projected onto it with Dykstra's algorithm alternating between the affine
constraints (closed-form least squares) and the lower bounds.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chaincore import is_irreducible, metropolis_hastings
from .graphmodel import SurveillanceGraph, as_distribution
from .hitting import mean_hitting_times, meeting_finiteness, meeting_times, weighted_mean_hitting_times
from .returntime import return_time_entropy, truncation_horizon

log = logging.getLogger(__name__)

PROJECTION_TOL = 1e-10
PROJECTION_MAX_SWEEPS = 10**4
FEASIBILITY_TOL = 1e-8

ARMIJO_SLOPE = 1e-4
ARMIJO_SHRINK = 0.5
MIN_STEP = 1e-14
GRAD_TOL = 1e-8
MAX_ITER = 5000
FTOL_WINDOW = 20
RTENT_FTOL = 1e-8

DEFAULT_RESTARTS = 100
WORKERS_ENV = "PATROLCHAIN_WORKERS"


class ProjectionError(RuntimeError):
    pass


class InfeasibleError(ValueError):
    pass


@dataclass(eq=False)
class FeasibleSpec:
    graph: SurveillanceGraph
    pi: np.ndarray
    epsilon: float = 0.0
    reversible: bool = False

    def __post_init__(self):
        self.pi = as_distribution(self.pi, self.graph.n)
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        max_deg = int(self.graph.adjacency.sum(axis=1).max())
        if self.epsilon * max_deg > 1:
            raise InfeasibleError(f"epsilon {self.epsilon} times out-degree {max_deg} exceeds 1")
        self.rows, self.cols = np.nonzero(self.graph.adjacency)
        self.lower = np.full(self.rows.size, float(self.epsilon))
        self._build_affine()

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def size(self) -> int:
        return self.rows.size

    def _build_affine(self):
        n, m = self.n, self.size
        pi = self.pi
        pos = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(self.rows, self.cols))}
        blocks = []
        rhs = []
        row_sum = np.zeros((n, m))
        row_sum[self.rows, np.arange(m)] = 1.0
        blocks.append(row_sum)
        rhs.append(np.ones(n))
        col_flow = np.zeros((n, m))
        col_flow[self.cols, np.arange(m)] = pi[self.rows]
        blocks.append(col_flow)
        rhs.append(pi.copy())
        if self.reversible:
            bal = []
            for (i, j), k in pos.items():
                if i >= j:
                    continue
                r = np.zeros(m)
                r[k] = pi[i]
                back = pos.get((j, i))
                if back is not None:
                    r[back] = -pi[j]
                bal.append(r)
            # a one-way edge under detailed balance forces its probability to zero
            for (i, j), k in pos.items():
                if i > j and (j, i) not in pos:
                    r = np.zeros(m)
                    r[k] = pi[i]
                    bal.append(r)
            if bal:
                blocks.append(np.array(bal))
                rhs.append(np.zeros(len(bal)))
        C = np.vstack(blocks)
        d = np.concatenate(rhs)
        C_pinv = np.linalg.pinv(C)
        self.constraints = C
        self.rhs = d
        self.proj = np.ascontiguousarray(np.eye(m) - C_pinv @ C)
        self.offset = C_pinv @ d

    def to_matrix(self, x) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        P[self.rows, self.cols] = x
        return P

    def to_vector(self, P) -> np.ndarray:
        return np.asarray(P, dtype=float)[self.rows, self.cols]

    def project_vector(self, x, tol=PROJECTION_TOL, max_sweeps=PROJECTION_MAX_SWEEPS):
        return kernels.dykstra(np.ascontiguousarray(x, dtype=float), self.proj, self.offset,
                               self.lower, tol, max_sweeps)

    def violation(self, x) -> float:
        """Largest violation of the affine equalities or the lower bounds."""
        aff = np.max(np.abs(self.constraints @ x - self.rhs))
        box = np.max(self.lower - x) if x.size else 0.0
        return float(max(aff, box, 0.0))


def project(q, spec: FeasibleSpec) -> np.ndarray:
    """Euclidean projection of ``q`` (restricted to the edges) onto the polytope."""
    q = np.asarray(q, dtype=float)
    x, sweeps, converged = spec.project_vector(spec.to_vector(q))
    if not converged:
        raise ProjectionError(f"Dykstra projection did not settle in {sweeps} sweeps; "
                              "the feasible set may be empty or degenerate")
    return spec.to_matrix(x)


@dataclass
class OptimizeResult:
    p: np.ndarray
    objective: float
    restarts: int
    best_restart: int
    iterations: int
    converged: bool
    history: list
    objectives: list = field(default_factory=list)
    wall_ms: float = 0.0
    extras: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "objective": self.objective,
            "restarts": self.restarts,
            "best_restart": self.best_restart,
            "iterations": self.iterations,
            "converged": self.converged,
            "wall_ms": self.wall_ms,
            **{k: v for k, v in self.extras.items() if np.isscalar(v)},
        }


# -- objectives -------------------------------------------------------------------
#
# Each objective maps a full transition matrix to (value, gradient matrix), or to
# (inf, None) outside its domain so the line search rejects the point.


def _fundamental(P, pi):
    n = P.shape[0]
    try:
        Z = np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(Z)):
        return None
    return Z


class KemenyObjective:
    """Kemeny constant ``tr(Z)``, ``Z = (I - P + 1 pi^T)^{-1}``; gradient ``(Z^2)^T``."""

    def __init__(self, pi):
        self.pi = np.asarray(pi, dtype=float)

    def __call__(self, P):
        if not is_irreducible(P):
            return np.inf, None
        Z = _fundamental(P, self.pi)
        if Z is None:
            return np.inf, None
        value = float(np.trace(Z))
        if value < 1.0:
            return np.inf, None
        return value, (Z @ Z).T


class WeightedKemenyObjective:
    """``(pi^T (P o W) 1) * tr(Z)``, the weighted mean hitting time."""

    def __init__(self, pi, weights):
        self.pi = np.asarray(pi, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.kemeny = KemenyObjective(pi)

    def __call__(self, P):
        k, gk = self.kemeny(P)
        if gk is None:
            return np.inf, None
        c = float(self.pi @ (P * self.weights).sum(axis=1))
        return c * k, c * gk + k * self.pi[:, None] * self.weights


class TraceObjective:
    """``tr((I - D^{1/2} P D^{-1/2} + sqrt(pi) sqrt(pi)^T)^{-1})``, optionally times the mean step time.

    Convex over reversible chains; points where the symmetric part of the
    matrix is not positive definite are outside the domain.
    """

    def __init__(self, pi, weights=None):
        self.pi = np.asarray(pi, dtype=float)
        self.sq = np.sqrt(self.pi)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)

    def __call__(self, P):
        n = P.shape[0]
        s = self.sq
        B = np.eye(n) - (s[:, None] * P / s[None, :]) + np.outer(s, s)
        try:
            np.linalg.cholesky(0.5 * (B + B.T))
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return np.inf, None
        value = float(np.trace(Binv))
        B2 = Binv @ Binv
        grad = (B2 * s[None, :] / s[:, None]).T  # (D^{-1/2} B^{-2} D^{1/2})^T
        if self.weights is None:
            return value, grad
        c = float(self.pi @ (P * self.weights).sum(axis=1))
        return c * value, c * grad + value * self.pi[:, None] * self.weights


class MeetingObjective:
    """Expected meeting time ``pi_p^T M pi_e`` against a fixed evader chain."""

    def __init__(self, pe, pi_p, pi_e):
        self.pe = np.asarray(pe, dtype=float)
        self.pi_p = np.asarray(pi_p, dtype=float)
        self.pi_e = np.asarray(pi_e, dtype=float)
        n = self.pe.shape[0]
        self.keep = np.ones(n * n)
        self.keep[np.arange(n) * (n + 1)] = 0.0
        self.c = np.kron(self.pi_p, self.pi_e)
        self.weighted = np.outer(self.pi_p, self.pi_e) > 0
        self._finite = {}

    def finite(self, P) -> bool:
        # finiteness depends only on the support, which rarely changes between iterates
        key = (P > 0).tobytes()
        hit = self._finite.get(key)
        if hit is None:
            if len(self._finite) > 4096:
                self._finite.clear()
            hit = bool(np.all(meeting_finiteness(P, self.pe)[self.weighted]))
            self._finite[key] = hit
        return hit

    def __call__(self, P):
        n = P.shape[0]
        if not self.finite(P):
            return np.inf, None
        A = np.eye(n * n) - np.kron(P, self.pe) * self.keep[None, :]
        try:
            lu_m = np.linalg.solve(A, np.ones(n * n))
            lam = np.linalg.solve(A.T, self.c)
        except np.linalg.LinAlgError:
            return np.inf, None
        if not np.all(np.isfinite(lu_m)):
            return np.inf, None
        value = float(self.c @ lu_m)
        Y = (lu_m * self.keep).reshape(n, n)
        Lam = lam.reshape(n, n)
        return value, Lam @ self.pe @ Y.T


class ReturnEntropyObjective:
    """Negated truncated return-time entropy, so that descent maximizes it."""

    def __init__(self, weights, pi, horizon):
        self.weights = np.ascontiguousarray(weights, dtype=np.int64)
        self.pi = np.asarray(pi, dtype=float)
        self.horizon = int(horizon)

    def value(self, P):
        v, _ = kernels.rt_entropy(np.ascontiguousarray(P), self.weights, self.pi, self.horizon)
        return float(v)

    def __call__(self, P):
        P = np.ascontiguousarray(P)
        F = kernels.rt_forward(P, self.weights, self.horizon)
        diag = np.einsum("kii->ki", F[1:])
        pos = diag > 0
        value = float(-np.sum((self.pi[None, :] * diag * np.log(np.where(pos, diag, 1.0)))[pos]))
        grad = kernels.rt_gradient(P, self.weights, F, self.pi)
        return -value, -grad


# -- projected gradient engine -----------------------------------------------------


def projected_descent(objective, spec: FeasibleSpec, x0, max_iter=MAX_ITER, gtol=GRAD_TOL, ftol=0.0,
                      step_memory=True):
    """Projected gradient descent with Armijo backtracking along the projection arc.

    Each line search starts at step 1.0, or at ``min(1, 2 * previous step)``
    with ``step_memory``, and halves until the Armijo condition holds.

    Stops when the gradient mapping ``|x - proj(x - a g)| / a`` drops to
    ``gtol``, when the relative decrease per step averaged over the last
    ``FTOL_WINDOW`` accepted steps falls below ``ftol``, or after ``max_iter``
    iterations. Returns ``(x, value, iterations, converged, history)``.
    """
    x = np.asarray(x0, dtype=float)
    f, G = objective(spec.to_matrix(x))
    if G is None:
        return x, np.inf, 0, False, [np.inf]
    g = spec.to_vector(G)
    history = [f]
    converged = False
    it = 0
    alpha = 1.0
    for it in range(1, max_iter + 1):
        alpha = min(1.0, 2.0 * alpha) if step_memory else 1.0
        accepted = False
        while alpha >= MIN_STEP:
            xn, _, _ = spec.project_vector(x - alpha * g)
            if spec.violation(xn) <= FEASIBILITY_TOL:
                fn, Gn = objective(spec.to_matrix(xn))
                if Gn is not None and fn <= f + ARMIJO_SLOPE * float(g @ (xn - x)):
                    accepted = True
                    break
            alpha *= ARMIJO_SHRINK
        if not accepted:
            # no descent left at machine-level step sizes
            converged = True
            break
        gmap = float(np.linalg.norm(xn - x)) / alpha
        x, f, g = xn, fn, spec.to_vector(Gn)
        history.append(f)
        if gmap <= gtol:
            converged = True
            break
        if ftol > 0 and len(history) > FTOL_WINDOW:
            rate = (history[-1 - FTOL_WINDOW] - f) / FTOL_WINDOW
            if rate <= ftol * max(1.0, abs(f)):
                converged = True
                break
    return x, f, it, converged, history


def random_feasible(spec: FeasibleSpec, rng) -> np.ndarray:
    """Projection of a uniformly random support-respecting stochastic matrix."""
    q = rng.random(spec.size)
    Q = spec.to_matrix(q)
    Q /= Q.sum(axis=1, keepdims=True)
    x, _, converged = spec.project_vector(spec.to_vector(Q))
    if spec.violation(x) > FEASIBILITY_TOL:
        raise InfeasibleError("could not reach the feasible polytope from a random start")
    return x


def mh_start(spec: FeasibleSpec):
    g = spec.graph
    if not (g.has_self_loops() and g.is_symmetric()):
        return None
    x, _, _ = spec.project_vector(spec.to_vector(metropolis_hastings(g, spec.pi)))
    if spec.violation(x) > FEASIBILITY_TOL:
        return None
    return x


def _starting_points(spec, restarts, seed, include_mh=True):
    starts = []
    if include_mh:
        x = mh_start(spec)
        if x is not None:
            starts.append(x)
    for child in np.random.SeedSequence(seed).spawn(restarts):
        starts.append(random_feasible(spec, np.random.Generator(np.random.Philox(child))))
    return starts


def _solve_one(args):
    objective, spec, x0, options = args
    return projected_descent(objective, spec, x0, **options)


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def multistart(objective, spec, starts, workers=None, **options) -> OptimizeResult:
    """Run the descent from every start and keep the lowest objective.

    Ties go to the lowest restart index, so the reduction does not depend on
    worker scheduling.
    """
    t0 = time.perf_counter()
    jobs = [(objective, spec, x0, options) for x0 in starts]
    workers = _worker_count(workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_solve_one, jobs))
    else:
        runs = [_solve_one(job) for job in jobs]
    values = [r[1] for r in runs]
    finite = [k for k, v in enumerate(values) if np.isfinite(v)]
    if not finite:
        raise InfeasibleError("no start produced a finite objective")
    best = min(finite, key=lambda k: (values[k], k))
    x, value, iterations, converged, history = runs[best]
    return OptimizeResult(
        p=spec.to_matrix(x),
        objective=float(value),
        restarts=len(starts),
        best_restart=best,
        iterations=iterations,
        converged=converged,
        history=[float(h) for h in history],
        objectives=[float(v) for v in values],
        wall_ms=1000.0 * (time.perf_counter() - t0),
        extras={"total_iterations": int(sum(r[2] for r in runs))},
    )


# -- problem drivers ----------------------------------------------------------------


def _finalize(result: OptimizeResult, metric) -> OptimizeResult:
    # report the metric module's value for the returned chain; the descent value
    # uses the target pi rather than the chain's own stationary vector
    result.extras["descent_objective"] = result.objective
    # the projection leaves row sums off by up to deg * tol; snap them back
    result.p = result.p / result.p.sum(axis=1, keepdims=True)
    result.objective = float(metric(result.p))
    return result


def minimize_mean_hitting(spec: FeasibleSpec, restarts=DEFAULT_RESTARTS, seed=0, workers=None,
                          max_iter=MAX_ITER) -> OptimizeResult:
    """Chain with the smallest Kemeny constant (nonconvex; best of many local minima)."""
    starts = _starting_points(spec, restarts, seed)
    result = multistart(KemenyObjective(spec.pi), spec, starts, workers, max_iter=max_iter)
    return _finalize(result, lambda p: mean_hitting_times(p).kemeny)


def minimize_weighted_mean_hitting(spec: FeasibleSpec, restarts=DEFAULT_RESTARTS, seed=0,
                                   workers=None, max_iter=MAX_ITER) -> OptimizeResult:
    """Chain with the smallest weighted mean hitting time over general (nonreversible) chains."""
    starts = _starting_points(spec, restarts, seed)
    objective = WeightedKemenyObjective(spec.pi, spec.graph.weights)
    result = multistart(objective, spec, starts, workers, max_iter=max_iter)
    return _finalize(result, lambda p: weighted_mean_hitting_times(p, spec.graph).kemeny)


def minimize_mean_hitting_reversible(spec: FeasibleSpec, weighted=False, seed=0, checks=2,
                                     max_iter=MAX_ITER, agreement_tol=1e-4) -> OptimizeResult:
    """Convex solve over reversible chains through the trace-of-inverse form.

    The first start is the Metropolis-Hastings chain when the graph admits
    it; ``checks`` extra random starts must agree to ``agreement_tol``
    (relative) as a practical convexity certificate.
    """
    if not spec.reversible:
        raise ValueError("reversible solve needs a FeasibleSpec with reversible=True")
    objective = TraceObjective(spec.pi, spec.graph.weights if weighted else None)
    starts = []
    x = mh_start(spec)
    if x is not None:
        starts.append(x)
    for child in np.random.SeedSequence(seed).spawn(checks + (1 if x is None else 0)):
        starts.append(random_feasible(spec, np.random.Generator(np.random.Philox(child))))
    result = multistart(objective, spec, starts, workers=1, max_iter=max_iter)
    spread = (max(result.objectives) - min(result.objectives)) / abs(result.objective)
    result.extras["agreement"] = float(spread)
    if spread > agreement_tol:
        log.warning("reversible starts disagree by %.2e (relative)", spread)
    if weighted:
        return _finalize(result, lambda p: weighted_mean_hitting_times(p, spec.graph).kemeny)
    return _finalize(result, lambda p: mean_hitting_times(p).kemeny)


def minimize_meeting_time(spec: FeasibleSpec, pe, pi_e, restarts=DEFAULT_RESTARTS, seed=0,
                          workers=None, max_iter=MAX_ITER) -> OptimizeResult:
    """Pursuer chain with the smallest expected meeting time against evader ``pe``."""
    pi_e = as_distribution(pi_e, spec.n)
    objective = MeetingObjective(pe, spec.pi, pi_e)
    starts = _starting_points(spec, restarts, seed)
    if not np.isfinite(objective(spec.to_matrix(starts[0]))[0]):
        log.warning("first start has infinite expected meeting time")
    result = multistart(objective, spec, starts, workers, max_iter=max_iter)
    return _finalize(result, lambda p: meeting_times(p, pe, spec.pi, pi_e).expected)


def maximize_return_entropy(spec: FeasibleSpec, eta=0.1, restarts=10, seed=0, horizon=None,
                            workers=None, max_iter=MAX_ITER, ftol=RTENT_FTOL) -> OptimizeResult:
    """Chain with the largest truncated return-time entropy (projected gradient ascent).

    ``objective`` of the result is the entropy itself, not its negation.
    """
    if spec.epsilon <= 0:
        raise ValueError("return-time entropy maximization needs epsilon > 0")
    if horizon is None:
        horizon = truncation_horizon(spec.graph, spec.pi, eta)
    objective = ReturnEntropyObjective(spec.graph.weights, spec.pi, horizon)
    starts = _starting_points(spec, restarts, seed)
    result = multistart(objective, spec, starts, workers, max_iter=max_iter, ftol=ftol)
    result.objective = -result.objective
    result.objectives = [-v for v in result.objectives]
    result.history = [-h for h in result.history]
    result.extras["horizon"] = int(horizon)
    return _finalize(result, lambda p: return_time_entropy(p, spec.graph, spec.pi, horizon))
