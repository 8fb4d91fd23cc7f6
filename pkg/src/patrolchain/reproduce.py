"""Pinned-seed pipelines that recompute the published figure values.

Each pipeline returns a dict with ``target_value``, ``achieved_value`` and a
``pass`` flag judged against the acceptance threshold of that figure.
"""
from __future__ import annotations

import time

import numpy as np

from .chaincore import random_walk, stationary_distribution, validate
from .entropy import maximize_entropy_rate
from .graphmodel import make_grid, sf_dataset, uniform_pi
from .optimize import (
    FeasibleSpec,
    maximize_return_entropy,
    minimize_mean_hitting,
    minimize_mean_hitting_reversible,
    minimize_meeting_time,
    minimize_weighted_mean_hitting,
)
from .returntime import truncation_horizon

SEED = 2024
RTENT_EPSILON = 1e-3
RTENT_ETA = 0.1
RTENT_HORIZON = 2292


def _grid():
    g = make_grid(3, 3)
    return g, uniform_pi(g)


def fig2(restarts=100, seed=SEED, workers=None):
    g, pi = _grid()
    r = minimize_mean_hitting(FeasibleSpec(g, pi), restarts=restarts, seed=seed, workers=workers)
    return dict(target_value=6.78, achieved_value=r.objective, threshold="<= 6.85",
                passed=r.objective <= 6.85), r.p


def fig3(seed=SEED, **_):
    g, pi = _grid()
    r = minimize_mean_hitting_reversible(FeasibleSpec(g, pi, reversible=True), seed=seed)
    return dict(target_value=12.43, achieved_value=r.objective, threshold="12.43 +/- 0.02",
                passed=abs(r.objective - 12.43) <= 0.02, agreement=r.extras["agreement"]), r.p


def fig4a(restarts=100, seed=SEED, workers=None):
    g, pi = sf_dataset()
    r = minimize_weighted_mean_hitting(FeasibleSpec(g, pi), restarts=restarts, seed=seed, workers=workers)
    return dict(target_value=16.06, achieved_value=r.objective, threshold="<= 16.5",
                passed=r.objective <= 16.5), r.p


def fig4b(seed=SEED, **_):
    g, pi = sf_dataset()
    r = minimize_mean_hitting_reversible(FeasibleSpec(g, pi, reversible=True), weighted=True, seed=seed)
    return dict(target_value=29.88, achieved_value=r.objective, threshold="29.88 +/- 0.05",
                passed=abs(r.objective - 29.88) <= 0.05, agreement=r.extras["agreement"]), r.p


def fig6(restarts=100, seed=SEED, workers=None):
    g, pi = _grid()
    pe = random_walk(g)
    pi_e = stationary_distribution(pe)
    r = minimize_meeting_time(FeasibleSpec(g, pi), pe, pi_e, restarts=restarts, seed=seed, workers=workers)
    return dict(target_value=9.86, achieved_value=r.objective, threshold="<= 10.0",
                passed=r.objective <= 10.0), r.p


def fig7(**_):
    g, pi = _grid()
    sol = maximize_entropy_rate(g, pi)
    rep = validate(sol.p_star, g, pi)
    ok = abs(sol.value - 1.27) <= 0.005 and sol.residual <= 1e-10 and rep.ok and bool(rep.reversible)
    return dict(target_value=1.27, achieved_value=sol.value, threshold="1.27 +/- 0.005",
                residual=sol.residual, passed=ok), sol.p_star


def fig8(restarts=10, seed=SEED, workers=None):
    g, pi = sf_dataset()
    horizon = truncation_horizon(g, pi, RTENT_ETA)
    r = maximize_return_entropy(FeasibleSpec(g, pi, epsilon=RTENT_EPSILON), eta=RTENT_ETA,
                                restarts=restarts, seed=seed, workers=workers)
    return dict(target_value=5.00, achieved_value=r.objective, threshold=">= 4.90",
                horizon=horizon, passed=r.objective >= 4.90 and horizon == RTENT_HORIZON), r.p


FIGURES = {"fig2": fig2, "fig3": fig3, "fig4a": fig4a, "fig4b": fig4b,
           "fig6": fig6, "fig7": fig7, "fig8": fig8}


def run(figure: str, **options):
    """Run one pipeline; returns ``(report, p)`` with ``report['pass']`` set."""
    if figure not in FIGURES:
        raise KeyError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    options = {k: v for k, v in options.items() if v is not None}
    t0 = time.perf_counter()
    report, p = FIGURES[figure](**options)
    report = {"figure": figure, **report}
    report["pass"] = bool(report.pop("passed"))
    report["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    report["achieved_value"] = float(np.round(report["achieved_value"], 12))
    return report, p
