"""Time every hot kernel under both backends and check that they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Numba timings exclude the first (compiling) call.
"""
import argparse
import json
import time

import numpy as np

from patrolchain import kernels
from patrolchain.chaincore import metropolis_hastings
from patrolchain.graphmodel import make_grid, sf_dataset, uniform_pi
from patrolchain.optimize import FeasibleSpec


def _sf_chain():
    g, pi = sf_dataset()
    spec = FeasibleSpec(g, pi, epsilon=1e-3)
    rng = np.random.default_rng(0)
    x, _, _ = spec.project_vector(rng.random(spec.size))
    return g, pi, spec, np.ascontiguousarray(spec.to_matrix(x))


def cases():
    g, pi, spec, P = _sf_chain()
    W = np.ascontiguousarray(g.weights)
    N = 2292
    F = kernels.get_kernel("rt_forward", "numpy")(P, W, N)
    rng = np.random.default_rng(1)
    q = spec.to_vector(P) + 0.05 * rng.standard_normal(spec.size)

    grid = make_grid(3, 3)
    gpi = uniform_pi(grid)
    A = grid.adjacency.astype(float)
    x0 = gpi / np.sqrt(np.max(A @ gpi))
    step = 1.0 / (2.0 * np.max(A @ np.sqrt(gpi)))

    pg = metropolis_hastings(grid, gpi)
    cdf = np.cumsum(pg, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(200_000)
    states = kernels.get_kernel("walk", "numpy")(cdf, 0, u)
    clock = np.arange(states.size, dtype=np.int64)
    walkers = rng.integers(0, 9, 100_000).astype(np.int64)
    return {
        "rt_forward": (P, W, N),
        "rt_entropy": (P, W, pi, N),
        "rt_gradient": (P, W, F, pi),
        "dykstra": (q, spec.proj, spec.offset, spec.lower, 1e-10, 10_000),
        "maxent": (A, gpi, x0, step, 1e-12, 100_000),
        "walk": (cdf, 0, u),
        "advance": (cdf, walkers, rng.random(walkers.size)),
        "excursions": (states, clock, 0, 4),
    }


def _flatten(out):
    if isinstance(out, tuple):
        return [np.asarray(o, dtype=float).ravel() for o in out]
    return [np.asarray(out, dtype=float).ravel()]


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write the timing table here")
    ap.add_argument("--only", nargs="*", help="subset of kernels")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'kernel':<12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, kargs in cases().items():
        if args.only and name not in args.only:
            continue
        fast = kernels.get_kernel(name, "numba")
        fast(*kargs)  # compile / load from cache
        t_nb, out_nb = _time(fast, kargs, args.repeat)
        t_np, out_np = _time(kernels.get_kernel(name, "numpy"), kargs, max(1, args.repeat // 2))
        diff = max(float(np.max(np.abs(a - b))) if a.size else 0.0
                   for a, b in zip(_flatten(out_nb), _flatten(out_np)))
        rows.append({"kernel": name, "numpy_ms": 1e3 * t_np, "numba_ms": 1e3 * t_nb,
                     "speedup": t_np / t_nb, "max_abs_diff": diff})
        print(f"{name:<12} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>8.1f} {diff:>11.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
