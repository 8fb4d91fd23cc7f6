"""Command-line entry point: ``patrolchain <command> <action> [flags]``.

Results go to stdout as JSON (or to ``--out`` files); a run report with the
config echo, library versions and wall time goes to ``--report`` or stderr.
Exit status: 0 success, 1 validation failure or bad input, 2 a ``reproduce``
target missed.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time

import numpy as np

from . import __version__, chaincore, entropy, hitting, io, optimize, reproduce, returntime, sim
from ._backend import BACKEND
from .graphmodel import load_graph, make_grid, save_graph, sf_dataset, to_dot, uniform_pi

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ACCEPTANCE = 2


class ValidationFailure(Exception):
    pass


def _versions() -> dict:
    import numba
    import scipy

    return {"patrolchain": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "backend": BACKEND}


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _emit(payload):
    print(json.dumps(_jsonable(payload), indent=1, allow_nan=False))


# -- shared loaders -------------------------------------------------------------


def _graph(args):
    if args.graph == "sf":
        return sf_dataset()
    if args.graph.startswith("grid:"):
        r, c = (int(v) for v in args.graph[5:].split("x"))
        g = make_grid(r, c)
        return g, uniform_pi(g)
    g, pi = load_graph(args.graph)
    return g, pi


def _pi(args, g, default):
    choice = getattr(args, "pi", None)
    if choice is None:
        if default is None:
            return uniform_pi(g)
        return default
    if choice == "uniform":
        return uniform_pi(g)
    return io.load_vector(choice)


def _add_graph(p, required=True):
    p.add_argument("--graph", required=required,
                   help="graph JSON file, 'sf' for the San Francisco data, or 'grid:RxC'")


def _add_pi(p):
    p.add_argument("--pi", help="visit distribution file (CSV/JSON) or 'uniform'; "
                                "defaults to the graph's own pi, else uniform")


def _save_p(args, p):
    if getattr(args, "out", None):
        io.save_chain(args.out, p)


# -- graph -----------------------------------------------------------------------


def cmd_graph(args):
    if args.action == "grid":
        g = make_grid(args.rows, args.cols, self_loops=not args.no_self_loops)
        pi = uniform_pi(g)
    elif args.action == "sf":
        g, pi = sf_dataset()
    else:
        g, pi = _graph(args)
    if args.action == "dot":
        p = io.load_chain(args.chain) if args.chain else None
        text = to_dot(g, p)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return {"n": g.n, "edges": len(g.edges)}
    if args.out:
        save_graph(args.out, g, pi)
    info = {"n": g.n, "edges": len(g.edges), "max_weight": int(g.max_weight),
            "self_loops": g.has_self_loops(), "symmetric_edges": g.is_symmetric()}
    _emit(info)
    return info


# -- chain -----------------------------------------------------------------------


def cmd_chain(args):
    if args.action == "mh":
        g, gpi = _graph(args)
        p = chaincore.metropolis_hastings(g, _pi(args, g, gpi))
        _save_p(args, p)
        out = {"p": p}
    elif args.action == "stationary":
        p = io.load_chain(args.chain)
        out = {"pi": chaincore.stationary_distribution(p)}
    else:
        p = io.load_chain(args.chain)
        g = pi = None
        if args.graph:
            g, gpi = _graph(args)
            pi = _pi(args, g, gpi)
        elif args.pi:
            pi = io.load_vector(args.pi)
        rep = chaincore.validate(p, g, pi)
        out = rep.as_dict()
        out["ok"] = rep.ok
        if args.reversible and not rep.reversible:
            out["ok"] = False
        _emit(out)
        if not out["ok"]:
            raise ValidationFailure("chain failed validation")
        return out
    _emit(out)
    return out


# -- hitting -----------------------------------------------------------------------


def cmd_hit(args):
    if args.action == "mean":
        p = io.load_chain(args.chain)
        s = hitting.mean_hitting_times(p)
        out = {"m": s.m, "kemeny": s.kemeny, "kemeny_eig": hitting.kemeny_constant(p)}
    elif args.action == "weighted":
        g, _ = _graph(args)
        p = io.load_chain(args.chain)
        s = hitting.weighted_mean_hitting_times(p, g)
        out = {"m": s.m, "weighted_mean": s.kemeny, "mean_travel_time": hitting.mean_travel_time(p, s.pi, g.weights)}
    elif args.action == "team":
        t = hitting.team_hitting_times([io.load_chain(c) for c in args.chain])
        if args.out:
            np.savetxt(args.out, t.m, delimiter=",", fmt="%.17g")
        out = {"robots": t.robots, "configurations": t.m.shape[0], "max": float(t.m.max())}
        if not args.out:
            out["m"] = t.m
    else:
        pp, pe = io.load_chain(args.pursuer), io.load_chain(args.evader)
        s = hitting.meeting_times(pp, pe)
        out = {"m": np.where(s.finite, s.m, np.inf), "finite": s.finite, "expected": s.expected}
    _emit(out)
    return {k: v for k, v in out.items() if np.isscalar(v)}


# -- entropy -----------------------------------------------------------------------


def cmd_entropy(args):
    if args.action == "rate":
        p = io.load_chain(args.chain)
        pi = io.load_vector(args.pi) if args.pi and args.pi != "uniform" else chaincore.stationary_distribution(p)
        out = {"entropy_rate": entropy.entropy_rate(p, pi)}
    else:
        g, gpi = _graph(args)
        pi = _pi(args, g, gpi)
        sol = entropy.maximize_entropy_rate(g, pi, tol=args.tol)
        _save_p(args, sol.p_star)
        out = {"entropy_rate": sol.value, "iterations": sol.iterations, "residual": sol.residual}
    _emit(out)
    return out


# -- return-time entropy ---------------------------------------------------------------


def _horizon(args, g, pi):
    if args.horizon:
        return args.horizon
    return returntime.truncation_horizon(g, pi, args.eta)


def cmd_rtent(args):
    g, gpi = _graph(args)
    p = io.load_chain(args.chain)
    pi = _pi(args, g, gpi) if (args.pi or gpi is not None) else chaincore.stationary_distribution(p)
    horizon = _horizon(args, g, pi)
    if args.action == "dist":
        series = returntime.return_time_distribution(p, g, horizon)
        nodes = range(g.n) if args.node is None else [args.node]
        if args.out:
            cols = np.column_stack([np.arange(1, horizon + 1)] + [series.returns(i) for i in nodes])
            header = ["k"] + [f"F_k({i},{i})" for i in nodes]
            io.save_table(args.out, header, ([int(r[0])] + [repr(float(v)) for v in r[1:]] for r in cols))
        out = {"horizon": horizon, "mass": [float(series.returns(i).sum()) for i in nodes],
               "tail_bound": [float(series.tail_bound[i]) for i in nodes]}
    elif args.action == "entropy":
        out = {"horizon": horizon, "entropy": returntime.return_time_entropy(p, g, pi, horizon)}
    else:
        eg = returntime.return_time_entropy_gradient(p, g, pi, horizon)
        if args.out:
            io.save_matrix(args.out, eg.grad)
        out = {"horizon": horizon, "entropy": eg.value, "grad": eg.grad}
    _emit(out)
    return {k: v for k, v in out.items() if np.isscalar(v)}


# -- optimization ----------------------------------------------------------------------


def cmd_opt(args):
    g, gpi = _graph(args)
    pi = _pi(args, g, gpi)
    kind = args.action
    if kind == "maxrate":
        sol = entropy.maximize_entropy_rate(g, pi)
        _save_p(args, sol.p_star)
        out = {"objective": sol.value, "restarts": 1, "iterations": sol.iterations, "wall_ms": None}
        _emit(out)
        return out
    eps = args.epsilon
    if eps is None:
        eps = 1e-3 if kind == "rtent" else 0.0
    spec = optimize.FeasibleSpec(g, pi, epsilon=eps, reversible=(kind == "kemeny-rev"))
    common = dict(seed=args.seed, workers=args.workers)
    if kind == "kemeny":
        r = optimize.minimize_mean_hitting(spec, restarts=args.restarts, **common)
    elif kind == "kemeny-w":
        r = optimize.minimize_weighted_mean_hitting(spec, restarts=args.restarts, **common)
    elif kind == "kemeny-rev":
        r = optimize.minimize_mean_hitting_reversible(spec, weighted=args.weighted, seed=args.seed)
    elif kind == "meeting":
        if args.evader:
            pe = io.load_chain(args.evader)
        else:
            pe = chaincore.random_walk(g)
        pi_e = io.load_vector(args.pi_e) if args.pi_e else chaincore.stationary_distribution(pe)
        r = optimize.minimize_meeting_time(spec, pe, pi_e, restarts=args.restarts, **common)
    else:
        r = optimize.maximize_return_entropy(spec, eta=args.eta, restarts=args.restarts or 10, **common)
    _save_p(args, r.p)
    out = r.report()
    _emit(out)
    return out


# -- simulation --------------------------------------------------------------------------


def cmd_sim(args):
    g, gpi = _graph(args) if args.graph else (None, None)
    p = io.load_chain(args.chain)
    traj = sim.simulate(p, g, args.start, args.steps, seed=args.seed)
    if args.out:
        io.save_table(args.out, ["step", "state", "clock"],
                      zip(range(traj.states.size), traj.states.tolist(), traj.clock.tolist()))
    out = {"steps": args.steps, "seed": args.seed, "rng": sim.rng_metadata(),
           "frequency": sim.empirical_visit_frequency(traj, p.shape[0])}
    if args.hist is not None:
        h = sim.empirical_return_histogram(traj, args.hist, pi=gpi)
        if args.hist_out:
            io.save_table(args.hist_out, ["value", "count"], zip(h.values.tolist(), h.counts.tolist()))
        est = h.mean()
        out["return_mean"] = {"mean": est.mean, "se": est.se, "samples": est.samples}
    _emit(out)
    return {"steps": args.steps, "seed": args.seed}


# -- reproduce / export ------------------------------------------------------------------


def cmd_reproduce(args):
    report, p = reproduce.run(args.figure, restarts=args.restarts, seed=args.seed, workers=args.workers)
    _save_p(args, p)
    _emit(report)
    if not report["pass"]:
        raise AcceptanceMiss(report)
    return report


class AcceptanceMiss(Exception):
    pass


def cmd_export(args):
    p = io.load_chain(args.chain)
    rep = chaincore.validate(p)
    if not (rep.row_stochastic and rep.support_ok):
        raise ValidationFailure("not a stochastic matrix")
    io.export_pixels(p, args.out)
    out = {"written": args.out, "shape": list(p.shape)}
    _emit(out)
    return out


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patrolchain", description=__doc__.splitlines()[0])
    parser.add_argument("--report", help="write the JSON run report here instead of stderr")
    parser.add_argument("--quiet", action="store_true", help="suppress the run report")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gp = sub.add_parser("graph", help="build, save or render graphs")
    gsub = gp.add_subparsers(dest="action", required=True)
    grid = gsub.add_parser("grid")
    grid.add_argument("--rows", type=int, default=3)
    grid.add_argument("--cols", type=int, default=3)
    grid.add_argument("--no-self-loops", action="store_true")
    grid.add_argument("--out")
    sf = gsub.add_parser("sf")
    sf.add_argument("--out")
    load = gsub.add_parser("load")
    load.add_argument("graph", metavar="path", help="graph JSON file (or 'sf', 'grid:RxC')")
    load.add_argument("--out")
    dot = gsub.add_parser("dot")
    dot.add_argument("graph", metavar="path", help="graph JSON file (or 'sf', 'grid:RxC')")
    dot.add_argument("--chain", help="annotate edges with this chain's probabilities")
    dot.add_argument("--out")
    gp.set_defaults(func=cmd_graph)

    cp = sub.add_parser("chain", help="check or build transition matrices")
    csub = cp.add_subparsers(dest="action", required=True)
    v = csub.add_parser("validate")
    v.add_argument("--chain", required=True)
    _add_graph(v, required=False)
    _add_pi(v)
    v.add_argument("--reversible", action="store_true", help="also require detailed balance")
    st = csub.add_parser("stationary")
    st.add_argument("--chain", required=True)
    mh = csub.add_parser("mh")
    _add_graph(mh)
    _add_pi(mh)
    mh.add_argument("--out")
    cp.set_defaults(func=cmd_chain)

    hp = sub.add_parser("hit", help="hitting and meeting times")
    hsub = hp.add_subparsers(dest="action", required=True)
    m = hsub.add_parser("mean")
    m.add_argument("--chain", required=True)
    w = hsub.add_parser("weighted")
    w.add_argument("--chain", required=True)
    _add_graph(w)
    t = hsub.add_parser("team")
    t.add_argument("--chain", action="append", required=True, help="one per robot")
    t.add_argument("--out")
    mt = hsub.add_parser("meeting")
    mt.add_argument("--pursuer", required=True)
    mt.add_argument("--evader", required=True)
    hp.set_defaults(func=cmd_hit)

    ep = sub.add_parser("entropy", help="entropy rate and the maxentropic chain")
    esub = ep.add_subparsers(dest="action", required=True)
    r = esub.add_parser("rate")
    r.add_argument("--chain", required=True)
    r.add_argument("--pi")
    mr = esub.add_parser("maxrate")
    _add_graph(mr)
    _add_pi(mr)
    mr.add_argument("--tol", type=float, default=entropy.DEFAULT_TOL)
    mr.add_argument("--out")
    ep.set_defaults(func=cmd_entropy)

    rp = sub.add_parser("rtent", help="return-time distributions and entropy")
    rsub = rp.add_subparsers(dest="action", required=True)
    for name in ("dist", "entropy", "grad"):
        q = rsub.add_parser(name)
        q.add_argument("--chain", required=True)
        _add_graph(q)
        _add_pi(q)
        q.add_argument("--horizon", type=int)
        q.add_argument("--eta", type=float, default=0.1)
        if name == "dist":
            q.add_argument("--node", type=int, help="single node (default: every node, one column each)")
        if name != "entropy":
            q.add_argument("--out")
    rp.set_defaults(func=cmd_rtent)

    op = sub.add_parser("opt", help="strategy synthesis")
    op.add_argument("action", choices=["kemeny", "kemeny-rev", "kemeny-w", "meeting", "maxrate", "rtent"])
    _add_graph(op)
    _add_pi(op)
    op.add_argument("--restarts", type=int, default=optimize.DEFAULT_RESTARTS)
    op.add_argument("--seed", type=int, default=0)
    op.add_argument("--epsilon", type=float, help="minimum edge probability (rtent default 1e-3, else 0)")
    op.add_argument("--eta", type=float, default=0.1)
    op.add_argument("--weighted", action="store_true", help="kemeny-rev: include travel times")
    op.add_argument("--evader", help="meeting: evader chain (default: random walk on the graph)")
    op.add_argument("--pi-e", help="meeting: evader weighting (default: its stationary vector)")
    op.add_argument("--workers", type=int, help=f"parallel restarts (default ${optimize.WORKERS_ENV} or 1)")
    op.add_argument("--out", help="write the optimal chain as CSV")
    op.set_defaults(func=cmd_opt)

    sp = sub.add_parser("sim", help="Monte Carlo trajectories")
    ssub = sp.add_subparsers(dest="action", required=True)
    run = ssub.add_parser("run")
    run.add_argument("--chain", required=True)
    _add_graph(run, required=False)
    run.add_argument("--start", type=int, default=0)
    run.add_argument("--steps", type=int, default=10000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", help="trajectory CSV (step, state, clock)")
    run.add_argument("--hist", type=int, help="node whose return-time histogram to collect")
    run.add_argument("--hist-out", help="histogram CSV (value, count)")
    sp.set_defaults(func=cmd_sim)

    rep = sub.add_parser("reproduce", help="recompute a published figure value")
    rep.add_argument("figure", choices=sorted(reproduce.FIGURES))
    rep.add_argument("--restarts", type=int)
    rep.add_argument("--seed", type=int, default=reproduce.SEED)
    rep.add_argument("--workers", type=int)
    rep.add_argument("--out", help="write the resulting chain as CSV")
    rep.set_defaults(func=cmd_reproduce)

    xp = sub.add_parser("export", help="export plot data")
    xsub = xp.add_subparsers(dest="action", required=True)
    px = xsub.add_parser("pixels")
    px.add_argument("--chain", required=True)
    px.add_argument("--out", required=True)
    xp.set_defaults(func=cmd_export)
    return parser


def _write_report(args, config, result, status, wall_ms):
    if args.quiet:
        return
    report = {"config": config, "status": status, "versions": _versions(), "rng": sim.rng_metadata(),
              "wall_ms": wall_ms, "result": result}
    text = json.dumps(_jsonable(report), indent=1, allow_nan=False)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    t0 = time.perf_counter()
    status, code, result = "ok", EXIT_OK, None
    try:
        result = args.func(args)
    except AcceptanceMiss as exc:
        status, code, result = "acceptance_failure", EXIT_ACCEPTANCE, exc.args[0]
    except ValidationFailure as exc:
        status, code, result = "validation_failure", EXIT_INVALID, str(exc)
    except (ValueError, KeyError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        status, code, result = "error", EXIT_INVALID, f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    _write_report(args, config, result, status, 1000.0 * (time.perf_counter() - t0))
    return code


if __name__ == "__main__":
    sys.exit(main())
