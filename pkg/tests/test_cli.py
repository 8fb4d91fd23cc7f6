import json
import subprocess
import sys

import numpy as np
import pytest

from patrolchain import io
from patrolchain.chaincore import metropolis_hastings
from patrolchain.cli import main
from patrolchain.graphmodel import make_grid, uniform_pi

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def run(capsys, *argv):
    code = main(["--quiet", *argv])
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


@pytest.fixture
def grid_files(tmp_path):
    g = make_grid(3, 3)
    p = metropolis_hastings(g, uniform_pi(g))
    chain = tmp_path / "mh.csv"
    io.save_chain(chain, p)
    return tmp_path, chain, p


def test_graph_commands(capsys, tmp_path):
    code, info = run_json(capsys, "graph", "grid", "--rows", "2", "--cols", "3", "--out", str(tmp_path / "g.json"))
    assert code == 0 and info["n"] == 6 and info["self_loops"]
    code, again = run_json(capsys, "graph", "load", str(tmp_path / "g.json"))
    assert again == info
    code, sf = run_json(capsys, "graph", "sf")
    assert sf["n"] == 12 and sf["max_weight"] > 1
    code, text = run(capsys, "graph", "dot", "grid:2x2")
    assert code == 0 and text.lstrip().startswith("digraph")


def test_chain_roundtrip(capsys, grid_files):
    tmp, chain, p = grid_files
    code, out = run_json(capsys, "chain", "mh", "--graph", "grid:3x3", "--out", str(tmp / "again.csv"))
    np.testing.assert_allclose(io.load_chain(tmp / "again.csv"), p, atol=1e-15)
    code, out = run_json(capsys, "chain", "validate", "--chain", str(chain), "--graph", "grid:3x3", "--reversible")
    assert code == 0 and out["ok"]
    code, out = run_json(capsys, "chain", "stationary", "--chain", str(chain))
    np.testing.assert_allclose(out["pi"], np.full(9, 1 / 9), atol=1e-12)


def test_validation_failure_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    io.save_chain(bad, np.array([[0.5, 0.4], [0.5, 0.5]]))
    code, out = run_json(capsys, "chain", "validate", "--chain", str(bad))
    assert code == 1 and not out["ok"]
    code, _ = run(capsys, "hit", "mean", "--chain", str(tmp_path / "missing.csv"))
    assert code == 1
    ident = tmp_path / "id.csv"
    io.save_chain(ident, np.eye(2))
    code, _ = run(capsys, "hit", "mean", "--chain", str(ident))
    assert code == 1


def test_hit_and_entropy(capsys, tmp_path):
    swap = tmp_path / "swap.csv"
    io.save_chain(swap, SWAP)
    code, out = run_json(capsys, "hit", "mean", "--chain", str(swap))
    assert code == 0 and out["kemeny"] == pytest.approx(1.5)
    code, out = run_json(capsys, "hit", "meeting", "--pursuer", str(swap), "--evader", str(swap))
    assert out["finite"] == [[True, False], [False, True]] and out["m"][0][1] == "inf"
    code, out = run_json(capsys, "hit", "team", "--chain", str(swap), "--chain", str(swap))
    assert out["robots"] == 2 and out["configurations"] == 4
    code, out = run_json(capsys, "entropy", "rate", "--chain", str(swap))
    assert out["entropy_rate"] == 0.0
    code, out = run_json(capsys, "entropy", "maxrate", "--graph", "grid:3x3")
    assert abs(out["entropy_rate"] - 1.27) <= 0.005


def test_rtent_columns(capsys, grid_files):
    tmp, chain, p = grid_files
    dist = tmp / "dist.csv"
    code, out = run_json(capsys, "rtent", "dist", "--chain", str(chain), "--graph", "grid:3x3", "--out", str(dist))
    assert code == 0 and out["horizon"] == 90
    table = np.loadtxt(dist, delimiter=",", skiprows=1)
    assert table.shape == (90, 10)
    code, out = run_json(capsys, "rtent", "entropy", "--chain", str(chain), "--graph", "grid:3x3", "--horizon", "200")
    assert out["entropy"] > 0
    code, out = run_json(capsys, "rtent", "grad", "--chain", str(chain), "--graph", "grid:3x3", "--horizon", "50")
    assert np.asarray(out["grad"]).shape == (9, 9)


def test_opt_and_report(capsys, tmp_path):
    report = tmp_path / "report.json"
    out_chain = tmp_path / "best.csv"
    code = main(["--report", str(report), "opt", "kemeny", "--graph", "grid:3x3", "--restarts", "2",
                 "--seed", "1", "--out", str(out_chain)])
    result = json.loads(capsys.readouterr().out)
    assert code == 0 and result["objective"] < 7.5 and result["restarts"] == 3
    rep = json.loads(report.read_text())
    assert rep["status"] == "ok" and rep["config"]["restarts"] == 2
    assert {"numpy", "scipy", "numba", "backend"} <= set(rep["versions"])
    assert rep["rng"]["algorithm"].startswith("philox") and rep["wall_ms"] > 0
    assert io.load_chain(out_chain).shape == (9, 9)


def test_sim_histogram(capsys, grid_files):
    tmp, chain, _ = grid_files
    hist = tmp / "hist.csv"
    code, out = run_json(capsys, "sim", "run", "--chain", str(chain), "--graph", "grid:3x3", "--steps", "20000",
                         "--seed", "3", "--hist", "4", "--hist-out", str(hist), "--out", str(tmp / "traj.csv"))
    assert code == 0 and abs(out["return_mean"]["mean"] - 9) <= 4 * out["return_mean"]["se"]
    assert hist.read_text().splitlines()[0] == "value,count"
    code, again = run_json(capsys, "sim", "run", "--chain", str(chain), "--steps", "500", "--seed", "3")
    code, third = run_json(capsys, "sim", "run", "--chain", str(chain), "--steps", "500", "--seed", "3")
    assert again == third


def test_export_pixels(capsys, grid_files):
    tmp, chain, p = grid_files
    code, out = run_json(capsys, "export", "pixels", "--chain", str(chain), "--out", str(tmp / "px.csv"))
    px = np.loadtxt(tmp / "px.csv", delimiter=",")
    np.testing.assert_allclose(px, p / p.max(), atol=1e-12)


def test_reproduce_pass_and_miss(capsys):
    code, out = run_json(capsys, "reproduce", "fig7")
    assert code == 0 and out["pass"]
    # the reversible travel-time optimum is far from the published value
    code, out = run_json(capsys, "reproduce", "fig4b")
    assert code == 2 and not out["pass"]


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["chain", "stationary", "--chain", "x.csv", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["opt", "not-a-problem", "--graph", "sf"])


def test_console_script_and_stderr_report(tmp_path):
    swap = tmp_path / "swap.csv"
    io.save_chain(swap, SWAP)
    proc = subprocess.run([sys.executable, "-m", "patrolchain.cli", "hit", "mean", "--chain", str(swap)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kemeny"] == pytest.approx(1.5)
    assert json.loads(proc.stderr)["status"] == "ok"
