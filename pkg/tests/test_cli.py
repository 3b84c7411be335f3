import csv
import hashlib
import json

import numpy as np
import pytest

from spatial_aoi.cli import main
from spatial_aoi.solvers import solve_pf
from spatial_aoi.topology import Topology, save_topology


def _run(tmp_path, name, *args):
    out = tmp_path / name
    rc = main([*args, "--out", str(out)])
    return rc, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest_ok(out):
    man = json.loads((out / "manifest.json").read_text())
    for art in man["artifacts"]:
        assert hashlib.sha256((out / art["file"]).read_bytes()).hexdigest() == art["sha256"]
    assert {"command", "spec", "seed", "versions", "wall_time_s", "artifacts"} <= set(man)
    return man


def test_solve_symmetric_pf(tmp_path):
    rc, out = _run(tmp_path, "a", "solve", "--symmetric", "1.0", "--n", "10", "--policy", "pf")
    assert rc == 0
    pol = json.loads((out / "policy.json").read_text())
    assert {"policy", "aoi", "multipliers", "residual", "sweeps", "converged"} <= set(pol)
    assert np.allclose(pol["policy"], 0.2, atol=1e-12) and pol["converged"]
    _manifest_ok(out)


@pytest.mark.parametrize("kind", ["ews", "mm", "ta", "aloha"])
def test_solve_every_policy(tmp_path, kind):
    rc, out = _run(tmp_path, kind, "solve", "--n", "6", "--seed", "3", "--policy", kind)
    assert rc == 0
    assert len(_rows(out / "policy.csv")) == 6


def test_solve_from_topology_file(tmp_path):
    path = tmp_path / "top.json"
    save_topology(Topology([0.3, 0.9]), path)
    rc, out = _run(tmp_path, "f", "solve", "--topology", str(path), "--policy", "pf")
    assert rc == 0
    p = json.loads((out / "policy.json").read_text())["policy"]
    assert p == pytest.approx(solve_pf(Topology([0.3, 0.9])).probs.tolist(), abs=1e-15)


def test_ews_weights_flag(tmp_path):
    rc, out = _run(tmp_path, "w", "solve", "--symmetric", "1", "--n", "2", "--policy", "ews",
                   "--weights", "2,1")
    assert rc == 0
    pol = json.loads((out / "policy.json").read_text())
    assert pol["converged"]


def test_simulate_columns_and_paths(tmp_path):
    rc, out = _run(tmp_path, "s", "simulate", "--n", "4", "--horizon", "500",
                   "--replications", "2", "--record-paths")
    assert rc == 0
    rows = _rows(out / "simulation.csv")
    assert list(rows[0]) == ["node_id", "r", "p", "tau_analytic", "tau_hat", "aoi_analytic",
                             "aoi_hat", "ci_tau", "ci_aoi"]
    assert np.load(out / "paths.npy").shape == (2, 500, 4)
    man = _manifest_ok(out)
    assert [a["file"] for a in man["artifacts"]] == ["simulation.csv", "paths.npy"]


def test_simulate_hash_stable_across_runs_and_threads(tmp_path):
    args = ["simulate", "--n", "5", "--horizon", "2000", "--replications", "3", "--seed", "4"]
    _, a = _run(tmp_path, "a", *args)
    _, b = _run(tmp_path, "b", *args, "--threads", "3")
    assert (a / "simulation.csv").read_bytes() == (b / "simulation.csv").read_bytes()


def test_figures_deterministic_across_threads(tmp_path):
    args = ["figure5", "--n", "8", "--topologies", "3", "--buckets", "4", "--horizon", "300"]
    _, a = _run(tmp_path, "a", *args)
    _, b = _run(tmp_path, "b", *args, "--threads", "2")
    assert (a / "fig5.csv").read_bytes() == (b / "fig5.csv").read_bytes()
    cols = list(_rows(a / "fig5.csv")[0])
    assert "aloha" in cols and "mm_sim" in cols


@pytest.mark.parametrize("cmd, args, artifact", [
    ("bounds", ["--sizes", "5,8", "--topologies", "2"], "bounds.csv"),
    ("bounds", ["--symmetric", "1", "--n", "4"], "bounds.csv"),
    ("figure3", ["--sizes", "3,6", "--topologies", "2"], "fig3.csv"),
    ("figure4", ["--n", "6", "--topologies", "2", "--buckets", "3"], "fig4.csv"),
    ("figure5", ["--n", "6", "--topologies", "2", "--buckets", "3"], "fig5.csv"),
    ("ta-convergence", ["--sizes", "10,20", "--topologies", "5"], "ta_convergence.csv"),
])
def test_experiment_commands(tmp_path, cmd, args, artifact):
    rc, out = _run(tmp_path, "x", cmd, *args)
    assert rc == 0
    assert _rows(out / artifact)
    _manifest_ok(out)


def test_bounds_summary(tmp_path):
    rc, out = _run(tmp_path, "b", "bounds", "--sizes", "10", "--topologies", "3")
    assert rc == 0
    assert json.loads((out / "manifest.json").read_text())["summary"]["all_satisfied"]


def test_pareto_two_nodes(tmp_path):
    rc, out = _run(tmp_path, "p", "pareto", "--symmetric", "1", "--n", "2")
    assert rc == 0
    assert len(_rows(out / "pareto.csv")) == 61
    assert json.loads((out / "manifest.json").read_text())["summary"]["monotone"]


def test_config_file(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({
        "topology_source": {"sampler": "symmetric", "n": 5, "radius": 0.5},
        "policy_kind": {"kind": "mm"}, "seed": 2,
    }))
    rc, out = _run(tmp_path, "c", "solve", "--config", str(cfg))
    assert rc == 0
    assert np.allclose(json.loads((out / "policy.json").read_text())["policy"], 0.4)


@pytest.mark.parametrize("args", [
    ["simulate", "--n", "3", "--horizon", "0"],
    ["solve"],
    ["solve", "--n", "3", "--policy", "bogus"],
    ["nonsense"],
    ["solve", "--n", "3", "--threads", "0"],
    ["pareto", "--n", "3"],
    ["solve", "--n", "3", "--beta", "-1"],
])
def test_usage_errors(tmp_path, args):
    try:
        rc = main([*args, "--out", str(tmp_path / "u")])
    except SystemExit as exc:
        rc = exc.code
    assert rc == 2


def test_bad_config_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"mystery": 1}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_convergence_failure_exit(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({
        "topology_source": {"sampler": "uniform_disk", "n": 20},
        "policy_kind": {"kind": "ews"}, "seed": 1,
        "params": {"solver": {"damping": 1.0, "max_sweeps": 30}},
    }))
    rc, out = _run(tmp_path, "e", "solve", "--config", str(cfg))
    assert rc == 3
    assert "trace" in json.loads((out / "error.json").read_text())


def test_io_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--n", "3", "--out", str(blocker / "sub")]) == 4
    assert main(["solve", "--topology", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == 4
