import json

import numpy as np
import pytest
from click.testing import CliRunner

import graphot
import graphot.cli as cli
from graphot import (
    NoConvergence,
    beckmann_p1,
    decompose,
    graph_to_json,
    measure_resistance,
    path_graph,
    shortest_path_metric,
    wasserstein,
)


def run_cli(*args):
    return CliRunner().invoke(cli.main, list(args))


def payload_of(result):
    assert result.exit_code == 0, result.output
    env = json.loads(result.output)
    assert set(env) >= {"command", "argv", "inputs", "version", "payload"}
    assert env["version"] == graphot.__version__
    return env


# ---------------------------------------------------------------------------
# dist


def test_dist_beckmann_matches_library():
    result = run_cli(
        "dist", "--graph", "path:4", "--a", "delta:0", "--b", "delta:3",
        "--metric", "beckmann", "--p", "1",
    )
    env = payload_of(result)
    want = beckmann_p1(path_graph(4), np.eye(4)[0], np.eye(4)[3]).distance
    assert env["payload"]["distance"] == pytest.approx(want, abs=1e-12)
    assert env["payload"]["p"] == 1.0
    assert env["command"] == "dist"


def test_dist_wasserstein_reports_coupling():
    result = run_cli(
        "dist", "--graph", "cycle:5", "--a", "delta:0", "--b", "uniform",
        "--metric", "wasserstein", "--p", "2",
    )
    env = payload_of(result)
    sol = wasserstein(
        shortest_path_metric(graphot.cycle_graph(5), 1.0),
        np.eye(5)[0], np.full(5, 0.2), 2.0,
    )
    assert env["payload"]["distance"] == pytest.approx(sol.distance, abs=1e-12)
    entries = env["payload"]["coupling"]
    total = sum(e[2] for e in entries)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_dist_resistance():
    result = run_cli(
        "dist", "--graph", "complete:3", "--a", "delta:0", "--b", "delta:1",
        "--metric", "resistance",
    )
    env = payload_of(result)
    spec = decompose(graphot.complete_graph(3))
    want = measure_resistance(spec, np.eye(3)[0], np.eye(3)[1])
    assert env["payload"]["resistance"] == pytest.approx(want, abs=1e-12)


def test_dist_reads_graph_and_measure_files(tmp_path):
    gpath = tmp_path / "g.json"
    gpath.write_text(graph_to_json(path_graph(3)))
    mpath = tmp_path / "a.json"
    mpath.write_text("[0.5, 0.5, 0.0]")
    result = run_cli(
        "dist", "--graph", str(gpath), "--a", str(mpath), "--b", "delta:2",
        "--metric", "beckmann", "--p", "2",
    )
    env = payload_of(result)
    assert env["inputs"]["graph"].startswith("sha256:")
    assert env["inputs"]["a"].startswith("sha256:")


def test_dist_output_is_deterministic():
    args = ("dist", "--graph", "lattice:3x3", "--a", "uniform", "--b",
            "delta:4", "--metric", "beckmann", "--p", "1.5")
    assert run_cli(*args).output == run_cli(*args).output


def test_threads_flag_does_not_change_results():
    tail = ("dist", "--graph", "path:5", "--a", "delta:0", "--b", "delta:4",
            "--metric", "beckmann", "--p", "3")
    with_threads = run_cli("--threads", "4", *tail)
    without = run_cli(*tail)
    assert json.loads(with_threads.output)["payload"] == \
        json.loads(without.output)["payload"]


# ---------------------------------------------------------------------------
# failure modes


def test_bad_graph_spec_exits_2():
    result = run_cli("dist", "--graph", "path:1x", "--a", "uniform",
                     "--b", "uniform")
    assert result.exit_code == 2


def test_bad_measure_exits_2(tmp_path):
    mpath = tmp_path / "bad.json"
    mpath.write_text("[0.5, 0.2]")  # does not sum to one
    result = run_cli("dist", "--graph", "path:2", "--a", str(mpath),
                     "--b", "uniform")
    assert result.exit_code == 2


def test_convergence_failure_exits_3(monkeypatch):
    def explode(*args, **kwargs):
        raise NoConvergence("iteration cap", best=None, gap=1.0)

    monkeypatch.setattr(cli, "beckmann_general", explode)
    result = run_cli("dist", "--graph", "path:3", "--a", "delta:0",
                     "--b", "delta:2", "--metric", "beckmann", "--p", "1.5")
    assert result.exit_code == 3


# ---------------------------------------------------------------------------
# verify


def test_verify_duality_suite_passes():
    result = run_cli("verify", "duality", "--instances", "4", "--seed", "3")
    env = payload_of(result)
    assert env["payload"]["ok"] is True
    assert env["payload"]["suite"] == "duality"


def test_verify_commute_suite_passes():
    result = run_cli("verify", "commute", "--instances", "4", "--seed", "1")
    env = payload_of(result)
    assert env["payload"]["ok"] is True


def test_verify_failure_exits_4(monkeypatch):
    monkeypatch.setitem(
        cli.SUITES, "duality", lambda seed, instances: (False, {"worst": 1.0})
    )
    result = run_cli("verify", "duality")
    assert result.exit_code == 4


# ---------------------------------------------------------------------------
# walk


def test_walk_reports_exit_frequency_residual(tmp_path):
    bpath = tmp_path / "b.json"
    bpath.write_text(json.dumps([1 / 3, 1 / 3, 1 / 3]))
    result = run_cli(
        "walk", "--graph", "complete:3", "--a", "delta:0",
        "--rule", f"naive:{bpath}", "--walks", "2000", "--seed", "5",
        "--check-exit-frequencies", str(bpath),
    )
    env = payload_of(result)
    payload = env["payload"]
    assert payload["n_walks"] == 2000
    assert sum(payload["stop_distribution"]) == pytest.approx(1.0)
    assert payload["exit_frequency_residual"] < 5 * max(payload["lap_se"])


def test_walk_is_deterministic():
    args = ("walk", "--graph", "cycle:4", "--a", "uniform",
            "--rule", "horizon:6", "--walks", "300", "--seed", "11")
    assert run_cli(*args).output == run_cli(*args).output


def test_walk_bad_rule_exits_2():
    result = run_cli("walk", "--graph", "cycle:4", "--a", "uniform",
                     "--rule", "sometimes:maybe")
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# cluster run


def test_cluster_run_synthetic_with_scatter(tmp_path):
    scatter = tmp_path / "pairs.csv"
    result = run_cli(
        "cluster", "run", "--clusters", "2", "--seed", "0",
        "--emit-scatter", str(scatter), "--max-pairs", "40",
    )
    env = payload_of(result)
    payload = env["payload"]
    assert payload["n_samples"] == 200
    assert payload["evaluation"]["ARI"] > 0.8
    assert payload["n_pairs"] == 40
    assert payload["slope"] > 0

    assert scatter.exists()
    header = scatter.read_text().splitlines()[0]
    assert header == "i,j,b2,w2"
    svg = tmp_path / "pairs.svg"
    assert svg.exists()
    assert "<svg" in svg.read_text()


def test_cluster_run_from_csv(tmp_path):
    rng = np.random.default_rng(13)
    rows = []
    for s in range(24):
        cls = s % 2
        vals = rng.uniform(0.2, 1.0, size=4)
        vals[cls * 2] += 4.0  # class signal on different pixels
        rows.append(",".join(str(v) for v in vals) + f",{cls}")
    data = tmp_path / "toy.csv"
    data.write_text("\n".join(rows) + "\n")
    result = run_cli(
        "cluster", "run", "--data", str(data), "--graph", "lattice:2x2",
        "--k", "12", "--clusters", "2", "--seed", "1",
    )
    env = payload_of(result)
    assert env["payload"]["n_samples"] == 24
    assert env["inputs"]["data"].startswith("sha256:")
    assert env["payload"]["evaluation"]["ARI"] == pytest.approx(1.0)


def test_cluster_run_rejects_bad_csv(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("1,2,3\n")
    result = run_cli("cluster", "run", "--data", str(data),
                     "--graph", "lattice:2x2")
    assert result.exit_code == 2
