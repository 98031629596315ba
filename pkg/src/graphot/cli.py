"""Command-line surface.

Exit codes: 0 success, 2 input error, 3 solver non-convergence,
4 verification-suite failure. Every command prints a ResultEnvelope:
JSON with the command name, argv echo, input digests (file hashes or
generator strings, plus seeds), a version string, and the
command-specific payload. Identical inputs and seed produce
byte-identical envelopes apart from the version field.
"""

from __future__ import annotations

import hashlib
import json
import sys

import click
import numpy as np

from . import __version__
from .analysis import CurveSpec, benamou_brenier, separability_check, verify_bounds
from .beckmann import beckmann_general, beckmann_p1, beckmann_p2, dual_value
from .cluster import (
    ingest_csv,
    run_cluster_experiment,
    synthetic_two_class_dataset,
)
from .errors import ConvergenceError, GraphInputError, NoConvergence
from .graph_core import (
    Measure,
    complete_graph,
    cycle_graph,
    hex_lattice_graph,
    lattice_graph,
    path_graph,
    random_tree,
    read_graph,
    read_measure,
    shortest_path_metric,
)
from .instances import (
    random_circulant_graph,
    random_connected_graph,
    random_full_support_pair,
    random_measure_pair,
)
from .random_walk import (
    StoppingRuleSpec,
    exact_hitting_times,
    exit_frequency_check,
    generalized_commute_resistance,
    green_matrix_from_hitting,
    simulate_walks,
)
from .spectral import decompose, measure_resistance
from .wasserstein import wasserstein

GENERATORS = ("path", "cycle", "complete", "lattice", "hexlattice", "tree")


def _fail_input(message):
    click.echo(f"input error: {message}", err=True)
    sys.exit(2)


def _fail_convergence(message):
    click.echo(f"convergence error: {message}", err=True)
    sys.exit(3)


def _parse_graph(spec):
    head, _, rest = spec.partition(":")
    if head in GENERATORS and rest:
        try:
            if head == "path":
                return path_graph(int(rest)), spec
            if head == "cycle":
                return cycle_graph(int(rest)), spec
            if head == "complete":
                return complete_graph(int(rest)), spec
            if head in ("lattice", "hexlattice"):
                r, _, c = rest.partition("x")
                maker = lattice_graph if head == "lattice" else hex_lattice_graph
                return maker(int(r), int(c)), spec
            if head == "tree":
                s, _, n = rest.partition(",")
                return random_tree(int(s), int(n)), spec
        except ValueError as exc:
            raise GraphInputError(f"bad graph spec {spec!r}: {exc}") from exc
    return read_graph(spec), _file_digest(spec)


def _parse_measure(spec, n):
    if spec == "uniform":
        return Measure.uniform(n), spec
    head, _, rest = spec.partition(":")
    if head == "delta" and rest:
        try:
            return Measure.delta(n, int(rest)), spec
        except ValueError as exc:
            raise GraphInputError(f"bad measure spec {spec!r}: {exc}") from exc
    return read_measure(spec, n), _file_digest(spec)


def _file_digest(path):
    with open(path, "rb") as fh:
        return "sha256:" + hashlib.sha256(fh.read()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and (obj != obj):  # NaN
        return None
    return obj


def _emit(command, inputs, payload):
    envelope = {
        "command": command,
        "argv": sys.argv[1:],
        "inputs": _jsonable(inputs),
        "version": __version__,
        "payload": _jsonable(payload),
    }
    click.echo(json.dumps(envelope, sort_keys=True, indent=2))


@click.group()
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap; results never depend on it.")
@click.pass_context
def main(ctx, threads):
    """Flow-based and coupling-based transport distances on graphs."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads


@main.command(name="dist")
@click.option("--graph", "graph_spec", required=True,
              help="Generator (path:n, cycle:n, complete:n, lattice:RxC, "
                   "hexlattice:RxC, tree:seed,n) or a JSON/TSV file.")
@click.option("--a", "a_spec", required=True,
              help="Measure file (JSON array / 1-column CSV), delta:i, or uniform.")
@click.option("--b", "b_spec", required=True, help="Second measure, same formats.")
@click.option("--metric", type=click.Choice(["beckmann", "wasserstein", "resistance"]),
              default="beckmann", show_default=True)
@click.option("--p", type=float, default=2.0, show_default=True)
@click.option("--k-metric", "k_metric",
              type=click.Choice(["path", "path-p", "resistance", "resistance-sqrt"]),
              default="path", show_default=True,
              help="Ground metric for the coupling distance.")
def cmd_dist(graph_spec, a_spec, b_spec, metric, p, k_metric):
    """Distance between two measures on a graph."""
    try:
        graph, graph_digest = _parse_graph(graph_spec)
        a, a_digest = _parse_measure(a_spec, graph.n)
        b, b_digest = _parse_measure(b_spec, graph.n)
        if p < 1.0:
            raise GraphInputError(f"p={p} must be >= 1")
    except GraphInputError as exc:
        _fail_input(exc)
    except OSError as exc:
        _fail_input(exc)

    inputs = {"graph": graph_digest, "a": a_digest, "b": b_digest,
              "metric": metric, "p": p}
    try:
        if metric == "beckmann":
            if p == 1.0:
                sol = beckmann_p1(graph, a, b)
            elif p == 2.0:
                sol = beckmann_p2(decompose(graph), a, b)
            else:
                sol = beckmann_general(graph, a, b, p)
            payload = sol.to_payload()
            payload.update(
                method=sol.method,
                iterations=sol.iterations,
                feasibility_residual=sol.feasibility_residual,
            )
        elif metric == "wasserstein":
            inputs["k_metric"] = k_metric
            if k_metric == "path":
                k = shortest_path_metric(graph, 1.0)
            elif k_metric == "path-p":
                k = shortest_path_metric(graph, p)
            else:
                spec = decompose(graph)
                lp = (spec.eigenvectors * spec.inverse_eigenvalues()) @ spec.eigenvectors.T
                diag = np.diag(lp)
                r = np.maximum(diag[:, None] + diag[None, :] - 2.0 * lp, 0.0)
                np.fill_diagonal(r, 0.0)
                k = np.sqrt(r) if k_metric == "resistance-sqrt" else r
            sol = wasserstein(k, a, b, p)
            nz = np.argwhere(sol.coupling.pi > 0)
            payload = {
                "p": p,
                "distance": sol.distance,
                "coupling": [[int(i), int(j), float(sol.coupling.pi[i, j])] for i, j in nz],
                "iterations": sol.iterations,
            }
        else:
            spec = decompose(graph)
            r = measure_resistance(spec, a, b)
            payload = {"resistance": r, "distance": float(np.sqrt(r))}
    except NoConvergence as exc:
        _fail_convergence(exc)
    except ConvergenceError as exc:
        _fail_convergence(exc)
    except GraphInputError as exc:
        _fail_input(exc)
    _emit("dist", inputs, payload)


# ---------------------------------------------------------------------------
# verification suites


def _suite_bounds(seed, instances):
    ps = [1.0, 1.5, 2.0, 3.0]
    worst = np.inf
    checked = 0
    skipped = 0
    for i in range(instances):
        rng = np.random.default_rng((seed, i))
        g = random_connected_graph(rng, 4, 10, weighted=True)
        a, b = random_measure_pair(rng, g.n)
        p = ps[i % len(ps)]
        for rep in verify_bounds(g, a, b, p):
            if rep.skipped:
                skipped += 1
                continue
            checked += 1
            worst = min(worst, rep.slack)
            if rep.slack < -1e-9:
                return False, {
                    "failed": rep.to_payload(),
                    "instance": {"index": i, "p": p, "n": g.n,
                                 "edges": _jsonable(g.edges),
                                 "a": a.tolist(), "b": b.tolist()},
                }
    return True, {"instances": instances, "checked": checked,
                  "skipped": skipped, "min_slack": worst}


def _suite_duality(seed, instances):
    worst = 0.0
    for i in range(instances):
        rng = np.random.default_rng((seed, i))
        g = random_connected_graph(rng, 4, 10, weighted=True)
        a, b = random_measure_pair(rng, g.n)
        for p in (1.5, 2.0, 3.0):
            sol = beckmann_general(g, a, b, p)
            rel = sol.duality_gap / max(1.0, sol.distance)
            worst = max(worst, rel)
            if rel > 1e-8:
                return False, {"instance": i, "p": p, "relative_gap": rel}
        sol1 = beckmann_p1(g, a, b)
        lower = dual_value(g, a, b, sol1.potential, 1.0)
        err = abs(sol1.distance - lower)
        if err > 1e-6:
            return False, {"instance": i, "p": 1.0, "p1_dual_error": err}
    return True, {"instances": instances, "max_relative_gap": worst}


def _suite_commute(seed, instances):
    worst_commute = 0.0
    worst_entry = 0.0
    for i in range(instances):
        rng = np.random.default_rng((seed, i))
        g = random_connected_graph(rng, 4, 10, weighted=True)
        a, b = random_measure_pair(rng, g.n)
        ws = exact_hitting_times(g)
        spec = decompose(g)
        lhs = generalized_commute_resistance(ws, a, b)
        rhs = measure_resistance(spec, a, b)
        err = abs(lhs - rhs)
        worst_commute = max(worst_commute, err)
        if err > 1e-8:
            return False, {"instance": i, "kind": "commute", "error": err}
    for i in range(25):
        rng = np.random.default_rng((seed, 999983, i))
        g = random_circulant_graph(rng, 3, 12, weighted=True)
        ws = exact_hitting_times(g)
        spec = decompose(g)
        lp = (spec.eigenvectors * spec.inverse_eigenvalues()) @ spec.eigenvectors.T
        err = float(np.max(np.abs(green_matrix_from_hitting(ws) - lp)))
        worst_entry = max(worst_entry, err)
        if err > 1e-8:
            return False, {"instance": i, "kind": "green_matrix", "error": err}
    return True, {"instances": instances, "max_commute_error": worst_commute,
                  "max_green_matrix_error": worst_entry}


def _suite_bb(seed, instances):
    worst_rel = 0.0
    worst_gap = 0.0
    for i in range(instances):
        rng = np.random.default_rng((seed, i))
        g = random_connected_graph(rng, 4, 10, weighted=True)
        a, b = random_measure_pair(rng, g.n)
        spec = decompose(g)
        action, gap = benamou_brenier(spec, CurveSpec.linear(a, b))
        dist2 = beckmann_p2(spec, a, b).distance ** 2
        rel = abs(action - dist2) / max(1.0, dist2)
        worst_rel = max(worst_rel, rel)
        if rel > 1e-9:
            return False, {"instance": i, "kind": "linear", "relative_error": rel}
        mid = 0.5 * (np.asarray(a) + np.asarray(b))
        bump = rng.random(g.n)
        bump = bump / bump.sum()
        mid = 0.7 * mid + 0.3 * bump
        curve = CurveSpec(points=np.vstack([np.asarray(a), mid, np.asarray(b)]))
        action, gap = benamou_brenier(spec, curve)
        worst_gap = min(worst_gap, gap)
        if gap < -1e-7:
            return False, {"instance": i, "kind": "perturbed", "gap": gap}
    return True, {"instances": instances, "max_linear_relative_error": worst_rel,
                  "min_perturbed_gap": worst_gap}


def _suite_separability(seed, instances):
    worst = np.inf
    for i in range(instances):
        rng = np.random.default_rng((seed, i))
        g = random_connected_graph(rng, 4, 10, weighted=True)
        a, b = random_full_support_pair(rng, g.n)
        spec = decompose(g)
        rep = separability_check(spec, a, b, n_samples=25, seed=int(rng.integers(2**31)))
        worst = min(worst, rep.margin)
        if not rep.success:
            return False, {"instance": i, "margin": rep.margin}
    return True, {"instances": instances, "min_margin": worst}


SUITES = {
    "bounds": _suite_bounds,
    "duality": _suite_duality,
    "commute": _suite_commute,
    "bb": _suite_bb,
    "separability": _suite_separability,
}


@main.command(name="verify")
@click.argument("suite", type=click.Choice(sorted(SUITES)))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--instances", type=int, default=50, show_default=True)
def cmd_verify(suite, seed, instances):
    """Run a randomized verification suite; exit 4 on any failure."""
    try:
        ok, payload = SUITES[suite](seed, instances)
    except ConvergenceError as exc:
        _fail_convergence(exc)
    except GraphInputError as exc:
        _fail_input(exc)
    payload["suite"] = suite
    payload["ok"] = ok
    _emit("verify", {"suite": suite, "seed": seed, "instances": instances}, payload)
    if not ok:
        sys.exit(4)


# ---------------------------------------------------------------------------
# walks


def _parse_rule(spec, n):
    head, _, rest = spec.partition(":")
    if head == "naive" and rest:
        target, digest = _parse_measure(rest, n)
        return StoppingRuleSpec.naive(target), {"rule": "naive", "target": digest}
    if head == "hit" and rest:
        return StoppingRuleSpec.hit_node(int(rest)), {"rule": spec}
    if head == "horizon" and rest:
        return StoppingRuleSpec.fixed_horizon(int(rest)), {"rule": spec}
    raise GraphInputError(
        f"bad rule {spec!r}: expected naive:measure, hit:j, or horizon:t"
    )


@main.command(name="walk")
@click.option("--graph", "graph_spec", required=True)
@click.option("--a", "a_spec", required=True, help="Starting distribution.")
@click.option("--rule", "rule_spec", required=True,
              help="naive:measure-file, hit:j, or horizon:t.")
@click.option("--walks", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--check-exit-frequencies", "check_b", default=None,
              help="Stopping measure; appends the conservation residual.")
def cmd_walk(graph_spec, a_spec, rule_spec, walks, seed, check_b):
    """Simulate stopped random walks and report summary statistics."""
    try:
        graph, graph_digest = _parse_graph(graph_spec)
        a, a_digest = _parse_measure(a_spec, graph.n)
        rule, rule_inputs = _parse_rule(rule_spec, graph.n)
    except GraphInputError as exc:
        _fail_input(exc)
    except OSError as exc:
        _fail_input(exc)

    inputs = {"graph": graph_digest, "a": a_digest, "walks": walks, "seed": seed}
    inputs.update(rule_inputs)
    try:
        report = simulate_walks(graph, a, rule, walks, seed)
    except ConvergenceError as exc:
        _fail_convergence(exc)
    payload = {
        "n_walks": report.n_walks,
        "mean_length": report.mean_length,
        "se_length": report.se_length,
        "stop_distribution": report.stop_distribution,
        "exit_frequencies": report.exit_frequencies,
        "visit_counts": report.visit_counts,
        "net_edge_traversals": report.net_edge_traversals,
    }
    if check_b is not None:
        try:
            b, b_digest = _parse_measure(check_b, graph.n)
            residual = exit_frequency_check(graph, report, a, b)
        except GraphInputError as exc:
            _fail_input(exc)
        inputs["check_b"] = b_digest
        payload["exit_frequency_residual"] = residual
        payload["lap_se"] = report.lap_se
    _emit("walk", inputs, payload)


# ---------------------------------------------------------------------------
# clustering experiments


@main.group(name="cluster")
def cmd_cluster():
    """Distributional clustering experiments."""


@cmd_cluster.command(name="run")
@click.option("--data", "data_path", default=None,
              help="CSV of samples; omit to use the bundled synthetic dataset.")
@click.option("--layout", type=click.Choice(["pixels_with_label", "measure_rows"]),
              default="pixels_with_label", show_default=True)
@click.option("--graph", "graph_spec", default="lattice:8x8", show_default=True)
@click.option("--metric", type=click.Choice(["beckmann2", "wasserstein2"]),
              default="beckmann2", show_default=True)
@click.option("--k", type=int, default=42, show_default=True)
@click.option("--clusters", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--emit-scatter", "scatter_path", default=None,
              help="CSV path for sampled (B2, W2) pairs; an SVG is written beside it.")
@click.option("--max-pairs", type=int, default=None,
              help="Subsample at most this many pairs for the scatter/slope.")
def cluster_run(data_path, layout, graph_spec, metric, k, clusters, seed,
                scatter_path, max_pairs):
    """Cluster a distributional dataset and evaluate against labels."""
    try:
        graph, graph_digest = _parse_graph(graph_spec)
        if data_path is None:
            ds = synthetic_two_class_dataset(seed=seed)
            graph = ds.base_graph
            data_digest = "synthetic"
        else:
            ds = ingest_csv(data_path, layout, graph)
            data_digest = _file_digest(data_path)
    except GraphInputError as exc:
        _fail_input(exc)
    except OSError as exc:
        _fail_input(exc)

    inputs = {"graph": graph_digest, "data": data_digest, "metric": metric,
              "k": k, "clusters": clusters, "seed": seed,
              "max_pairs": max_pairs}
    try:
        experiment = run_cluster_experiment(
            ds, k, clusters, seed, metric=metric,
            with_scatter=scatter_path is not None, max_pairs=max_pairs,
        )
    except ConvergenceError as exc:
        _fail_convergence(exc)
    except GraphInputError as exc:
        _fail_input(exc)

    offdiag = experiment.kernel.values[
        ~np.eye(ds.n_samples, dtype=bool)
    ] if ds.n_samples > 1 else np.array([1.0])
    payload = {
        "n_samples": ds.n_samples,
        "labels": experiment.labels,
        "kernel": {
            "kind": experiment.kernel.kind,
            "min_offdiag": float(offdiag.min()),
            "max_offdiag": float(offdiag.max()),
        },
    }
    if experiment.evaluation is not None:
        payload["evaluation"] = experiment.evaluation.to_payload()
    if scatter_path is not None:
        i_idx, j_idx, b2_vals, w2_vals = experiment.scatter
        with open(scatter_path, "w") as fh:
            fh.write("i,j,b2,w2\n")
            for t in range(len(i_idx)):
                fh.write(f"{i_idx[t]},{j_idx[t]},{b2_vals[t]!r},{w2_vals[t]!r}\n")
        svg_path = scatter_path.rsplit(".", 1)[0] + ".svg"
        from .plotting import save_scatter_svg

        save_scatter_svg(
            svg_path, b2_vals, w2_vals, slope=experiment.slope,
            xlabel="B2", ylabel="W2",
        )
        payload["slope"] = experiment.slope
        payload["scatter_csv"] = scatter_path
        payload["scatter_svg"] = svg_path
        payload["n_pairs"] = int(len(i_idx))
    _emit("cluster run", inputs, payload)


if __name__ == "__main__":
    main()
