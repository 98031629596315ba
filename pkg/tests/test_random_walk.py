import numpy as np
import pytest

import graphot.random_walk as rw
from graphot import (
    HorizonExceeded,
    RuleMismatch,
    StoppingRuleSpec,
    access_time,
    complete_graph,
    cycle_graph,
    decompose,
    exact_hitting_times,
    exit_frequency_check,
    generalized_commute_resistance,
    green_matrix_from_hitting,
    measure_resistance,
    naive_access_time,
    path_graph,
    pinv_apply,
    potential_from_exit_frequencies,
    simulate_walks,
    stationary_distribution,
    transition_matrix,
)
from graphot.instances import random_circulant_graph, random_measure_pair

from conftest import dense_pinv, random_cases, weighted_triangle


def test_transition_matrix_rows_sum_to_one():
    for graph, _, _ in random_cases(501, 8):
        pmat = transition_matrix(graph)
        assert np.allclose(pmat.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(pmat >= 0)


def test_stationary_distribution_is_invariant():
    for graph, _, _ in random_cases(502, 8):
        pi = stationary_distribution(graph)
        pmat = transition_matrix(graph)
        assert np.allclose(pi @ pmat, pi, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0)


def test_hitting_times_known_values():
    ws = exact_hitting_times(complete_graph(3))
    off = ws.hitting[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 2.0, atol=1e-10)

    ws = exact_hitting_times(path_graph(3))
    assert ws.hitting[0, 2] == pytest.approx(4.0, abs=1e-10)
    assert ws.hitting[1, 2] == pytest.approx(3.0, abs=1e-10)
    assert ws.hitting[1, 0] == pytest.approx(3.0, abs=1e-10)
    assert np.all(np.diag(ws.hitting) == 0.0)


def test_hitting_times_satisfy_first_step_equations():
    for graph, _, _ in random_cases(503, 10):
        ws = exact_hitting_times(graph)
        pmat = transition_matrix(graph)
        want = 1.0 + pmat @ ws.hitting
        mask = ~np.eye(graph.n, dtype=bool)
        assert np.allclose(ws.hitting[mask], want[mask], atol=1e-8)


def test_commute_time_is_volume_times_resistance():
    for graph, _, _ in random_cases(504, 10):
        ws = exact_hitting_times(graph)
        spec = decompose(graph)
        for i in range(graph.n):
            for j in range(i + 1, graph.n):
                a = np.eye(graph.n)[i]
                b = np.eye(graph.n)[j]
                commute = ws.hitting[i, j] + ws.hitting[j, i]
                want = ws.volume * measure_resistance(spec, a, b)
                assert commute == pytest.approx(want, rel=1e-9)


def test_access_times_reduce_to_hitting_on_deltas():
    g = weighted_triangle()
    ws = exact_hitting_times(g)
    a = np.eye(3)[0]
    b = np.eye(3)[2]
    assert access_time(ws, a, b) == pytest.approx(ws.hitting[0, 2])
    assert naive_access_time(ws, a, b) == pytest.approx(ws.hitting[0, 2])


def test_generalized_commute_matches_spectral_resistance():
    for graph, a, b in random_cases(505, 15):
        ws = exact_hitting_times(graph)
        spec = decompose(graph)
        got = generalized_commute_resistance(ws, a, b)
        want = measure_resistance(spec, a, b)
        assert got == pytest.approx(want, abs=1e-9)


def test_green_matrix_exact_on_volume_regular_graphs():
    for i in range(10):
        rng = np.random.default_rng((506, i))
        graph = random_circulant_graph(rng, n_min=3, n_max=12, weighted=True)
        ws = exact_hitting_times(graph)
        got = green_matrix_from_hitting(ws)
        assert np.allclose(got, dense_pinv(graph), atol=1e-9)


def test_green_matrix_quadratic_form_holds_everywhere():
    # entrywise equality needs constant weighted degree, but the pairing
    # with mean-zero vectors survives on every graph
    for graph, a, b in random_cases(507, 12):
        ws = exact_hitting_times(graph)
        mat = green_matrix_from_hitting(ws)
        u = a.m - b.m
        want = float(u @ dense_pinv(graph) @ u)
        assert float(u @ mat @ u) == pytest.approx(want, abs=1e-9)


def test_green_matrix_deviates_entrywise_on_irregular_graphs():
    ws = exact_hitting_times(path_graph(3))
    gap = np.max(np.abs(green_matrix_from_hitting(ws) - dense_pinv(path_graph(3))))
    assert gap > 1e-2


# ---------------------------------------------------------------------------
# stopping rules and simulation


def test_rule_factories():
    target = np.array([0.0, 0.5, 0.5])
    rule = StoppingRuleSpec.naive(target)
    assert rule.kind == "naive"
    assert "naive" in rule.describe()
    assert StoppingRuleSpec.hit_node(2).kind == "hit_node"
    assert StoppingRuleSpec.fixed_horizon(5).kind == "fixed_horizon"


def test_simulation_is_deterministic():
    g = weighted_triangle()
    a = np.array([1.0, 0.0, 0.0])
    rule = StoppingRuleSpec.hit_node(2)
    r1 = simulate_walks(g, a, rule, n_walks=200, seed=9)
    r2 = simulate_walks(g, a, rule, n_walks=200, seed=9)
    assert r1.mean_length == r2.mean_length
    assert np.array_equal(r1.visit_counts, r2.visit_counts)
    assert np.array_equal(r1.net_edge_traversals, r2.net_edge_traversals)
    r3 = simulate_walks(g, a, rule, n_walks=200, seed=10)
    assert r3.mean_length != r1.mean_length


def test_fixed_horizon_walk_lengths():
    g = cycle_graph(5)
    a = np.eye(5)[0]
    rep = simulate_walks(g, a, StoppingRuleSpec.fixed_horizon(7), 50, seed=1)
    assert rep.mean_length == pytest.approx(7.0)
    assert rep.se_length == pytest.approx(0.0)


def test_hit_rule_stops_at_target():
    g = path_graph(4)
    a = np.eye(4)[0]
    rep = simulate_walks(g, a, StoppingRuleSpec.hit_node(3), 100, seed=2)
    assert rep.stop_distribution[3] == pytest.approx(1.0)
    # mean walk length estimates the hitting time 9
    ws = exact_hitting_times(g)
    assert abs(rep.mean_length - ws.hitting[0, 3]) < 4 * rep.se_length


def test_naive_rule_stop_distribution_matches_target():
    g = complete_graph(3)
    a = np.eye(3)[0]
    b = np.array([0.2, 0.3, 0.5])
    rep = simulate_walks(g, a, StoppingRuleSpec.naive(b), 20000, seed=3)
    assert np.allclose(rep.stop_distribution, b, atol=0.02)


def test_exit_frequency_conservation():
    g = complete_graph(3)
    a = np.eye(3)[0]
    b = np.full(3, 1 / 3)
    rep = simulate_walks(g, a, StoppingRuleSpec.naive(b), 20000, seed=4)
    residual = exit_frequency_check(g, rep, a, b)
    assert residual < 5 * max(np.max(rep.lap_se), 1e-12)


def test_exit_frequency_check_rejects_wrong_rule():
    g = complete_graph(3)
    a = np.eye(3)[0]
    b = np.full(3, 1 / 3)
    rep = simulate_walks(g, a, StoppingRuleSpec.naive(b), 100, seed=5)
    with pytest.raises(RuleMismatch):
        exit_frequency_check(g, rep, a, np.array([0.5, 0.5, 0.0]))


def test_exit_frequency_potential_estimates_pinv():
    g = complete_graph(3)
    a = np.eye(3)[0]
    b = np.full(3, 1 / 3)
    rep = simulate_walks(g, a, StoppingRuleSpec.naive(b), 40000, seed=6)
    est = potential_from_exit_frequencies(rep)
    want = pinv_apply(decompose(g), a - b)
    assert np.allclose(est, want, atol=0.05)


def test_horizon_guard_trips(monkeypatch):
    monkeypatch.setattr(rw, "MAX_WALK_STEPS", 4)
    g = path_graph(8)
    a = np.eye(8)[0]
    with pytest.raises(HorizonExceeded):
        simulate_walks(g, a, StoppingRuleSpec.hit_node(7), 50, seed=7)
