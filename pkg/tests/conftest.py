"""Shared fixtures and independent oracles used across the test suite.

The oracles here deliberately avoid the library's own solvers: linear
programs go through scipy's HiGHS interface, pseudoinverses through
numpy's SVD, and shortest p-paths through brute-force enumeration.
"""

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from graphot import WeightedGraph, as_measure
from graphot.instances import (
    random_connected_graph,
    random_circulant_graph,
    random_full_support_pair,
    random_measure,
    random_measure_pair,
    random_tree_graph,
)

__all__ = [
    "lp_beckmann_p1",
    "lp_wasserstein_cost",
    "brute_force_path_metric",
    "dense_pinv",
    "triangle_graph",
    "weighted_triangle",
]


def dense_pinv(graph):
    """Laplacian pseudoinverse via numpy SVD, independent of spectral.py."""
    return np.linalg.pinv(graph.laplacian())


def lp_beckmann_p1(graph, a, b):
    """min sum_e w_e |J_e| subject to B J = a - b, via HiGHS.

    Splits J into positive and negative parts so the objective is linear.
    """
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    bmat = graph.incidence().dense()
    aeq = np.hstack([bmat, -bmat])
    cvec = np.concatenate([graph.weights, graph.weights])
    res = linprog(
        cvec,
        A_eq=aeq,
        b_eq=a.m - b.m,
        bounds=[(0, None)] * (2 * graph.m),
        method="highs",
    )
    assert res.status == 0, res.message
    flow = res.x[: graph.m] - res.x[graph.m :]
    return float(res.fun), flow


def lp_wasserstein_cost(cost, a, b):
    """Optimal transport cost min <cost, pi> over couplings, via HiGHS."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k = len(a), len(b)
    rows = []
    for i in range(n):
        row = np.zeros((n, k))
        row[i, :] = 1.0
        rows.append(row.ravel())
    for j in range(k):
        col = np.zeros((n, k))
        col[:, j] = 1.0
        rows.append(col.ravel())
    aeq = np.array(rows[:-1])  # drop one redundant marginal constraint
    beq = np.concatenate([a, b])[:-1]
    res = linprog(
        np.asarray(cost, dtype=np.float64).ravel(),
        A_eq=aeq,
        b_eq=beq,
        bounds=[(0, None)] * (n * k),
        method="highs",
    )
    assert res.status == 0, res.message
    return float(res.fun)


def brute_force_path_metric(graph, p):
    """All-pairs min over simple paths of (sum w_e^p)^(1/p); only for tiny n."""
    n = graph.n
    assert n <= 7, "enumeration explodes past n=7"
    wp = graph.weights ** p
    best = np.full((n, n), np.inf)
    np.fill_diagonal(best, 0.0)
    verts = list(range(n))
    for s, t in itertools.combinations(verts, 2):
        inner = [v for v in verts if v not in (s, t)]
        for r in range(len(inner) + 1):
            for mid in itertools.permutations(inner, r):
                path = (s, *mid, t)
                total = 0.0
                ok = True
                for u, v in zip(path[:-1], path[1:]):
                    try:
                        total += wp[graph.edge_id(u, v)]
                    except KeyError:
                        ok = False
                        break
                if ok:
                    best[s, t] = min(best[s, t], total)
    best = np.minimum(best, best.T)
    return best ** (1.0 / p)


def triangle_graph():
    return WeightedGraph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


def weighted_triangle():
    return WeightedGraph(3, [(0, 1, 3.0), (1, 2, 1.0), (0, 2, 0.5)])


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture
def triangle():
    return triangle_graph()


def random_cases(seed, count, **kwargs):
    """Yield (graph, a, b) triples with Measure-typed endpoints."""
    for i in range(count):
        g_rng = np.random.default_rng((seed, i))
        graph = random_connected_graph(g_rng, **kwargs)
        a, b = random_measure_pair(g_rng, graph.n)
        yield graph, as_measure(a), as_measure(b)


# re-exported so test modules import everything instance-shaped from here
random_connected = random_connected_graph
random_circulant = random_circulant_graph
random_tree = random_tree_graph
measure_pair = random_measure_pair
full_support_pair = random_full_support_pair
one_measure = random_measure
