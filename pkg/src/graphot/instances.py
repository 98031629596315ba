"""Seeded random instance generators for verification suites and tests."""

from __future__ import annotations

import math

import numpy as np

from .graph_core import build_graph


def random_connected_graph(rng, n_min=4, n_max=10, weighted=True, extra=0.35):
    """Random connected graph: a random spanning tree plus extra edges.

    Weights are uniform in [0.2, 3.0] when weighted, else exactly 1.
    """
    n = int(rng.integers(n_min, n_max + 1))
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        attach = order[int(rng.integers(0, k))]
        i, j = int(order[k]), int(attach)
        pairs.add((min(i, j), max(i, j)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < extra:
                pairs.add((i, j))
    edges = []
    for i, j in sorted(pairs):
        w = float(rng.uniform(0.2, 3.0)) if weighted else 1.0
        edges.append((i, j, w))
    return build_graph(n, edges)


def random_tree_graph(rng, n_min=3, n_max=12, weighted=True):
    """Random weighted tree by uniform attachment."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        w = float(rng.uniform(0.2, 3.0)) if weighted else 1.0
        edges.append((u, v, w))
    return build_graph(n, edges)


def random_circulant_graph(rng, n_min=3, n_max=12, weighted=False):
    """Random connected circulant graph; always volume-regular.

    Vertices 0..n-1, edges {i, i+s mod n} for each stride s in a random
    generator set; the stride set is retried until gcd(strides, n) = 1
    so the graph is connected. One weight per stride class keeps all
    weighted degrees equal.
    """
    n = int(rng.integers(n_min, n_max + 1))
    max_stride = n // 2
    while True:
        strides = [s for s in range(1, max_stride + 1) if rng.random() < 0.5]
        if not strides:
            strides = [int(rng.integers(1, max_stride + 1))]
        g = n
        for s in strides:
            g = math.gcd(g, s)
        if g == 1:
            break
    pairs = {}
    for s in strides:
        w = float(rng.uniform(0.25, 2.5)) if weighted else 1.0
        for i in range(n):
            j = (i + s) % n
            key = (min(i, j), max(i, j))
            pairs.setdefault(key, w)
    edges = [(i, j, w) for (i, j), w in sorted(pairs.items())]
    return build_graph(n, edges)


def random_measure(rng, n, sparse=False):
    """Random probability vector; sparse mode zeroes a random subset."""
    v = rng.random(n) ** 2 + 1e-3
    if sparse and n >= 3:
        kill = rng.random(n) < 0.4
        if kill.sum() >= n:
            kill[int(rng.integers(0, n))] = False
        v = np.where(kill, 0.0, v)
        if v.sum() <= 0:
            v[int(rng.integers(0, n))] = 1.0
    return v / v.sum()


def random_measure_pair(rng, n, sparse=False):
    return random_measure(rng, n, sparse), random_measure(rng, n, sparse)


def random_full_support_pair(rng, n):
    """Measure pair with full support and entries bounded away from 0."""
    a = rng.uniform(0.2, 1.0, size=n)
    b = rng.uniform(0.2, 1.0, size=n)
    return a / a.sum(), b / b.sum()
