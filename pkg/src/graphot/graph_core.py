"""Weighted graphs, incidence algebra, probability measures, and IO.

Vertices are 0-based integers. Edges are undirected with strictly
positive weights and are stored once, in canonical orientation
(i, j) with i < j, sorted lexicographically. All other modules rely
on this ordering when they attach one number per edge (flows, cdf
differences, traversal counts).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    DimensionMismatch,
    Disconnected,
    DuplicateEdge,
    InvalidMeasure,
    NonpositiveWeight,
    NotAPath,
    SelfLoop,
)

MASS_TOL = 1e-9


class WeightedGraph:
    """Connected undirected graph with positive edge weights.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : iterable of (i, j, w)
        Undirected edges in any orientation. Weights must be positive,
        self-loops and duplicate pairs are rejected, and the edge set
        must connect all ``n`` vertices.
    """

    def __init__(self, n, edges):
        n = int(n)
        if n < 1:
            raise DimensionMismatch(f"need at least one vertex, got n={n}")
        tails, heads, weights = [], [], []
        seen = set()
        for edge in edges:
            i, j, w = edge
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < n and 0 <= j < n):
                raise DimensionMismatch(f"edge ({i},{j}) out of range for n={n}")
            if i == j:
                raise SelfLoop(f"self-loop at vertex {i}")
            if w <= 0 or not np.isfinite(w):
                raise NonpositiveWeight(f"edge ({i},{j}) has weight {w}")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise DuplicateEdge(f"edge ({a},{b}) listed more than once")
            seen.add((a, b))
            tails.append(a)
            heads.append(b)
            weights.append(w)

        order = np.lexsort((heads, tails)) if tails else np.array([], dtype=int)
        self.n = n
        self.edge_tail = np.asarray(tails, dtype=np.int64)[order]
        self.edge_head = np.asarray(heads, dtype=np.int64)[order]
        self.weights = np.asarray(weights, dtype=np.float64)[order]
        self._edge_id = {
            (int(i), int(j)): e
            for e, (i, j) in enumerate(zip(self.edge_tail, self.edge_head))
        }

        deg = np.zeros(n)
        np.add.at(deg, self.edge_tail, self.weights)
        np.add.at(deg, self.edge_head, self.weights)
        self.degrees = deg
        self.volume = float(deg.sum())

        if n > 1:
            adj = self.adjacency_sparse()
            n_comp, _ = connected_components(adj, directed=False)
            if n_comp != 1:
                raise Disconnected(f"graph has {n_comp} components")

        # flat neighbor arrays for walk simulation and traversals
        nbr_of = [[] for _ in range(n)]
        for e in range(self.m):
            i, j, w = self.edge_tail[e], self.edge_head[e], self.weights[e]
            nbr_of[i].append((j, w, e))
            nbr_of[j].append((i, w, e))
        counts = np.array([len(v) for v in nbr_of], dtype=np.int64)
        self.nbr_offsets = np.concatenate([[0], np.cumsum(counts)])
        flat = [item for v in nbr_of for item in v]
        self.nbr_vertex = np.array([t[0] for t in flat], dtype=np.int64)
        self.nbr_weight = np.array([t[1] for t in flat], dtype=np.float64)
        self.nbr_edge = np.array([t[2] for t in flat], dtype=np.int64)

    @property
    def m(self):
        return len(self.weights)

    @property
    def edges(self):
        """Canonical edge triples [(i, j, w), ...] with i < j, sorted."""
        return [
            (int(i), int(j), float(w))
            for i, j, w in zip(self.edge_tail, self.edge_head, self.weights)
        ]

    def edge_id(self, i, j):
        """Index of edge {i, j} in canonical order, or KeyError."""
        a, b = (i, j) if i < j else (j, i)
        return self._edge_id[(a, b)]

    def is_unweighted(self, tol=0.0):
        return bool(np.all(np.abs(self.weights - 1.0) <= tol))

    def neighbors(self, i):
        """Arrays (vertices, weights, edge ids) of the neighbors of i."""
        lo, hi = self.nbr_offsets[i], self.nbr_offsets[i + 1]
        return self.nbr_vertex[lo:hi], self.nbr_weight[lo:hi], self.nbr_edge[lo:hi]

    def adjacency(self):
        """Dense weighted adjacency matrix."""
        a = np.zeros((self.n, self.n))
        a[self.edge_tail, self.edge_head] = self.weights
        a[self.edge_head, self.edge_tail] = self.weights
        return a

    def adjacency_sparse(self):
        row = np.concatenate([self.edge_tail, self.edge_head])
        col = np.concatenate([self.edge_head, self.edge_tail])
        dat = np.concatenate([self.weights, self.weights])
        return csr_matrix((dat, (row, col)), shape=(self.n, self.n))

    def laplacian(self):
        """Dense combinatorial Laplacian L = D - A."""
        return np.diag(self.degrees) - self.adjacency()

    def incidence(self):
        return IncidenceOperator(self)

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"


def build_graph(n, edges):
    """Validate and canonicalize an edge list into a WeightedGraph."""
    return WeightedGraph(n, edges)


class IncidenceOperator:
    """Signed vertex-edge incidence map B of a graph.

    Column e = (i, j) with i < j carries +1 at the tail i and -1 at the
    head j, so B W B^T equals the combinatorial Laplacian and a positive
    flow entry means mass moving from the lower to the higher index.
    """

    def __init__(self, graph):
        self.graph = graph

    def apply(self, flow):
        """Divergence B J of an edge vector J."""
        flow = np.asarray(flow, dtype=np.float64)
        if flow.shape != (self.graph.m,):
            raise DimensionMismatch(
                f"flow has shape {flow.shape}, expected ({self.graph.m},)"
            )
        out = np.zeros(self.graph.n)
        np.add.at(out, self.graph.edge_tail, flow)
        np.subtract.at(out, self.graph.edge_head, flow)
        return out

    def apply_transpose(self, f):
        """Edge-difference vector (B^T f)_e = f_i - f_j for e = (i, j)."""
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.graph.n,):
            raise DimensionMismatch(
                f"vertex vector has shape {f.shape}, expected ({self.graph.n},)"
            )
        return f[self.graph.edge_tail] - f[self.graph.edge_head]

    def dense(self):
        b = np.zeros((self.graph.n, self.graph.m))
        cols = np.arange(self.graph.m)
        b[self.graph.edge_tail, cols] = 1.0
        b[self.graph.edge_head, cols] = -1.0
        return b


def laplacian_apply(graph, f):
    """Apply L f pointwise: (Lf)(i) = sum_j w_ij (f(i) - f(j))."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (graph.n,):
        raise DimensionMismatch(
            f"vertex vector has shape {f.shape}, expected ({graph.n},)"
        )
    out = graph.degrees * f
    np.subtract.at(out, graph.edge_tail, graph.weights * f[graph.edge_head])
    np.subtract.at(out, graph.edge_head, graph.weights * f[graph.edge_tail])
    return out


@dataclass(frozen=True)
class PathMetric:
    """All-pairs path metric d_p with its exponent."""

    p: float
    dist: np.ndarray

    def __post_init__(self):
        d = self.dist
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionMismatch(f"distance matrix has shape {d.shape}")


def shortest_path_metric(graph, p=1.0):
    """p-weighted shortest-path metric.

    d_p(i, j)^p is the minimum over i-j paths of the sum of w_e^p along
    the path; Dijkstra runs on the powered weights and the p-th root is
    taken at the end. d_1 is the ordinary weighted shortest path.
    """
    p = float(p)
    if not (p >= 1.0 and np.isfinite(p)):
        raise DimensionMismatch(f"exponent p={p} must be a finite value >= 1")
    row = np.concatenate([graph.edge_tail, graph.edge_head])
    col = np.concatenate([graph.edge_head, graph.edge_tail])
    dat = np.concatenate([graph.weights**p, graph.weights**p])
    adj = csr_matrix((dat, (row, col)), shape=(graph.n, graph.n))
    dist = dijkstra(adj, directed=False)
    if p != 1.0:
        dist = dist ** (1.0 / p)
    np.fill_diagonal(dist, 0.0)
    return PathMetric(p=p, dist=dist)


# ---------------------------------------------------------------------------
# probability measures


class Measure:
    """Probability measure on the vertices: nonnegative, sums to one.

    The mass vector is validated, never renormalized; inputs whose total
    differs from 1 by more than 1e-9 are rejected.
    """

    __slots__ = ("m",)

    def __init__(self, mass):
        m = np.asarray(mass, dtype=np.float64)
        if m.ndim != 1 or m.size == 0:
            raise InvalidMeasure(f"mass must be a nonempty vector, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidMeasure("mass contains non-finite entries")
        if np.any(m < -1e-12):
            raise InvalidMeasure(f"negative mass entry {m.min():.3e}")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasure(f"total mass {total!r} differs from 1 beyond 1e-9")
        m = np.where(m < 0, 0.0, m)
        if not np.any(m > 0):
            raise InvalidMeasure("measure has empty support")
        self.m = m
        self.m.setflags(write=False)

    @property
    def n(self):
        return self.m.size

    def support(self):
        return np.flatnonzero(self.m > 0)

    @classmethod
    def delta(cls, n, i):
        m = np.zeros(n)
        m[i] = 1.0
        return cls(m)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))

    def __eq__(self, other):
        return isinstance(other, Measure) and np.array_equal(self.m, other.m)

    def __repr__(self):
        return f"Measure(n={self.n}, support={len(self.support())})"


def as_measure(x, n=None):
    """Coerce an array or Measure; check the length when n is given."""
    mu = x if isinstance(x, Measure) else Measure(x)
    if n is not None and mu.n != n:
        raise DimensionMismatch(f"measure has {mu.n} entries, graph has {n} vertices")
    return mu


# ---------------------------------------------------------------------------
# generators (unit weights)


def path_graph(n):
    return WeightedGraph(n, [(i, i + 1, 1.0) for i in range(n - 1)])


def cycle_graph(n):
    if n < 3:
        raise DimensionMismatch(f"cycle needs n >= 3, got {n}")
    return WeightedGraph(n, [(i, (i + 1) % n, 1.0) for i in range(n)])


def complete_graph(n):
    if n < 2:
        raise DimensionMismatch(f"complete graph needs n >= 2, got {n}")
    return WeightedGraph(
        n, [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)]
    )


def lattice_graph(rows, cols):
    """Rows x cols grid with 4-neighbor connectivity, row-major indexing."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise DimensionMismatch(f"lattice {rows}x{cols} too small")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, 1.0))
            if r + 1 < rows:
                edges.append((v, v + cols, 1.0))
    return WeightedGraph(rows * cols, edges)


def hex_lattice_graph(rows, cols):
    """Honeycomb lattice of rows x cols hexagonal cells.

    Brick-wall construction on a (2*rows + 2) x (cols + 1) grid of points:
    every column is a vertical path, horizontal rungs join columns where
    the parities of the point row and column agree, and the two spare
    corner points are dropped. A 4x4 lattice has 48 vertices.
    """
    if rows < 1 or cols < 1:
        raise DimensionMismatch(f"hex lattice {rows}x{cols} too small")
    big = 2 * rows + 2
    removed = {(0, cols), (big - 1, 0)}
    idx = {}
    for i in range(big):
        for j in range(cols + 1):
            if (i, j) not in removed:
                idx[(i, j)] = len(idx)
    edges = []
    for j in range(cols + 1):
        for i in range(big - 1):
            a, b = (i, j), (i + 1, j)
            if a in idx and b in idx:
                edges.append((idx[a], idx[b], 1.0))
    for i in range(big):
        for j in range(cols):
            if i % 2 == j % 2:
                a, b = (i, j), (i, j + 1)
                if a in idx and b in idx:
                    edges.append((idx[a], idx[b], 1.0))
    return WeightedGraph(len(idx), edges)


def random_tree(seed, n):
    """Uniform random labeled tree on n vertices (Pruefer decoding)."""
    if n < 1:
        raise DimensionMismatch(f"tree needs n >= 1, got {n}")
    if n == 1:
        return WeightedGraph(1, [])
    if n == 2:
        return WeightedGraph(2, [(0, 1, 1.0)])
    rng = np.random.default_rng(seed)
    prufer = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    for v in prufer:
        degree[v] += 1
    edges = []
    import heapq

    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    for v in prufer:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v), 1.0))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v, 1.0))
    return WeightedGraph(n, edges)


# ---------------------------------------------------------------------------
# path recognition (used by the closed-form solvers)


def path_order(graph):
    """Vertex order along a path graph, from its lower-indexed endpoint.

    Raises NotAPath if the graph is not a simple path.
    """
    if graph.n == 1:
        return [0]
    ends = [i for i in range(graph.n) if len(graph.neighbors(i)[0]) == 1]
    interior_ok = all(
        len(graph.neighbors(i)[0]) in (1, 2) for i in range(graph.n)
    )
    if len(ends) != 2 or not interior_ok or graph.m != graph.n - 1:
        raise NotAPath("graph is not a simple path")
    order = [min(ends)]
    prev = -1
    while len(order) < graph.n:
        nbrs = graph.neighbors(order[-1])[0]
        nxt = [int(v) for v in nbrs if v != prev]
        prev = order[-1]
        order.append(nxt[0])
    return order


# ---------------------------------------------------------------------------
# serialization


def graph_to_json(graph):
    """Canonical JSON text: {"n": ..., "edges": [[i, j, w], ...]}."""
    payload = {
        "n": graph.n,
        "edges": [[i, j, w] for i, j, w in graph.edges],
    }
    return json.dumps(payload, sort_keys=True)


def graph_from_json(text):
    data = json.loads(text)
    try:
        return WeightedGraph(data["n"], data["edges"])
    except (KeyError, TypeError) as exc:
        raise DimensionMismatch(f"malformed graph JSON: {exc}") from exc


def graph_to_tsv(graph):
    lines = [f"{i}\t{j}\t{w!r}" for i, j, w in graph.edges]
    return "\n".join(lines) + "\n"


def graph_from_tsv(text, n=None):
    """Parse tab-separated edges "i<TAB>j<TAB>w"; n defaults to max index + 1."""
    edges = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DimensionMismatch(f"line {ln}: expected 'i<TAB>j<TAB>w'")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if n is None:
        if not edges:
            raise DimensionMismatch("empty edge list and no vertex count")
        n = max(max(i, j) for i, j, _ in edges) + 1
    return WeightedGraph(n, edges)


def read_graph(path):
    """Load a graph file, dispatching on the .json / .tsv extension."""
    text = open(path, "r", encoding="utf-8").read()
    if str(path).endswith(".json"):
        return graph_from_json(text)
    return graph_from_tsv(text)


def read_measure(path, n=None):
    """Load a measure from a JSON array or a one-column CSV file."""
    text = open(path, "r", encoding="utf-8").read()
    if str(path).endswith(".json"):
        return as_measure(np.asarray(json.loads(text), dtype=np.float64), n)
    vals = [float(line.strip()) for line in text.splitlines() if line.strip()]
    return as_measure(np.asarray(vals), n)
