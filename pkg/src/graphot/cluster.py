"""Distributional datasets on a base graph: transport kernels, kNN
graphs, spectral clustering, and external cluster evaluation.

The quadratic flow distance between samples reduces to Euclidean
distance between spectral embeddings, so an N-sample kernel matrix
costs one eigendecomposition plus one Gram product. Coupling-based
quadratic Wasserstein distances run one transportation solve per pair
with ground cost equal to the squared shortest-path metric, so they are
exposed both as full matrices (small N) and as subsampled pair lists.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRegressor,
    DimensionMismatch,
    DisconnectedKnn,
    LengthMismatch,
    NegativePixel,
    RaggedRow,
    ShapeMismatch,
    ZeroMassRow,
)
from .graph_core import Measure, WeightedGraph, build_graph, lattice_graph, shortest_path_metric
from .spectral import decompose, embedding_matrix
from .wasserstein import wasserstein


@dataclass
class DistributionalDataset:
    base_graph: WeightedGraph
    samples: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != self.base_graph.n:
            raise DimensionMismatch(
                f"samples have shape {s.shape}, expected (N, {self.base_graph.n})"
            )
        self.samples = s
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (s.shape[0],):
                raise LengthMismatch(
                    f"{lab.shape[0]} labels for {s.shape[0]} samples"
                )
            self.labels = lab.astype(np.int64)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    def measure(self, i):
        return Measure(self.samples[i])


def ingest_csv(path, layout, base):
    """Load rows of nonnegative pixel values and mass-normalize each row.

    layout "pixels_with_label" expects n values plus a trailing integer
    label; "measure_rows" expects exactly n values. Width errors raise
    RaggedRow, negative entries NegativePixel, all-zero rows ZeroMassRow,
    each carrying the offending row index.
    """
    if layout not in ("pixels_with_label", "measure_rows"):
        raise DimensionMismatch(f"unknown layout {layout!r}")
    n = base.n
    expected = n + 1 if layout == "pixels_with_label" else n
    rows = []
    labels = []
    with open(path, newline="") as fh:
        for idx, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != expected:
                raise RaggedRow(
                    f"row {idx} has {len(rec)} fields, expected {expected}"
                )
            vals = np.array([float(x) for x in rec[:n]])
            if np.any(vals < 0):
                raise NegativePixel(f"row {idx} has a negative pixel value")
            total = vals.sum()
            if total <= 0:
                raise ZeroMassRow(f"row {idx} has zero total mass")
            rows.append(vals / total)
            if layout == "pixels_with_label":
                labels.append(int(float(rec[n])))
    samples = np.array(rows)
    return DistributionalDataset(
        base_graph=base,
        samples=samples,
        labels=np.array(labels, dtype=np.int64) if labels else None,
    )


# ---------------------------------------------------------------------------
# distances and kernels


def beckmann2_embeddings(ds):
    """Spectral embeddings X with ||X_i - X_j|| = B_2(sample_i, sample_j)."""
    spec = decompose(ds.base_graph)
    M = embedding_matrix(spec)
    return ds.samples @ M  # M is symmetric


def _euclidean_matrix(X):
    g = X @ X.T
    sq = np.diag(g)
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def pairwise_distances(ds, metric):
    """Full N x N distance matrix for metric "beckmann2" or "wasserstein2".

    beckmann2 embeds every sample once and takes Euclidean distances;
    wasserstein2 runs one transportation solve per pair with squared
    shortest-path ground cost, which is only sensible for small N.
    """
    if metric == "beckmann2":
        return _euclidean_matrix(beckmann2_embeddings(ds))
    if metric != "wasserstein2":
        raise DimensionMismatch(f"unknown metric {metric!r}")
    ground = shortest_path_metric(ds.base_graph, 1.0)
    N = ds.n_samples
    out = np.zeros((N, N))
    for i in range(N):
        mi = ds.measure(i)
        for j in range(i + 1, N):
            sol = wasserstein(ground, mi, ds.measure(j), p=2.0)
            out[i, j] = out[j, i] = sol.distance
    return out


def sample_pair_indices(n_samples, max_pairs, seed):
    """Deterministic sample of distinct unordered index pairs.

    Returns (i_idx, j_idx) with i < j; all pairs when max_pairs covers
    the full triangle.
    """
    total = n_samples * (n_samples - 1) // 2
    if max_pairs is None or max_pairs >= total:
        iu = np.triu_indices(n_samples, k=1)
        return iu[0].astype(np.int64), iu[1].astype(np.int64)
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=int(max_pairs), replace=False)
    flat.sort()
    # invert the row-major triangle enumeration
    i_idx = np.empty(len(flat), dtype=np.int64)
    j_idx = np.empty(len(flat), dtype=np.int64)
    row = 0
    row_start = 0
    row_len = n_samples - 1
    for t, f in enumerate(flat):
        while f >= row_start + row_len:
            row_start += row_len
            row += 1
            row_len = n_samples - 1 - row
        i_idx[t] = row
        j_idx[t] = row + 1 + (f - row_start)
    return i_idx, j_idx


def sampled_pair_distances(ds, i_idx, j_idx, metric):
    """Distances for an explicit pair list, same conventions as above."""
    if metric == "beckmann2":
        X = beckmann2_embeddings(ds)
        return np.linalg.norm(X[i_idx] - X[j_idx], axis=1)
    if metric != "wasserstein2":
        raise DimensionMismatch(f"unknown metric {metric!r}")
    ground = shortest_path_metric(ds.base_graph, 1.0)
    out = np.empty(len(i_idx))
    for t in range(len(i_idx)):
        sol = wasserstein(
            ground, ds.measure(int(i_idx[t])), ds.measure(int(j_idx[t])), p=2.0
        )
        out[t] = sol.distance
    return out


@dataclass
class KernelMatrix:
    """Similarity matrix with entries exp(-d^2); symmetric, unit diagonal."""

    values: np.ndarray
    kind: str

    @staticmethod
    def from_distances(dist, kind):
        return KernelMatrix(values=np.exp(-np.asarray(dist) ** 2), kind=kind)


def knn_graph(dist, k):
    """Union-symmetrized k-nearest-neighbor graph with exp(-d^2) weights.

    Vertex i lists its k nearest others (ties broken by lower index); an
    edge appears when either endpoint lists the other. Raises
    DisconnectedKnn (with the component count) when the result is not
    connected.
    """
    dist = np.asarray(dist, dtype=np.float64)
    N = dist.shape[0]
    if dist.shape != (N, N):
        raise ShapeMismatch(f"distance matrix has shape {dist.shape}")
    k = int(k)
    if not 1 <= k < N:
        raise DimensionMismatch(f"k={k} must satisfy 1 <= k < N={N}")
    pairs = set()
    order_cols = np.arange(N)
    for i in range(N):
        keys = dist[i].copy()
        keys[i] = np.inf
        order = np.lexsort((order_cols, keys))
        for j in order[:k]:
            j = int(j)
            pairs.add((min(i, j), max(i, j)))
    roots = list(range(N))

    def find(x):
        while roots[x] != x:
            roots[x] = roots[roots[x]]
            x = roots[x]
        return x

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            roots[ri] = rj
    n_components = len({find(i) for i in range(N)})
    if n_components > 1:
        raise DisconnectedKnn(
            f"kNN graph with k={k} has {n_components} components",
            n_components=n_components,
        )
    edges = [(i, j, float(np.exp(-dist[i, j] ** 2))) for i, j in sorted(pairs)]
    return build_graph(N, edges)


# ---------------------------------------------------------------------------
# k-means and spectral clustering


def _kmeans_single(X, n_clusters, rng, max_iter=300):
    N = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    # k-means++ seeding
    centers = np.empty((n_clusters, X.shape[1]))
    first = int(rng.integers(N))
    centers[0] = X[first]
    closest = sq + np.einsum("j,j->", centers[0], centers[0]) - 2.0 * (X @ centers[0])
    closest = np.maximum(closest, 0.0)
    for c in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(N))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, N - 1)
        centers[c] = X[idx]
        cand = sq + centers[c] @ centers[c] - 2.0 * (X @ centers[c])
        closest = np.minimum(closest, np.maximum(cand, 0.0))

    labels = np.full(N, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = sq[:, None] + np.einsum("ij,ij->i", centers, centers)[None, :] - 2.0 * (X @ centers.T)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(n_clusters):
            mask = labels == c
            if not np.any(mask):
                # reseed an empty cluster at the worst-served point
                far = int(np.argmax(np.min(d2, axis=1)))
                centers[c] = X[far]
            else:
                centers[c] = X[mask].mean(axis=0)
    d2 = sq[:, None] + np.einsum("ij,ij->i", centers, centers)[None, :] - 2.0 * (X @ centers.T)
    inertia = float(np.maximum(d2[np.arange(N), labels], 0.0).sum())
    return labels, inertia


def kmeans(X, n_clusters, seed, n_init=100):
    """Best-inertia k-means over n_init seeded restarts (k-means++ each)."""
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[0]
    n_clusters = int(n_clusters)
    if not 1 <= n_clusters <= N:
        raise DimensionMismatch(f"n_clusters={n_clusters} outside 1..{N}")
    seeds = np.random.SeedSequence(seed).spawn(n_init)
    best = None
    for ss in seeds:
        rng = np.random.default_rng(ss)
        labels, inertia = _kmeans_single(X, n_clusters, rng)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return best[0]


def spectral_cluster(graph, n_clusters, seed):
    """Normalized spectral clustering labels.

    Bottom n_clusters eigenvectors of the random-walk-normalized
    Laplacian (computed through the symmetric form), rows normalized to
    unit length, clustered by best-of-100 k-means++ restarts.
    """
    n_clusters = int(n_clusters)
    if not 2 <= n_clusters <= graph.n:
        raise DimensionMismatch(
            f"n_clusters={n_clusters} outside 2..{graph.n}"
        )
    d = graph.degrees
    inv_sqrt = 1.0 / np.sqrt(d)
    A = graph.adjacency()
    lsym = np.eye(graph.n) - (inv_sqrt[:, None] * A) * inv_sqrt[None, :]
    lsym = (lsym + lsym.T) / 2.0
    vals, vecs = np.linalg.eigh(lsym)
    U = vecs[:, :n_clusters]
    # back-transform to random-walk eigenvectors, then row-normalize
    V = inv_sqrt[:, None] * U
    norms = np.linalg.norm(V, axis=1)
    norms[norms == 0] = 1.0
    V = V / norms[:, None]
    return kmeans(V, n_clusters, seed, n_init=100)


# ---------------------------------------------------------------------------
# evaluation metrics


@dataclass
class ClusterEvaluation:
    ri: float
    ari: float
    mi: float
    ami: float
    homogeneity: float
    completeness: float

    def to_payload(self):
        return {
            "RI": self.ri,
            "ARI": self.ari,
            "MI": self.mi,
            "AMI": self.ami,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
        }


def _contingency(pred, truth):
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    npred = pi.max() + 1
    ntruth = ti.max() + 1
    table = np.zeros((ntruth, npred), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def _entropy(counts, total):
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


def _expected_mi(row_sums, col_sums, total):
    # hypergeometric expectation of MI under permutations of the labels
    emi = 0.0
    lg = math.lgamma
    for a in row_sums:
        a = int(a)
        for b in col_sums:
            b = int(b)
            lo = max(1, a + b - total)
            hi = min(a, b)
            for nij in range(lo, hi + 1):
                term = (nij / total) * math.log(total * nij / (a * b))
                lp = (
                    lg(a + 1) - lg(nij + 1) - lg(a - nij + 1)
                    + lg(b + 1) - lg(b - nij + 1)
                    + lg(total - a + 1) - lg(total - a - b + nij + 1)
                    - lg(total + 1) + lg(total - b + 1)
                )
                emi += term * math.exp(lp)
    return emi


def evaluate(pred, truth):
    """External clustering metrics from the contingency table.

    RI and ARI count pairwise agreements (ARI adjusted under the
    permutation model); MI uses natural logarithms; AMI normalizes by
    the larger marginal entropy after subtracting the hypergeometric
    expectation; homogeneity and completeness are the conditional
    entropy ratios. All six are invariant to relabeling either side.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(
            f"pred has shape {pred.shape}, truth has shape {truth.shape}"
        )
    N = len(pred)
    if N == 0:
        raise LengthMismatch("cannot evaluate empty label vectors")
    table = _contingency(pred, truth)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    total_pairs = _comb2(np.array([N]))[0]

    sum_cells = float(_comb2(table).sum())
    sum_rows = float(_comb2(rows).sum())
    sum_cols = float(_comb2(cols).sum())
    if total_pairs > 0:
        ri = (total_pairs + 2.0 * sum_cells - sum_rows - sum_cols) / total_pairs
        expected = sum_rows * sum_cols / total_pairs
        denom = 0.5 * (sum_rows + sum_cols) - expected
        numer = sum_cells - expected
        if abs(denom) < 1e-15:
            ari = 1.0 if abs(numer) < 1e-15 else 0.0
        else:
            ari = numer / denom
    else:
        ri, ari = 1.0, 1.0

    h_truth = _entropy(rows, N)
    h_pred = _entropy(cols, N)
    nz = table > 0
    t = table[nz].astype(np.float64)
    r_marg = rows[:, None] * np.ones_like(table)
    c_marg = np.ones_like(table) * cols[None, :]
    mi = float(
        np.sum((t / N) * np.log(N * t / (r_marg[nz] * c_marg[nz])))
    )

    emi = _expected_mi(rows, cols, N)
    normalizer = max(h_truth, h_pred)
    denom = normalizer - emi
    if abs(denom) < 1e-15:
        ami = 1.0 if abs(mi - emi) < 1e-15 else 0.0
    else:
        ami = (mi - emi) / denom

    # H(truth | pred) via the same table
    h_truth_given = 0.0
    h_pred_given = 0.0
    for j in range(table.shape[1]):
        col = table[:, j]
        cj = col.sum()
        if cj > 0:
            h_truth_given += (cj / N) * _entropy(col, cj)
    for i in range(table.shape[0]):
        row = table[i]
        rs = row.sum()
        if rs > 0:
            h_pred_given += (rs / N) * _entropy(row, rs)
    homogeneity = 1.0 if h_truth == 0 else 1.0 - h_truth_given / h_truth
    completeness = 1.0 if h_pred == 0 else 1.0 - h_pred_given / h_pred

    return ClusterEvaluation(
        ri=float(ri),
        ari=float(ari),
        mi=mi,
        ami=float(ami),
        homogeneity=float(homogeneity),
        completeness=float(completeness),
    )


def regression_slope(b2, w2):
    """Least-squares slope through the origin of w2 on b2.

    Accepts two symmetric matrices (upper off-diagonal entries are used)
    or two equal-length 1-D pair vectors.
    """
    b2 = np.asarray(b2, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    if b2.shape != w2.shape:
        raise ShapeMismatch(f"shapes {b2.shape} and {w2.shape} differ")
    if b2.ndim == 2:
        if b2.shape[0] != b2.shape[1]:
            raise ShapeMismatch(f"matrix input must be square, got {b2.shape}")
        if not np.allclose(b2, b2.T, atol=1e-9) or not np.allclose(
            w2, w2.T, atol=1e-9
        ):
            raise ShapeMismatch("matrix input must be symmetric")
        iu = np.triu_indices(b2.shape[0], k=1)
        x, y = b2[iu], w2[iu]
    elif b2.ndim == 1:
        x, y = b2, w2
    else:
        raise ShapeMismatch(f"expected matrices or vectors, got ndim={b2.ndim}")
    denom = float(x @ x)
    if denom <= 0:
        raise DegenerateRegressor("all reference distances are zero")
    return float(x @ y) / denom


# ---------------------------------------------------------------------------
# experiment orchestration


@dataclass
class ClusterExperiment:
    dataset: DistributionalDataset
    distances: np.ndarray
    kernel: KernelMatrix
    labels: np.ndarray
    evaluation: ClusterEvaluation | None
    slope: float | None
    scatter: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None


def run_cluster_experiment(
    ds,
    k,
    n_clusters,
    seed,
    metric="beckmann2",
    with_scatter=False,
    max_pairs=None,
):
    """Distance matrix -> kNN graph -> spectral clustering -> evaluation.

    With with_scatter=True also samples up to max_pairs index pairs,
    computes both distances on them, and fits the through-origin slope
    of the coupling distance on the flow distance.
    """
    dist = pairwise_distances(ds, metric)
    kernel = KernelMatrix.from_distances(dist, metric)
    graph = knn_graph(dist, k)
    labels = spectral_cluster(graph, n_clusters, seed)
    evaluation = (
        evaluate(labels, ds.labels) if ds.labels is not None else None
    )
    slope = None
    scatter = None
    if with_scatter:
        i_idx, j_idx = sample_pair_indices(ds.n_samples, max_pairs, seed)
        if metric == "beckmann2":
            b2_vals = dist[i_idx, j_idx]
        else:
            b2_vals = sampled_pair_distances(ds, i_idx, j_idx, "beckmann2")
        w2_vals = sampled_pair_distances(ds, i_idx, j_idx, "wasserstein2")
        slope = regression_slope(b2_vals, w2_vals)
        scatter = (i_idx, j_idx, b2_vals, w2_vals)
    return ClusterExperiment(
        dataset=ds,
        distances=dist,
        kernel=kernel,
        labels=labels,
        evaluation=evaluation,
        slope=slope,
        scatter=scatter,
    )


def synthetic_two_class_dataset(n_samples=200, seed=0):
    """Bundled stand-in dataset: two blob classes on an 8x8 lattice.

    Each sample is a noisy Gaussian bump centered near one of two
    opposite corners, mass-normalized; labels are the class indices.
    """
    base = lattice_graph(8, 8)
    rng = np.random.default_rng(seed)
    coords = np.array([(r, c) for r in range(8) for c in range(8)], dtype=np.float64)
    centers = np.array([[2.0, 2.0], [5.0, 5.0]])
    samples = np.empty((n_samples, 64))
    labels = np.empty(n_samples, dtype=np.int64)
    for s in range(n_samples):
        cls = s % 2
        jitter = rng.uniform(-1.5, 1.5, size=2)
        mu = centers[cls] + jitter
        d2 = np.sum((coords - mu) ** 2, axis=1)
        bump = np.exp(-d2 / (2.0 * 1.3**2))
        # noise floor keeps every pixel positive and the kNN graph connected
        bump += rng.uniform(0.0, 0.3, size=64)
        samples[s] = bump / bump.sum()
        labels[s] = cls
    return DistributionalDataset(base_graph=base, samples=samples, labels=labels)
