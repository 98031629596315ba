import numpy as np
import pytest

from graphot import (
    DisconnectedKnn,
    KernelMatrix,
    LengthMismatch,
    NegativePixel,
    RaggedRow,
    ShapeMismatch,
    WeightedGraph,
    ZeroMassRow,
    beckmann2_embeddings,
    beckmann_p2,
    decompose,
    evaluate,
    ingest_csv,
    kmeans,
    knn_graph,
    lattice_graph,
    pairwise_distances,
    regression_slope,
    run_cluster_experiment,
    sample_pair_indices,
    sampled_pair_distances,
    shortest_path_metric,
    spectral_cluster,
    synthetic_two_class_dataset,
    wasserstein,
)
from graphot.errors import DegenerateRegressor

sklearn_metrics = pytest.importorskip("sklearn.metrics", reason="oracle only")


# ---------------------------------------------------------------------------
# ingestion


def test_ingest_pixels_with_label(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("1,0,0,3,7\n\n0,2,2,0,1\n")
    base = lattice_graph(2, 2)
    ds = ingest_csv(str(path), "pixels_with_label", base)
    assert ds.n_samples == 2
    assert list(ds.labels) == [7, 1]
    assert np.allclose(ds.samples.sum(axis=1), 1.0)
    assert np.allclose(ds.measure(0).m, [0.25, 0, 0, 0.75])


def test_ingest_measure_rows(tmp_path):
    path = tmp_path / "rows.csv"
    path.write_text("0.5,0.5,0,0\n0,0,1,1\n")
    ds = ingest_csv(str(path), "measure_rows", lattice_graph(2, 2))
    assert ds.n_samples == 2
    assert ds.labels is None
    assert np.allclose(ds.measure(1).m, [0, 0, 0.5, 0.5])


def test_ingest_errors(tmp_path):
    base = lattice_graph(2, 2)
    ragged = tmp_path / "r.csv"
    ragged.write_text("1,0,0,3,7\n1,0,0,0\n")
    with pytest.raises(RaggedRow, match="row 2"):
        ingest_csv(str(ragged), "pixels_with_label", base)

    negative = tmp_path / "n.csv"
    negative.write_text("1,0,-2,3,7\n")
    with pytest.raises(NegativePixel):
        ingest_csv(str(negative), "pixels_with_label", base)

    empty = tmp_path / "z.csv"
    empty.write_text("0,0,0,0,7\n")
    with pytest.raises(ZeroMassRow):
        ingest_csv(str(empty), "pixels_with_label", base)


# ---------------------------------------------------------------------------
# distances


def test_embeddings_reproduce_flow_distance():
    ds = synthetic_two_class_dataset(n_samples=12, seed=3)
    emb = beckmann2_embeddings(ds)
    spec = decompose(ds.base_graph)
    for i, j in [(0, 1), (2, 9), (4, 11)]:
        want = beckmann_p2(spec, ds.measure(i), ds.measure(j)).distance
        got = float(np.linalg.norm(emb[i] - emb[j]))
        assert got == pytest.approx(want, abs=1e-9)


def test_pairwise_distance_matrices_agree_with_direct_calls():
    ds = synthetic_two_class_dataset(n_samples=8, seed=4)
    d_b2 = pairwise_distances(ds, "beckmann2")
    d_w2 = pairwise_distances(ds, "wasserstein2")
    for mat in (d_b2, d_w2):
        assert np.allclose(mat, mat.T, atol=1e-12)
        assert np.all(np.diag(mat) == 0.0)
    pm = shortest_path_metric(ds.base_graph, 1.0)
    want = wasserstein(pm, ds.measure(2), ds.measure(5), 2.0).distance
    assert d_w2[2, 5] == pytest.approx(want, abs=1e-10)


def test_sample_pair_indices():
    ii, jj = sample_pair_indices(5, max_pairs=100, seed=0)
    assert len(ii) == 10  # full triangle when the budget is loose
    assert np.all(ii < jj)
    ii2, jj2 = sample_pair_indices(40, max_pairs=50, seed=1)
    assert len(ii2) == 50
    pairs = set(zip(ii2.tolist(), jj2.tolist()))
    assert len(pairs) == 50
    ii3, jj3 = sample_pair_indices(40, max_pairs=50, seed=1)
    assert np.array_equal(ii2, ii3) and np.array_equal(jj2, jj3)


def test_sampled_pair_distances_match_matrix():
    ds = synthetic_two_class_dataset(n_samples=8, seed=5)
    ii, jj = sample_pair_indices(8, max_pairs=10, seed=2)
    vals = sampled_pair_distances(ds, ii, jj, "beckmann2")
    full = pairwise_distances(ds, "beckmann2")
    assert np.allclose(vals, full[ii, jj], atol=1e-12)


# ---------------------------------------------------------------------------
# kernel and kNN graph


def test_kernel_from_distances():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    k = KernelMatrix.from_distances(d, kind="beckmann2")
    assert k.values[0, 1] == pytest.approx(np.exp(-1.0))
    assert k.values[0, 0] == pytest.approx(1.0)
    assert k.kind == "beckmann2"


def test_knn_graph_shape_and_weights():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((20, 2))
    dist = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    g = knn_graph(dist, 3)
    assert g.n == 20
    # union symmetrization keeps at least k edges per vertex
    deg = np.zeros(20)
    for i, j, w in g.edges:
        deg[i] += 1
        deg[j] += 1
        assert w == pytest.approx(np.exp(-dist[i, j] ** 2))
    assert deg.min() >= 3


def test_knn_graph_reports_disconnection():
    # two tight clusters far apart, k too small to bridge them
    dist = np.full((6, 6), 100.0)
    np.fill_diagonal(dist, 0.0)
    for block in (range(0, 3), range(3, 6)):
        for i in block:
            for j in block:
                if i != j:
                    dist[i, j] = 1.0
    with pytest.raises(DisconnectedKnn) as exc_info:
        knn_graph(dist, 2)
    assert exc_info.value.n_components == 2


# ---------------------------------------------------------------------------
# kmeans and spectral clustering


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(7)
    blob1 = rng.standard_normal((30, 2)) * 0.05
    blob2 = rng.standard_normal((30, 2)) * 0.05 + np.array([10.0, 0.0])
    x = np.vstack([blob1, blob2])
    labels = kmeans(x, 2, seed=0)
    assert len(set(labels[:30].tolist())) == 1
    assert len(set(labels[30:].tolist())) == 1
    assert labels[0] != labels[30]


def test_kmeans_is_deterministic():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((40, 3))
    l1 = kmeans(x, 4, seed=5)
    l2 = kmeans(x, 4, seed=5)
    assert np.array_equal(l1, l2)


def test_kmeans_survives_duplicate_points():
    x = np.zeros((5, 2))
    labels = kmeans(x, 2, seed=0)
    assert len(labels) == 5


def test_spectral_cluster_splits_weakly_joined_cliques():
    edges = []
    for block, offset in ((range(5), 0), (range(5), 5)):
        for i in block:
            for j in block:
                if i < j:
                    edges.append((i + offset, j + offset, 1.0))
    edges.append((0, 5, 0.01))
    g = WeightedGraph(10, edges)
    labels = spectral_cluster(g, 2, seed=0)
    assert len(set(labels[:5].tolist())) == 1
    assert len(set(labels[5:].tolist())) == 1
    assert labels[0] != labels[5]


# ---------------------------------------------------------------------------
# evaluation metrics


def test_metrics_frozen_example():
    truth = np.array([0, 0, 0, 1, 1, 1])
    pred = np.array([0, 0, 1, 1, 2, 2])
    ev = evaluate(pred, truth)
    assert ev.ari == pytest.approx(0.24242424242424243, abs=1e-12)


def test_metrics_match_sklearn_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = int(rng.integers(6, 40))
        truth = rng.integers(0, 4, size=n)
        pred = rng.integers(0, 5, size=n)
        ev = evaluate(pred, truth)
        assert ev.ari == pytest.approx(
            sklearn_metrics.adjusted_rand_score(truth, pred), abs=1e-10
        )
        assert ev.mi == pytest.approx(
            sklearn_metrics.mutual_info_score(truth, pred), abs=1e-10
        )
        assert ev.ami == pytest.approx(
            sklearn_metrics.adjusted_mutual_info_score(
                truth, pred, average_method="max"
            ),
            abs=1e-8,
        )
        assert ev.homogeneity == pytest.approx(
            sklearn_metrics.homogeneity_score(truth, pred), abs=1e-10
        )
        assert ev.completeness == pytest.approx(
            sklearn_metrics.completeness_score(truth, pred), abs=1e-10
        )
        assert ev.ri == pytest.approx(
            sklearn_metrics.rand_score(truth, pred), abs=1e-10
        )


def test_metrics_perfect_and_degenerate():
    same = np.array([0, 1, 2, 0, 1, 2])
    ev = evaluate(same, same)
    assert ev.ri == 1.0 and ev.ari == 1.0 and ev.ami == pytest.approx(1.0)
    flat = np.zeros(6, dtype=int)
    ev = evaluate(flat, flat)
    assert ev.ari == 1.0
    assert ev.homogeneity == 1.0 and ev.completeness == 1.0


def test_metrics_reject_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate(np.zeros(3, dtype=int), np.zeros(4, dtype=int))


def test_payload_keys():
    ev = evaluate(np.array([0, 1]), np.array([1, 0]))
    assert set(ev.to_payload()) == {
        "RI", "ARI", "MI", "AMI", "homogeneity", "completeness",
    }


# ---------------------------------------------------------------------------
# regression slope


def test_slope_on_vectors():
    x = np.array([1.0, 2.0, 3.0])
    y = 4.0 * x
    assert regression_slope(x, y) == pytest.approx(4.0)
    noisy = y + np.array([0.1, -0.2, 0.1])
    want = float(x @ noisy) / float(x @ x)
    assert regression_slope(x, noisy) == pytest.approx(want)


def test_slope_on_matrices_uses_upper_triangle():
    x = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
    y = 2.0 * x
    assert regression_slope(x, y) == pytest.approx(2.0)


def test_slope_errors():
    with pytest.raises(ShapeMismatch):
        regression_slope(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(DegenerateRegressor):
        regression_slope(np.zeros(3), np.ones(3))


# ---------------------------------------------------------------------------
# end to end on the synthetic dataset


def test_experiment_separates_the_synthetic_classes():
    ds = synthetic_two_class_dataset(n_samples=60, seed=11)
    exp = run_cluster_experiment(ds, k=8, n_clusters=2, seed=0)
    assert exp.evaluation is not None
    assert exp.evaluation.ari > 0.8
    assert exp.slope is None and exp.scatter is None


def test_experiment_scatter_and_slope():
    ds = synthetic_two_class_dataset(n_samples=25, seed=12)
    exp = run_cluster_experiment(
        ds, k=6, n_clusters=2, seed=0, with_scatter=True, max_pairs=50
    )
    i_idx, j_idx, b2_vals, w2_vals = exp.scatter
    assert len(i_idx) == 50
    assert exp.slope == pytest.approx(
        float(b2_vals @ w2_vals) / float(b2_vals @ b2_vals)
    )
    # the coupling distance dominates the flow distance pair by pair
    assert np.all(w2_vals >= b2_vals - 1e-9)
