"""Flow-based and coupling-based optimal transport distances on graphs."""

from .analysis import (
    BoundReport,
    CurveSpec,
    SeparationReport,
    benamou_brenier,
    separability_check,
    verify_bounds,
)
from .beckmann import (
    BeckmannSolution,
    EdgeFlow,
    beckmann,
    beckmann_general,
    beckmann_p1,
    beckmann_p2,
    beckmann_path_closed_form,
    beckmann_tree_closed_form,
    conjugate_exponent,
    coupling_to_flow,
    dual_norm,
    dual_value,
    flow_norm,
    tree_flow,
)
from .cluster import (
    ClusterEvaluation,
    ClusterExperiment,
    DistributionalDataset,
    KernelMatrix,
    beckmann2_embeddings,
    evaluate,
    ingest_csv,
    kmeans,
    knn_graph,
    pairwise_distances,
    regression_slope,
    run_cluster_experiment,
    sample_pair_indices,
    sampled_pair_distances,
    spectral_cluster,
    synthetic_two_class_dataset,
)
from .errors import (
    ConvergenceError,
    ConvergenceFailure,
    DegenerateRegressor,
    DimensionMismatch,
    Disconnected,
    DisconnectedKnn,
    DuplicateEdge,
    GraphInputError,
    GraphOTError,
    HorizonExceeded,
    HypothesisFailure,
    InvalidCoupling,
    InvalidCurve,
    InvalidMeasure,
    LengthMismatch,
    NegativePixel,
    NoConvergence,
    NonpositiveWeight,
    NotAPath,
    NotATree,
    NotMeanZero,
    PathNotConnectingPair,
    RaggedRow,
    RuleMismatch,
    SelfLoop,
    ShapeMismatch,
    SingularSystem,
    ZeroMassRow,
)
from .graph_core import (
    IncidenceOperator,
    Measure,
    PathMetric,
    WeightedGraph,
    as_measure,
    build_graph,
    complete_graph,
    cycle_graph,
    graph_from_json,
    graph_from_tsv,
    graph_to_json,
    graph_to_tsv,
    hex_lattice_graph,
    laplacian_apply,
    lattice_graph,
    path_graph,
    path_order,
    random_tree,
    read_graph,
    read_measure,
    shortest_path_metric,
)
from .random_walk import (
    SimulationReport,
    StoppingRuleSpec,
    WalkStats,
    access_time,
    exact_hitting_times,
    exit_frequency_check,
    generalized_commute_resistance,
    green_matrix_from_hitting,
    naive_access_time,
    potential_from_exit_frequencies,
    simulate_walks,
    stationary_distribution,
    transition_matrix,
)
from .spectral import (
    SpectralData,
    decompose,
    embed,
    embedding_matrix,
    first_nonzero_eigenvalue,
    measure_resistance,
    pinv_apply,
    sobolev_h1,
    sobolev_h_minus1,
    spectral_perturbation_cost,
)
from .wasserstein import (
    Coupling,
    WassersteinSolution,
    naive_coupling,
    wasserstein,
    wasserstein_path_closed_form,
)

__version__ = "0.1.0"

__all__ = [
    "BeckmannSolution",
    "BoundReport",
    "ClusterEvaluation",
    "ClusterExperiment",
    "ConvergenceError",
    "ConvergenceFailure",
    "Coupling",
    "CurveSpec",
    "DegenerateRegressor",
    "DimensionMismatch",
    "Disconnected",
    "DisconnectedKnn",
    "DistributionalDataset",
    "DuplicateEdge",
    "EdgeFlow",
    "GraphInputError",
    "GraphOTError",
    "HorizonExceeded",
    "HypothesisFailure",
    "IncidenceOperator",
    "InvalidCoupling",
    "InvalidCurve",
    "InvalidMeasure",
    "KernelMatrix",
    "LengthMismatch",
    "Measure",
    "NegativePixel",
    "NoConvergence",
    "NonpositiveWeight",
    "NotAPath",
    "NotATree",
    "NotMeanZero",
    "PathMetric",
    "PathNotConnectingPair",
    "RaggedRow",
    "RuleMismatch",
    "SelfLoop",
    "SeparationReport",
    "ShapeMismatch",
    "SimulationReport",
    "SingularSystem",
    "SpectralData",
    "StoppingRuleSpec",
    "WalkStats",
    "WassersteinSolution",
    "WeightedGraph",
    "ZeroMassRow",
    "__version__",
    "access_time",
    "as_measure",
    "beckmann",
    "beckmann2_embeddings",
    "beckmann_general",
    "beckmann_p1",
    "beckmann_p2",
    "beckmann_path_closed_form",
    "beckmann_tree_closed_form",
    "benamou_brenier",
    "build_graph",
    "complete_graph",
    "conjugate_exponent",
    "coupling_to_flow",
    "cycle_graph",
    "decompose",
    "dual_norm",
    "dual_value",
    "embed",
    "embedding_matrix",
    "evaluate",
    "exact_hitting_times",
    "exit_frequency_check",
    "first_nonzero_eigenvalue",
    "flow_norm",
    "generalized_commute_resistance",
    "graph_from_json",
    "graph_from_tsv",
    "graph_to_json",
    "graph_to_tsv",
    "green_matrix_from_hitting",
    "hex_lattice_graph",
    "ingest_csv",
    "kmeans",
    "knn_graph",
    "laplacian_apply",
    "lattice_graph",
    "measure_resistance",
    "naive_access_time",
    "naive_coupling",
    "pairwise_distances",
    "path_graph",
    "path_order",
    "pinv_apply",
    "potential_from_exit_frequencies",
    "random_tree",
    "read_graph",
    "read_measure",
    "regression_slope",
    "run_cluster_experiment",
    "sample_pair_indices",
    "sampled_pair_distances",
    "separability_check",
    "shortest_path_metric",
    "simulate_walks",
    "sobolev_h1",
    "sobolev_h_minus1",
    "spectral_cluster",
    "spectral_perturbation_cost",
    "stationary_distribution",
    "synthetic_two_class_dataset",
    "transition_matrix",
    "tree_flow",
    "verify_bounds",
    "wasserstein",
    "wasserstein_path_closed_form",
]
