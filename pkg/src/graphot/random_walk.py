"""Random-walk machinery: hitting times, access times, stopping rules.

The walk is the Markov chain with transition matrix P = D^{-1} A, where
A is the (weighted) adjacency matrix and D the diagonal of weighted
degrees. Exact quantities come from per-target linear solves; the
Monte-Carlo side simulates stopping rules with a per-walk seeded
generator so results are reproducible and independent of execution
order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    HorizonExceeded,
    RuleMismatch,
    SingularSystem,
)
from .graph_core import Measure, WeightedGraph, as_measure

MAX_WALK_STEPS = 10**7


def transition_matrix(graph):
    """Dense row-stochastic P = D^{-1} A."""
    A = graph.adjacency()
    return A / graph.degrees[:, None]


def stationary_distribution(graph):
    """rho_i = d_i / vol(G), the stationary law of the walk."""
    return graph.degrees / graph.volume


@dataclass
class WalkStats:
    """Exact walk quantities: hitting matrix, stationary law, volume."""

    graph: WeightedGraph
    hitting: np.ndarray
    stationary: np.ndarray
    volume: float

    @property
    def n(self):
        return self.graph.n


def exact_hitting_times(graph):
    """Expected hitting times H(i, j) by one linear solve per target.

    For target j the vector h = H(., j) restricted to V minus {j}
    satisfies (I - P) h = 1, with H(j, j) = 0.
    """
    n = graph.n
    P = transition_matrix(graph)
    H = np.zeros((n, n))
    idx = np.arange(n)
    for j in range(n):
        keep = idx[idx != j]
        M = np.eye(n - 1) - P[np.ix_(keep, keep)]
        try:
            h = np.linalg.solve(M, np.ones(n - 1))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(
                f"hitting-time system for target {j} is singular"
            ) from exc
        H[keep, j] = h
    return WalkStats(
        graph=graph,
        hitting=H,
        stationary=stationary_distribution(graph),
        volume=graph.volume,
    )


def _check_same_graph(ws, a, b):
    a = as_measure(a, ws.n)
    b = as_measure(b, ws.n)
    return a, b


def access_time(ws, a, b):
    """Optimal access time H(alpha, beta) = max_j sum_i (a_i - b_i) H(i, j).

    This is the minimum expected duration over stopping rules that start
    at alpha and stop with law beta. With b concentrated at j it reduces
    to sum_i a_i H(i, j).
    """
    a, b = _check_same_graph(ws, a, b)
    column_sums = (a.m - b.m) @ ws.hitting
    return float(np.max(column_sums))


def naive_access_time(ws, a, b):
    """Expected duration of the naive rule: sample j ~ beta, walk to j.

    Equals sum_ij a_i b_j H(i, j), an upper bound on access_time. Unlike
    the optimum it is nonzero even at a = b.
    """
    a, b = _check_same_graph(ws, a, b)
    return float(a.m @ ws.hitting @ b.m)


def generalized_commute_resistance(ws, a, b):
    """Measure effective resistance from access times.

    r_ab = -(1/vol) sum_{i,k} (a_i - b_i)(a_k - b_k) H(i, k), which
    recovers (H(i,j) + H(j,i))/vol for point masses and agrees with
    (a-b)^T L^+ (a-b) in general.
    """
    a, b = _check_same_graph(ws, a, b)
    u = a.m - b.m
    return float(-(u @ ws.hitting @ u) / ws.volume)


def green_matrix_from_hitting(ws):
    """M_ij = (H(rho, j) - H(i, j)) / vol, the hitting-time Green matrix.

    Equals the Laplacian pseudoinverse entrywise exactly when the
    weighted degrees are constant (regular graphs). On any connected
    graph the two agree as quadratic forms on mean-zero vectors, which
    is the content the commute-time identities use; the entrywise gap on
    irregular graphs is a rank-two term of the form 1 x^T + x 1^T.
    """
    h_rho = ws.stationary @ ws.hitting
    return (h_rho[None, :] - ws.hitting) / ws.volume


# ---------------------------------------------------------------------------
# stopping rules and simulation


@dataclass(frozen=True)
class StoppingRuleSpec:
    """One of: naive(target), hit_node(j), fixed_horizon(t).

    The naive rule samples j from the target at walk start and stops on
    first arrival at j, so its stopping law is the target exactly.
    """

    kind: str
    target: Measure | None = None
    node: int | None = None
    horizon: int | None = None

    @staticmethod
    def naive(target):
        target = target if isinstance(target, Measure) else as_measure(target)
        return StoppingRuleSpec(kind="naive", target=target)

    @staticmethod
    def hit_node(j):
        j = int(j)
        if j < 0:
            raise DimensionMismatch(f"hit_node target {j} must be a vertex index")
        return StoppingRuleSpec(kind="hit_node", node=j)

    @staticmethod
    def fixed_horizon(t):
        t = int(t)
        if t < 0:
            raise DimensionMismatch(f"horizon {t} must be nonnegative")
        return StoppingRuleSpec(kind="fixed_horizon", horizon=t)

    def describe(self):
        if self.kind == "naive":
            return "naive"
        if self.kind == "hit_node":
            return f"hit_node({self.node})"
        return f"fixed_horizon({self.horizon})"


@dataclass
class SimulationReport:
    """Monte-Carlo summary over n_walks independent walks.

    exit_frequencies is f-hat(i) = visits-before-stop at i divided by
    n_walks * d_i; lap_mean / lap_se are the per-coordinate mean and
    standard error of L applied to the per-walk degree-normalized visit
    vector, so lap_mean equals L @ exit_frequencies and lap_se supports
    statistical residual tests. net_edge_traversals counts tail-to-head
    steps minus head-to-tail steps per canonical edge.
    """

    rule: StoppingRuleSpec
    n_walks: int
    seed: int
    stop_counts: np.ndarray
    stop_distribution: np.ndarray
    mean_length: float
    se_length: float
    visit_counts: np.ndarray
    exit_frequencies: np.ndarray
    edge_traversals: np.ndarray
    net_edge_traversals: np.ndarray
    lap_mean: np.ndarray
    lap_se: np.ndarray
    start: Measure


def _sampler_tables(graph):
    # per-vertex cumulative weights over the flat neighbor arrays
    cum = np.cumsum(graph.nbr_weight)
    return cum


def _sample_index(rng, cdf):
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def simulate_walks(graph, a, rule, n_walks, seed):
    """Run n_walks independent walks from law a under a stopping rule.

    Each walk w uses np.random.default_rng((seed, w)), so any subset of
    walks can be reproduced independently and the aggregate is invariant
    to execution order. Draw order within a walk: start vertex, then
    (naive only) target vertex, then one uniform draw per step. Raises
    HorizonExceeded if a single walk passes 1e7 steps.
    """
    a = as_measure(a, graph.n)
    n_walks = int(n_walks)
    if n_walks < 1:
        raise DimensionMismatch(f"n_walks={n_walks} must be >= 1")
    if rule.kind == "hit_node" and rule.node >= graph.n:
        raise DimensionMismatch(
            f"hit_node target {rule.node} outside 0..{graph.n - 1}"
        )
    if rule.kind == "naive" and rule.target.n != graph.n:
        raise DimensionMismatch(
            f"naive target has {rule.target.n} entries, graph has {graph.n}"
        )

    n, m = graph.n, graph.m
    start_cdf = np.cumsum(a.m)
    target_cdf = np.cumsum(rule.target.m) if rule.kind == "naive" else None
    offs = graph.nbr_offsets
    nbr = graph.nbr_vertex
    nbr_edge = graph.nbr_edge
    wcum = np.empty(len(nbr))
    for u in range(n):
        lo, hi = offs[u], offs[u + 1]
        wcum[lo:hi] = np.cumsum(graph.nbr_weight[lo:hi])

    stop_counts = np.zeros(n, dtype=np.int64)
    visit_counts = np.zeros(n, dtype=np.int64)
    edge_traversals = np.zeros(m, dtype=np.int64)
    net_edge = np.zeros(m, dtype=np.int64)
    length_sum = 0.0
    length_sq = 0.0
    lap_sum = np.zeros(n)
    lap_sq = np.zeros(n)
    L = graph.laplacian()
    inv_deg = 1.0 / graph.degrees

    for w in range(n_walks):
        rng = np.random.default_rng((seed, w))
        u = _sample_index(rng, start_cdf)
        if rule.kind == "naive":
            stop_at = _sample_index(rng, target_cdf)
        elif rule.kind == "hit_node":
            stop_at = rule.node
        else:
            stop_at = -1
        visits = np.zeros(n)
        steps = 0
        while True:
            if rule.kind == "fixed_horizon":
                if steps >= rule.horizon:
                    break
            elif u == stop_at:
                break
            if steps >= MAX_WALK_STEPS:
                raise HorizonExceeded(
                    f"walk {w} exceeded {MAX_WALK_STEPS} steps without stopping"
                )
            visits[u] += 1.0
            lo, hi = offs[u], offs[u + 1]
            k = lo + int(
                np.searchsorted(wcum[lo:hi], rng.random() * wcum[hi - 1], side="right")
            )
            v = int(nbr[k])
            e = int(nbr_edge[k])
            edge_traversals[e] += 1
            net_edge[e] += 1 if u < v else -1
            u = v
            steps += 1
        stop_counts[u] += 1
        visit_counts += visits.astype(np.int64)
        length_sum += steps
        length_sq += steps * steps
        y = L @ (visits * inv_deg)
        lap_sum += y
        lap_sq += y * y

    mean_length = length_sum / n_walks
    if n_walks > 1:
        var_len = max(length_sq - n_walks * mean_length**2, 0.0) / (n_walks - 1)
        se_length = float(np.sqrt(var_len / n_walks))
        lap_mean = lap_sum / n_walks
        lap_var = np.maximum(lap_sq - n_walks * lap_mean**2, 0.0) / (n_walks - 1)
        lap_se = np.sqrt(lap_var / n_walks)
    else:
        se_length = 0.0
        lap_mean = lap_sum / n_walks
        lap_se = np.zeros(n)

    return SimulationReport(
        rule=rule,
        n_walks=n_walks,
        seed=int(seed),
        stop_counts=stop_counts,
        stop_distribution=stop_counts / n_walks,
        mean_length=float(mean_length),
        se_length=se_length,
        visit_counts=visit_counts,
        exit_frequencies=visit_counts / (n_walks * graph.degrees),
        edge_traversals=edge_traversals,
        net_edge_traversals=net_edge,
        lap_mean=lap_mean,
        lap_se=lap_se,
        start=a,
    )


def _rule_stopping_law(graph, rule, a):
    if rule.kind == "naive":
        return rule.target.m
    if rule.kind == "hit_node":
        law = np.zeros(graph.n)
        law[rule.node] = 1.0
        return law
    law = a.m.copy()
    P = transition_matrix(graph)
    for _ in range(rule.horizon):
        law = law @ P
    return law


def exit_frequency_check(graph, report, a, b):
    """max-norm residual of the conservation identity L f-hat = a - b.

    The rule's stopping law must be b (naive: its target; hit_node j:
    the point mass at j; fixed_horizon t: a P^t), otherwise RuleMismatch
    is raised. The residual tends to 0 as n_walks grows; report.lap_se
    gives per-coordinate standard errors for threshold tests. The
    mean-normalized exit frequencies estimate the transport potential
    L^+ (a - b); see potential_from_exit_frequencies.
    """
    a = as_measure(a, graph.n)
    b = as_measure(b, graph.n)
    law = _rule_stopping_law(graph, report.rule, a)
    if not np.allclose(law, b.m, atol=1e-9, rtol=0.0):
        raise RuleMismatch(
            f"rule {report.rule.describe()} stops with law {np.round(law, 6)}, "
            f"not the supplied b"
        )
    residual = graph.laplacian() @ report.exit_frequencies - (a.m - b.m)
    return float(np.max(np.abs(residual)))


def potential_from_exit_frequencies(report):
    """Mean-normalized exit frequencies, an estimate of L^+ (a - b)."""
    f = report.exit_frequencies
    return f - f.mean()
