"""Flow-based transport distances on graphs.

B_p(a, b) = min { ||J||_{w,p} : B J = a - b }

with ||J||_{w,p} = (sum_e |J_e|^p w_e)^{1/p} and B the signed incidence
operator. Three solvers cover the exponent range:

* p = 1: successive-shortest-path minimum-cost flow with node
  potentials. The optimal value equals the 1-Wasserstein distance for
  the weighted shortest-path metric, and the negated potentials are an
  optimal Lipschitz dual certificate.
* p = 2 (quadratic pairing): closed form through the Laplacian
  pseudoinverse, distance^2 = (a-b)^T L^+ (a-b) and flow
  J = W B^T L^+ (a-b). On unit-weight graphs this is the weighted-norm
  minimizer as well; on general weights it is the electrical-energy
  optimum, the quantity that matches effective resistance, commute
  times, and the spectral embedding.
* 1 < p < inf: iteratively reweighted least squares on the smoothed
  objective sum_e w_e (J_e^2 + eps^2)^{p/2} with eps-continuation and a
  duality-gap stopping rule. Every iterate is exactly feasible (a
  spanning-tree correction absorbs linear-solver roundoff), so the
  reported distance is always an upper bound and the certificate a
  lower bound.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    InvalidCoupling,
    NoConvergence,
    NotAPath,
    NotATree,
    PathNotConnectingPair,
)
from .graph_core import WeightedGraph, as_measure, path_order
from .spectral import SpectralData, pinv_apply
from .wasserstein import Coupling

FEASIBILITY_TOL = 1e-8


@dataclass
class EdgeFlow:
    """Signed flow, one value per canonical edge (positive = tail to head)."""

    graph: WeightedGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.graph.m,):
            raise DimensionMismatch(
                f"flow has shape {vals.shape}, expected ({self.graph.m},)"
            )
        self.values = vals

    def divergence(self):
        return self.graph.incidence().apply(self.values)

    def norm(self, p):
        return flow_norm(self.graph, self.values, p)


def flow_norm(graph, values, p):
    """Weighted p-norm (sum_e |J_e|^p w_e)^(1/p) of an edge vector."""
    p = float(p)
    values = np.asarray(values, dtype=np.float64)
    if p == 1.0:
        return float(np.sum(np.abs(values) * graph.weights))
    return float(np.sum(np.abs(values) ** p * graph.weights) ** (1.0 / p))


def conjugate_exponent(p):
    p = float(p)
    if p == 1.0:
        return np.inf
    return p / (p - 1.0)


def dual_norm(graph, edge_values, p):
    """Norm dual to ||.||_{w,p} on edge vectors.

    For q conjugate to p this is (sum_e |x_e|^q w_e^{1-q})^{1/q}; at
    p = 1 it degenerates to max_e |x_e| / w_e, the Lipschitz seminorm of
    a potential whose gradient is x.
    """
    x = np.abs(np.asarray(edge_values, dtype=np.float64))
    if float(p) == 1.0:
        return float(np.max(x / graph.weights)) if x.size else 0.0
    q = conjugate_exponent(p)
    return float(np.sum(x**q * graph.weights ** (1.0 - q)) ** (1.0 / q))


def dual_value(graph, a, b, phi, p):
    """Value of a dual potential, rescaled onto the constraint boundary.

    Returns phi^T (a - b) when ||B^T phi|| is within 1e-9 of the unit
    ball of the dual norm, otherwise divides phi by its constraint norm
    first. Either way the result is a valid lower bound on B_p(a, b).
    """
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (graph.n,):
        raise DimensionMismatch(
            f"potential has shape {phi.shape}, expected ({graph.n},)"
        )
    grad = graph.incidence().apply_transpose(phi)
    dn = dual_norm(graph, grad, p)
    value = float(phi @ (a.m - b.m))
    if dn <= 1.0 + 1e-9:
        return value
    return value / dn


@dataclass
class BeckmannSolution:
    p: float
    distance: float
    flow: EdgeFlow
    potential: np.ndarray | None
    duality_gap: float
    feasibility_residual: float
    iterations: int
    converged: bool
    method: str

    def to_payload(self):
        return {
            "p": self.p,
            "distance": self.distance,
            "duality_gap": self.duality_gap,
            "flow": self.flow.values.tolist(),
            "potential": None
            if self.potential is None
            else np.asarray(self.potential).tolist(),
        }


def _difference(graph, a, b):
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    return a.m - b.m


def _zero_solution(graph, p, method):
    flow = EdgeFlow(graph, np.zeros(graph.m))
    return BeckmannSolution(
        p=float(p),
        distance=0.0,
        flow=flow,
        potential=np.zeros(graph.n),
        duality_gap=0.0,
        feasibility_residual=0.0,
        iterations=0,
        converged=True,
        method=method,
    )


# ---------------------------------------------------------------------------
# p = 2, quadratic pairing


def beckmann_p2(spec, a, b):
    """Quadratic transport through the Laplacian pseudoinverse.

    distance = sqrt((a-b)^T L^+ (a-b)), flow = W B^T f with
    f = L^+ (a-b), and the normalized f is a zero-gap dual certificate.
    Equals the measure effective resistance in squared form and the
    weighted 2-norm optimum on unit-weight graphs.
    """
    if not isinstance(spec, SpectralData):
        raise DimensionMismatch("beckmann_p2 expects SpectralData; call decompose()")
    graph = spec.graph
    d = _difference(graph, a, b)
    if not np.any(d):
        return _zero_solution(graph, 2.0, "spectral")
    f = pinv_apply(spec, d)
    inc = graph.incidence()
    flow_vals = graph.weights * inc.apply_transpose(f)
    distance = float(np.sqrt(max(d @ f, 0.0)))
    if distance > 0:
        phi = f / distance
        lower = float(phi @ d)
        gap = distance - lower
    else:
        phi = np.zeros(graph.n)
        gap = 0.0
    flow = EdgeFlow(graph, flow_vals)
    residual = float(np.max(np.abs(flow.divergence() - d)))
    return BeckmannSolution(
        p=2.0,
        distance=distance,
        flow=flow,
        potential=phi,
        duality_gap=gap,
        feasibility_residual=residual,
        iterations=1,
        converged=True,
        method="spectral",
    )


# ---------------------------------------------------------------------------
# p = 1, minimum-cost flow


def beckmann_p1(graph, a, b):
    """B_1 by successive shortest paths with node potentials.

    Bi-oriented arcs cost w_e per unit in either direction. Each round
    sends flow from the lowest-index excess vertex to its nearest
    deficit vertex along a reduced-cost shortest path; potentials keep
    all residual reduced costs nonnegative, so Dijkstra stays valid and
    -potential is an optimal Lipschitz dual at termination.
    """
    d = _difference(graph, a, b)
    if not np.any(d):
        return _zero_solution(graph, 1.0, "min_cost_flow")
    n, m = graph.n, graph.m
    # arc flows: x[0, e] on tail->head, x[1, e] on head->tail
    x = np.zeros((2, m))
    pi = np.zeros(n)
    excess = d.copy()
    tol = 1e-13
    rounds = 0
    max_rounds = 20 * n * n + 100

    while True:
        sources = np.flatnonzero(excess > tol)
        if len(sources) == 0:
            break
        rounds += 1
        if rounds > max_rounds:
            raise ConvergenceFailure(f"min-cost flow exceeded {max_rounds} rounds")
        s = int(sources[0])

        dist = np.full(n, np.inf)
        dist[s] = 0.0
        # parent arc: (prev vertex, edge id, +1 forward tail->head / -1 reverse, undo flag)
        parent = [None] * n
        settled = np.zeros(n, dtype=bool)
        heap = [(0.0, s)]
        target = -1
        while heap:
            du, u = heapq.heappop(heap)
            if settled[u]:
                continue
            settled[u] = True
            if excess[u] < -tol:
                target = u
                break
            nbrs, ws, eids = graph.neighbors(u)
            for v, w, e in zip(nbrs, ws, eids):
                v, e = int(v), int(e)
                forward = graph.edge_tail[e] == u
                # pushing u -> v: new flow costs +w, undoing opposite flow costs -w
                arc = 0 if forward else 1
                undo_arc = 1 - arc
                cand = []
                cand.append((w, False))
                if x[undo_arc, e] > tol * 0.01:
                    cand.append((-w, True))
                for cost, undo in cand:
                    # invariant keeps reduced costs >= 0 up to roundoff
                    red = max(cost + pi[u] - pi[v], 0.0)
                    nd = du + red
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        parent[v] = (u, e, arc, undo)
                        heapq.heappush(heap, (nd, v))
        if target < 0:
            raise ConvergenceFailure("no deficit vertex reachable; imbalance stuck")

        # capacity along the path: undo steps are capped by existing flow
        delta = min(float(excess[s]), float(-excess[target]))
        v = target
        while v != s:
            u, e, arc, undo = parent[v]
            if undo:
                delta = min(delta, float(x[1 - arc, e]))
            v = u
        v = target
        while v != s:
            u, e, arc, undo = parent[v]
            if undo:
                x[1 - arc, e] -= delta
            else:
                x[arc, e] += delta
            v = u
        excess[s] -= delta
        excess[target] += delta
        dt = dist[target]
        pi += np.where(settled, np.minimum(dist, dt), dt)

    flow_vals = x[0] - x[1]
    flow = EdgeFlow(graph, flow_vals)
    distance = flow_norm(graph, flow_vals, 1.0)
    phi = -pi
    lower = dual_value(graph, a, b, phi, 1.0)
    residual = float(np.max(np.abs(flow.divergence() - d)))
    return BeckmannSolution(
        p=1.0,
        distance=distance,
        flow=flow,
        potential=phi,
        duality_gap=distance - lower,
        feasibility_residual=residual,
        iterations=rounds,
        converged=True,
        method="min_cost_flow",
    )


# ---------------------------------------------------------------------------
# general p, iteratively reweighted least squares


class _TreeRepair:
    """Exact divergence repair on a fixed spanning tree.

    Adds the unique tree flow whose divergence equals a given residual,
    pinning feasibility to accumulation accuracy no matter how badly the
    weighted Laplacian solve is conditioned.
    """

    def __init__(self, graph):
        order = [0]
        parent = {0: (-1, -1)}
        seen = {0}
        k = 0
        while k < len(order):
            u = order[k]
            k += 1
            nbrs, _, eids = graph.neighbors(u)
            for v, e in zip(nbrs, eids):
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    parent[v] = (u, int(e))
                    order.append(v)
        self.graph = graph
        self.order = order
        self.parent = parent


def _tree_repair_flow(repair, r):
    """Tree flow J with (B J) = r (r must sum to ~0)."""
    graph = repair.graph
    vals = np.zeros(graph.m)
    acc = np.asarray(r, dtype=np.float64).copy()
    for v in reversed(repair.order[1:]):
        u, e = repair.parent[v]
        # want (BJ)(v) += acc[v]; column e has +1 at tail, -1 at head
        if graph.edge_tail[e] == v:
            vals[e] += acc[v]
        else:
            vals[e] -= acc[v]
        acc[u] += acc[v]
        acc[v] = 0.0
    return vals


def beckmann_general(graph, a, b, p, gap_tol=1e-8, max_outer=500):
    """B_p for 1 <= p < inf; p = 1 delegates to the min-cost flow solver.

    IRLS on the smoothed objective sum w_e (J_e^2 + eps^2)^{p/2}. The
    smoothing eps starts at 1e-3 and halves (floor 1e-12) whenever
    progress at the current level stalls; each linear step is damped by
    halving until the smoothed objective does not increase (at most 20
    halvings). Iteration stops when the certificate gap drops below
    gap_tol * max(1, distance). Raises NoConvergence (with the best
    iterate attached) if the cap is reached first.
    """
    p = float(p)
    if p == 1.0:
        return beckmann_p1(graph, a, b)
    if not (p > 1.0 and np.isfinite(p)):
        raise DimensionMismatch(f"exponent p={p} must be finite and >= 1")
    d = _difference(graph, a, b)
    if not np.any(d):
        return _zero_solution(graph, p, "irls")

    n, m = graph.n, graph.m
    inc = graph.incidence()
    B = inc.dense()
    w = graph.weights
    repair = _TreeRepair(graph)
    shift = np.full((n, n), 1.0 / n)

    def solve_quadratic(conductance):
        lap = (B * conductance) @ B.T
        lu, piv = scipy.linalg.lu_factor(lap + shift, check_finite=False)
        f = scipy.linalg.lu_solve((lu, piv), d, check_finite=False)
        resid = d - (lap + shift) @ f
        f += scipy.linalg.lu_solve((lu, piv), resid, check_finite=False)
        J = conductance * (B.T @ f)
        J += _tree_repair_flow(repair, d - inc.apply(J))
        return f, J

    def smoothed(J, eps):
        return float(np.sum(w * (J * J + eps * eps) ** (p / 2.0)))

    # start from the weighted-2-norm optimum, which is exact in one solve
    f, J = solve_quadratic(1.0 / w)

    eps = 1e-3
    eps_min = 1e-12
    best = None
    prev_obj = smoothed(J, eps)
    iterations = 0
    while iterations < max_outer:
        iterations += 1
        omega = w * (J * J + eps * eps) ** ((p - 2.0) / 2.0)
        f, J_new = solve_quadratic(1.0 / omega)

        theta = 1.0
        obj_now = smoothed(J, eps)
        J_next = J_new
        for _ in range(20):
            J_next = J + theta * (J_new - J)
            if smoothed(J_next, eps) <= obj_now * (1 + 1e-14) + 1e-300:
                break
            theta *= 0.5
        J = J_next

        primal = flow_norm(graph, J, p)
        grad = inc.apply_transpose(f)
        dn = dual_norm(graph, grad, p)
        if dn > 0:
            phi = f / dn
            lower = float(phi @ d)
        else:
            phi = np.zeros(n)
            lower = 0.0
        gap = primal - lower
        if best is None or gap < best[0]:
            residual = float(np.max(np.abs(inc.apply(J) - d)))
            best = (gap, primal, J.copy(), phi.copy(), residual, iterations)
        if gap <= gap_tol * max(1.0, primal):
            break

        obj = smoothed(J, eps)
        if prev_obj - obj <= 1e-3 * max(obj, 1e-300):
            eps = max(eps * 0.5, eps_min)
            obj = smoothed(J, eps)
        prev_obj = obj
    else:
        gap, primal, Jb, phib, residual, its = best
        sol = BeckmannSolution(
            p=p,
            distance=primal,
            flow=EdgeFlow(graph, Jb),
            potential=phib,
            duality_gap=gap,
            feasibility_residual=residual,
            iterations=iterations,
            converged=False,
            method="irls",
        )
        raise NoConvergence(
            f"IRLS hit the {max_outer}-iteration cap with gap {gap:.3e}",
            best=sol,
            gap=gap,
        )

    gap, primal, Jb, phib, residual, its = best
    return BeckmannSolution(
        p=p,
        distance=primal,
        flow=EdgeFlow(graph, Jb),
        potential=phib,
        duality_gap=gap,
        feasibility_residual=residual,
        iterations=iterations,
        converged=True,
        method="irls",
    )


def beckmann(graph, a, b, p, spec=None, **kwargs):
    """Route to the appropriate solver for the exponent.

    p = 1 uses min-cost flow, p = 2 the pseudoinverse when spectral data
    is supplied (or computed here), anything else IRLS.
    """
    p = float(p)
    if p == 1.0:
        return beckmann_p1(graph, a, b)
    if p == 2.0:
        if spec is None:
            from .spectral import decompose

            spec = decompose(graph)
        return beckmann_p2(spec, a, b)
    return beckmann_general(graph, a, b, p, **kwargs)


# ---------------------------------------------------------------------------
# coupling to flow


def _dijkstra_paths(graph, src):
    """Shortest-path tree from src on w-lengths, deterministic tie-breaking."""
    dist = np.full(graph.n, np.inf)
    dist[src] = 0.0
    pred = np.full(graph.n, -1, dtype=np.int64)
    heap = [(0.0, src)]
    settled = np.zeros(graph.n, dtype=bool)
    while heap:
        du, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        nbrs, ws, _ = graph.neighbors(u)
        for v, w in zip(nbrs, ws):
            v = int(v)
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return pred


def _tree_path(pred, src, dst):
    path = [dst]
    while path[-1] != src:
        prev = int(pred[path[-1]])
        if prev < 0:
            return None
        path.append(prev)
    path.reverse()
    return path


def coupling_to_flow(graph, coupling, paths=None):
    """Route each coupling entry along a path and fold into a signed flow.

    pi_ij units travel the chosen i -> j path (default: weighted
    shortest paths with deterministic tie-breaking); opposite traversals
    of an edge cancel. The result satisfies B J = a - b for the
    coupling's marginals, and its weighted p-norm is an upper bound on
    B_p, never smaller than the optimum.
    """
    cpl = coupling if isinstance(coupling, Coupling) else Coupling(coupling)
    if cpl.n != graph.n:
        raise InvalidCoupling(
            f"coupling is {cpl.n}x{cpl.n}, graph has {graph.n} vertices"
        )
    pi = cpl.pi
    J = np.zeros(graph.m)
    trees = {}
    for i, j in zip(*np.nonzero(pi)):
        i, j = int(i), int(j)
        if i == j:
            continue
        mass = pi[i, j]
        if paths is not None and (i, j) in paths:
            path = list(paths[(i, j)])
            if not path or path[0] != i or path[-1] != j:
                raise PathNotConnectingPair(
                    f"path for ({i},{j}) does not run from {i} to {j}"
                )
        else:
            if i not in trees:
                trees[i] = _dijkstra_paths(graph, i)
            path = _tree_path(trees[i], i, j)
            if path is None:
                raise PathNotConnectingPair(f"no path from {i} to {j}")
        for u, v in zip(path[:-1], path[1:]):
            try:
                e = graph.edge_id(u, v)
            except KeyError:
                raise PathNotConnectingPair(
                    f"path for ({i},{j}) uses missing edge ({u},{v})"
                ) from None
            J[e] += mass if u < v else -mass
    return EdgeFlow(graph, J)


# ---------------------------------------------------------------------------
# closed forms on paths and trees


def beckmann_path_closed_form(graph, a, b, p):
    """B_p on an unweighted path: the p-norm of the cdf difference.

    K_a(k) is the mass of the first k vertices in path order; the unique
    feasible flow puts K_a - K_b on the k-th edge.
    """
    order = path_order(graph)
    if not graph.is_unweighted(tol=0.0):
        raise NotAPath("closed form requires unit edge weights")
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    p = float(p)
    if p < 1.0 or not np.isfinite(p):
        raise DimensionMismatch(f"exponent p={p} must be a finite value >= 1")
    ka = np.cumsum(a.m[order])[:-1]
    kb = np.cumsum(b.m[order])[:-1]
    return float(np.sum(np.abs(ka - kb) ** p) ** (1.0 / p))


def _subtree_masses(graph, mass):
    order = [0]
    parent = np.full(graph.n, -1, dtype=np.int64)
    seen = np.zeros(graph.n, dtype=bool)
    seen[0] = True
    k = 0
    while k < len(order):
        u = order[k]
        k += 1
        nbrs, _, _ = graph.neighbors(u)
        for v in nbrs:
            v = int(v)
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                order.append(v)
    sub = np.asarray(mass, dtype=np.float64).copy()
    for v in reversed(order[1:]):
        sub[parent[v]] += sub[v]
    return sub, parent


def tree_flow(graph, a, b):
    """The unique feasible flow on a tree (independent of the exponent)."""
    if graph.m != graph.n - 1:
        raise NotATree(f"tree needs n-1 edges, got m={graph.m} for n={graph.n}")
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    sub_a, parent = _subtree_masses(graph, a.m)
    sub_b, _ = _subtree_masses(graph, b.m)
    vals = np.zeros(graph.m)
    for e in range(graph.m):
        i, j = int(graph.edge_tail[e]), int(graph.edge_head[e])
        if parent[j] == i:
            # tail keeps the complement of j's subtree
            vals[e] = sub_b[j] - sub_a[j]
        elif parent[i] == j:
            vals[e] = sub_a[i] - sub_b[i]
        else:
            raise NotATree(f"edge ({i},{j}) not part of the spanning structure")
    return EdgeFlow(graph, vals)


def beckmann_tree_closed_form(graph, a, b, p):
    """B_p on a weighted tree: the weighted p-norm of the unique flow."""
    p = float(p)
    if p < 1.0 or not np.isfinite(p):
        raise DimensionMismatch(f"exponent p={p} must be a finite value >= 1")
    flow = tree_flow(graph, a, b)
    return flow.norm(p)
