"""Classical p-Wasserstein distances on a finite metric via the
transportation simplex.

W_{k,p}(a, b)^p = min_{pi in Pi(a,b)} sum_ij pi_ij k(i,j)^p

The solver restricts to the support of the marginals (zero-mass rows and
columns carry no flow at any vertex of the polytope), initializes with
Vogel's approximation, and runs MODI pivots with lowest-index
tie-breaking until all reduced costs are nonnegative. Basic flows are
recomputed exactly from the final spanning tree, so degeneracy in the
initialization never contaminates the answer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    InvalidCoupling,
    NotAPath,
)
from .graph_core import Measure, PathMetric, as_measure, path_order


class Coupling:
    """Nonnegative matrix with unit total mass; marginals are measures."""

    __slots__ = ("pi",)

    def __init__(self, pi):
        pi = np.asarray(pi, dtype=np.float64)
        if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
            raise InvalidCoupling(f"coupling must be square, got shape {pi.shape}")
        if not np.all(np.isfinite(pi)):
            raise InvalidCoupling("coupling contains non-finite entries")
        if np.any(pi < -1e-12):
            raise InvalidCoupling(f"negative coupling entry {pi.min():.3e}")
        pi = np.where(pi < 0, 0.0, pi)
        total = float(pi.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidCoupling(f"total coupling mass {total!r} differs from 1")
        self.pi = pi

    @property
    def n(self):
        return self.pi.shape[0]

    def first_marginal(self):
        return Measure(self.pi.sum(axis=1))

    def second_marginal(self):
        return Measure(self.pi.sum(axis=0))


def naive_coupling(a, b):
    """Independent coupling a b^T (always feasible, rarely optimal)."""
    a, b = as_measure(a), as_measure(b)
    if a.n != b.n:
        raise DimensionMismatch(f"measure sizes differ: {a.n} vs {b.n}")
    return Coupling(np.outer(a.m, b.m))


@dataclass
class WassersteinSolution:
    p: float
    distance: float
    coupling: Coupling
    row_support: np.ndarray
    col_support: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_support: np.ndarray
    iterations: int

    def reduced_costs(self):
        """cost - u - v on the support problem; >= 0 at optimality."""
        return self.cost_support - self.u[:, None] - self.v[None, :]


# ---------------------------------------------------------------------------
# transportation simplex internals


class _Basis:
    """Spanning tree of the bipartite transportation graph.

    Nodes 0..nr-1 are rows, nr..nr+nc-1 are columns; basic cells are the
    tree edges.
    """

    def __init__(self, nr, nc):
        self.nr = nr
        self.nc = nc
        self.adj = [set() for _ in range(nr + nc)]
        self.cells = set()

    def add(self, r, c):
        self.cells.add((r, c))
        self.adj[r].add(self.nr + c)
        self.adj[self.nr + c].add(r)

    def remove(self, r, c):
        self.cells.discard((r, c))
        self.adj[r].discard(self.nr + c)
        self.adj[self.nr + c].discard(r)

    def node_path(self, start, goal):
        """Unique tree path between two nodes (BFS parent chase)."""
        parent = {start: -1}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                break
            for nxt in self.adj[node]:
                if nxt not in parent:
                    parent[nxt] = node
                    queue.append(nxt)
        path = [goal]
        while path[-1] != start:
            path.append(parent[path[-1]])
        path.reverse()
        return path

    def duals(self, cost):
        """Potentials u, v with cost[r, c] = u[r] + v[c] on basic cells."""
        u = np.zeros(self.nr)
        v = np.zeros(self.nc)
        seen = np.zeros(self.nr + self.nc, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for nxt in self.adj[node]:
                if seen[nxt]:
                    continue
                seen[nxt] = True
                if node < self.nr:
                    v[nxt - self.nr] = cost[node, nxt - self.nr] - u[node]
                else:
                    u[nxt] = cost[nxt, node - self.nr] - v[node - self.nr]
                queue.append(nxt)
        return u, v

    def flows(self, a, b):
        """Exact basic flows for marginals (a, b) by leaf elimination."""
        x = np.zeros((self.nr, self.nc))
        rem_a = a.astype(np.float64).copy()
        rem_b = b.astype(np.float64).copy()
        deg = np.array([len(s) for s in self.adj])
        alive = {cell: True for cell in self.cells}
        incident = [list() for _ in range(self.nr + self.nc)]
        for (r, c) in self.cells:
            incident[r].append((r, c))
            incident[self.nr + c].append((r, c))
        queue = deque(np.flatnonzero(deg == 1).tolist())
        while queue:
            node = queue.popleft()
            cell = next(((r, c) for (r, c) in incident[node] if alive[(r, c)]), None)
            if cell is None:
                continue
            r, c = cell
            if node < self.nr:
                x[r, c] = rem_a[r]
                rem_b[c] -= rem_a[r]
                rem_a[r] = 0.0
                other = self.nr + c
            else:
                x[r, c] = rem_b[c]
                rem_a[r] -= rem_b[c]
                rem_b[c] = 0.0
                other = r
            alive[cell] = False
            deg[node] -= 1
            deg[other] -= 1
            if deg[other] == 1:
                queue.append(other)
        if np.any(x < -1e-9):
            raise ConvergenceFailure(
                f"basis produced negative flow {x.min():.3e}"
            )
        return np.where(x < 0, 0.0, x)


def _vogel_cells(cost, a, b):
    """Vogel's approximation: allocation order for a starting basis."""
    nr, nc = cost.shape
    rem_a = a.copy()
    rem_b = b.copy()
    active_r = np.ones(nr, dtype=bool)
    active_c = np.ones(nc, dtype=bool)
    cells = []

    def allocate(r, c):
        x = min(rem_a[r], rem_b[c])
        cells.append((r, c))
        rem_a[r] -= x
        rem_b[c] -= x
        row_done = rem_a[r] <= 0
        col_done = rem_b[c] <= 0
        if row_done and col_done:
            # degenerate double hit: close only the row unless it is the
            # last one, otherwise the column would strand remaining rows
            if active_r.sum() > 1:
                active_r[r] = False
            else:
                active_r[r] = False
                active_c[c] = False
        elif row_done:
            active_r[r] = False
        elif col_done:
            active_c[c] = False

    while active_r.any() and active_c.any():
        rows = np.flatnonzero(active_r)
        cols = np.flatnonzero(active_c)
        if len(cols) == 1:
            c = cols[0]
            for r in rows:
                allocate(r, c)
            break
        if len(rows) == 1:
            r = rows[0]
            for c in cols:
                allocate(r, c)
            break
        sub = cost[np.ix_(rows, cols)]
        two_r = np.partition(sub, 1, axis=1)[:, :2]
        two_c = np.partition(sub, 1, axis=0)[:2, :]
        pen_r = two_r[:, 1] - two_r[:, 0]
        pen_c = two_c[1, :] - two_c[0, :]
        ir = int(np.argmax(pen_r))
        ic = int(np.argmax(pen_c))
        if pen_r[ir] >= pen_c[ic]:
            r = rows[ir]
            c = cols[int(np.argmin(sub[ir]))]
        else:
            c = cols[ic]
            r = rows[int(np.argmin(sub[:, ic]))]
        allocate(r, c)
    return cells


def _spanning_basis(cells, nr, nc):
    """Acyclic subset of cells completed to a spanning tree, lowest index first."""
    parent = list(range(nr + nc))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    basis = _Basis(nr, nc)

    def try_add(r, c):
        ra, rb = find(r), find(nr + c)
        if ra == rb:
            return False
        parent[ra] = rb
        basis.add(r, c)
        return True

    for r, c in cells:
        try_add(r, c)
    if len(basis.cells) < nr + nc - 1:
        for r in range(nr):
            for c in range(nc):
                if len(basis.cells) == nr + nc - 1:
                    break
                try_add(r, c)
    return basis


def _transportation_simplex(cost, a, b):
    """Solve min <x, cost> over the transportation polytope of (a, b).

    Returns (flows, u, v, pivots). Marginals must be strictly positive
    and sum to the same total.
    """
    nr, nc = cost.shape
    basis = _spanning_basis(_vogel_cells(cost, a, b), nr, nc)
    scale = max(1.0, float(np.abs(cost).max()))
    opt_tol = 1e-11 * scale
    max_pivots = 200 + 20 * nr * nc
    bland_after = 50 + 10 * (nr + nc)

    pivots = 0
    x = basis.flows(a, b)
    while True:
        u, v = basis.duals(cost)
        reduced = cost - u[:, None] - v[None, :]
        if pivots < bland_after:
            flat = int(np.argmin(reduced))
            er, ec = divmod(flat, nc)
            if reduced[er, ec] >= -opt_tol:
                break
        else:
            # Bland's rule guards against cycling on degenerate pivots
            neg = np.argwhere(reduced < -opt_tol)
            if len(neg) == 0:
                break
            er, ec = map(int, neg[0])
        pivots += 1
        if pivots > max_pivots:
            raise ConvergenceFailure(f"simplex exceeded {max_pivots} pivots")

        nodes = basis.node_path(er, nr + ec)
        cycle_cells = []
        for k in range(len(nodes) - 1):
            p, q = nodes[k], nodes[k + 1]
            r, c = (p, q - nr) if p < nr else (q, p - nr)
            sign = -1.0 if k % 2 == 0 else 1.0
            cycle_cells.append((r, c, sign))
        losers = [(x[r, c], r, c) for r, c, s in cycle_cells if s < 0]
        theta = min(val for val, _, _ in losers)
        leave = min((r, c) for val, r, c in losers if val <= theta)
        x[er, ec] += theta
        for r, c, sign in cycle_cells:
            x[r, c] += sign * theta
        basis.remove(*leave)
        basis.add(er, ec)
        x[leave] = 0.0
        if pivots % 64 == 0:
            x = basis.flows(a, b)

    x = basis.flows(a, b)
    u, v = basis.duals(cost)
    return x, u, v, pivots


# ---------------------------------------------------------------------------
# public solvers


def wasserstein(k, a, b, p=1.0):
    """p-Wasserstein distance for ground metric k (matrix or PathMetric).

    Cost entries are k(i, j)^p; the returned distance is the p-th root of
    the optimal cost, the coupling is a vertex of the transportation
    polytope, and (u, v) are optimal duals of the support-restricted
    problem.
    """
    kmat = k.dist if isinstance(k, PathMetric) else np.asarray(k, dtype=np.float64)
    a, b = as_measure(a), as_measure(b)
    n = a.n
    p = float(p)
    if p < 1.0 or not np.isfinite(p):
        raise DimensionMismatch(f"exponent p={p} must be a finite value >= 1")
    if kmat.shape != (n, n):
        raise DimensionMismatch(f"cost matrix shape {kmat.shape}, expected {(n, n)}")
    if b.n != n:
        raise DimensionMismatch(f"measure sizes differ: {n} vs {b.n}")
    if np.any(kmat < 0) or not np.all(np.isfinite(kmat)):
        raise DimensionMismatch("ground metric must be finite and nonnegative")

    ia = a.support()
    ib = b.support()
    cost = kmat[np.ix_(ia, ib)] ** p
    x, u, v, pivots = _transportation_simplex(cost, a.m[ia], b.m[ib])

    pi = np.zeros((n, n))
    pi[np.ix_(ia, ib)] = x
    value = float(np.sum(x * cost))
    distance = max(value, 0.0) ** (1.0 / p)
    return WassersteinSolution(
        p=p,
        distance=float(distance),
        coupling=Coupling(pi),
        row_support=ia,
        col_support=ib,
        u=u,
        v=v,
        cost_support=cost,
        iterations=pivots,
    )


def wasserstein_path_closed_form(graph, a, b, p=1.0):
    """W_p on an unweighted path by the quantile-function formula.

    With vertices laid out at unit spacing along the path, the distance
    is the L^p norm of the difference of inverse cdfs:
    (integral_0^1 |F_a^{-1}(t) - F_b^{-1}(t)|^p dt)^{1/p}.
    """
    order = path_order(graph)
    if not graph.is_unweighted(tol=0.0):
        raise NotAPath("closed form requires unit edge weights")
    a, b = as_measure(a, graph.n), as_measure(b, graph.n)
    p = float(p)
    if p < 1.0 or not np.isfinite(p):
        raise DimensionMismatch(f"exponent p={p} must be a finite value >= 1")
    ca = np.cumsum(a.m[order])
    cb = np.cumsum(b.m[order])
    ts = np.unique(np.concatenate([[0.0], ca, cb, [1.0]]))
    ts = ts[(ts >= 0.0) & (ts <= 1.0)]
    dt = np.diff(ts)
    mid = (ts[:-1] + ts[1:]) / 2.0
    xa = np.searchsorted(ca, mid, side="left")
    xb = np.searchsorted(cb, mid, side="left")
    val = float(np.sum(dt * np.abs(xa - xb) ** p))
    return val ** (1.0 / p)
