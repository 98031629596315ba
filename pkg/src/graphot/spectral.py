"""Laplacian eigenstructure, pseudoinverse, resistance, Sobolev seminorms.

The pseudoinverse quadratic form r(a, b) = (a-b)^T L^+ (a-b) generalizes
two-point effective resistance to pairs of probability measures; its square
root is computed by the quadratic transport solver and matches Euclidean
distance between the L^{-1/2} embeddings of the measures.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure, NotMeanZero
from .graph_core import as_measure, laplacian_apply

ZERO_TOL = 1e-9
MEAN_ZERO_TOL = 1e-9


class SpectralData:
    """Eigendecomposition of the Laplacian with the zero mode identified.

    Eigenvalues are ascending; those below ``tol`` times the largest are
    clamped to exactly zero. A connected graph must yield exactly one
    zero eigenvalue.
    """

    def __init__(self, graph, eigenvalues, eigenvectors, tol):
        self.graph = graph
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.tol = tol
        self.nonzero = eigenvalues > 0

    @property
    def n(self):
        return self.graph.n

    def inverse_eigenvalues(self):
        """Reciprocals with the zero mode clamped to zero."""
        out = np.zeros_like(self.eigenvalues)
        nz = self.nonzero
        out[nz] = 1.0 / self.eigenvalues[nz]
        return out


def decompose(graph, tol=ZERO_TOL):
    """Dense symmetric eigendecomposition of L with a relative zero clamp."""
    lam, u = np.linalg.eigh(graph.laplacian())
    scale = max(float(lam[-1]), 0.0)
    cutoff = tol * max(scale, 1e-300)
    lam = np.where(np.abs(lam) <= cutoff, 0.0, lam)
    if np.any(lam < 0):
        # PSD up to roundoff; anything below -cutoff means the solve went wrong
        raise ConvergenceFailure(f"negative eigenvalue {lam.min():.3e} after clamp")
    n_zero = int(np.count_nonzero(lam == 0.0))
    if n_zero != 1:
        raise ConvergenceFailure(
            f"expected exactly one zero eigenvalue on a connected graph, got {n_zero}"
        )
    return SpectralData(graph, lam, u, tol)


def pinv_apply(spec, g):
    """Apply the Laplacian pseudoinverse L^+ to a mean-zero vector."""
    g = np.asarray(g, dtype=np.float64)
    if abs(float(g.sum())) > MEAN_ZERO_TOL:
        raise NotMeanZero(f"input sums to {g.sum():.3e}, expected 0")
    coef = spec.eigenvectors.T @ g
    coef *= spec.inverse_eigenvalues()
    out = spec.eigenvectors @ coef
    return out - out.mean()


def measure_resistance(spec, a, b):
    """Quadratic form r(a, b) = (a-b)^T L^+ (a-b) between two measures."""
    a = as_measure(a, spec.n)
    b = as_measure(b, spec.n)
    d = a.m - b.m
    r = float(d @ pinv_apply(spec, d))
    return max(r, 0.0)


def embed(spec, a):
    """L^{-1/2} embedding of a measure, zero mode dropped.

    Euclidean distances between embeddings reproduce sqrt(r(a, b)).
    """
    a = as_measure(a, spec.n)
    coef = spec.eigenvectors.T @ a.m
    inv_sqrt = np.sqrt(spec.inverse_eigenvalues())
    return spec.eigenvectors @ (coef * inv_sqrt)


def embedding_matrix(spec):
    """Symmetric matrix M with M @ a = embed(a); M squares to L^+."""
    inv_sqrt = np.sqrt(spec.inverse_eigenvalues())
    return (spec.eigenvectors * inv_sqrt) @ spec.eigenvectors.T


def sobolev_h1(graph, f):
    """Dirichlet seminorm sqrt(f^T L f) of a vertex function."""
    f = np.asarray(f, dtype=np.float64)
    return float(np.sqrt(max(f @ laplacian_apply(graph, f), 0.0)))


def sobolev_h_minus1(spec, g):
    """Dual seminorm sqrt(g^T L^+ g) of a mean-zero vertex vector."""
    g = np.asarray(g, dtype=np.float64)
    return float(np.sqrt(max(g @ pinv_apply(spec, g), 0.0)))


def spectral_perturbation_cost(spec, da):
    """Energy sum_l c_l^2 / lambda_l of a mean-zero perturbation.

    c_l are the coefficients of ``da`` on the nonzero eigenvectors; the
    value equals r(a, a + da) for any base measure a and is bounded by
    ||da||_2^2 divided by the first nonzero eigenvalue.
    """
    da = np.asarray(da, dtype=np.float64)
    if abs(float(da.sum())) > MEAN_ZERO_TOL:
        raise NotMeanZero(f"perturbation sums to {da.sum():.3e}, expected 0")
    coef = spec.eigenvectors.T @ da
    return float(np.sum(coef**2 * spec.inverse_eigenvalues()))


def first_nonzero_eigenvalue(spec):
    nz = spec.eigenvalues[spec.nonzero]
    return float(nz[0])
