"""Quadrature rules on the reference simplex, triangle and unit interval.

Rules are conical (collapsed Gauss-Jacobi) products, so any polynomial
exactness degree is available; nodes are strictly interior to the cell,
which matters for problems with point/line singularities on entity
boundaries.  Weights sum to the reference measure (1/6 for the
tetrahedron, 1/2 for the triangle, 1 for the interval).
"""

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np


def _gauss_jacobi_01(n, alpha):
    """Nodes/weights on [0,1] for weight (1-t)^alpha, exact to degree 2n-1.

    Golub-Welsch on the (alpha, 0) Jacobi recurrence; affine map from
    [-1, 1] with the weight-normalisation factor 2^(alpha+1) removed.
    """
    if n < 1:
        raise ValueError("need at least one quadrature point")
    a, b = float(alpha), 0.0
    k = np.arange(n, dtype=float)
    diag = np.empty(n)
    with np.errstate(invalid="ignore"):
        diag = (b * b - a * a) / ((2 * k + a + b) * (2 * k + a + b + 2))
    diag[0] = (b - a) / (a + b + 2.0)
    k = np.arange(1, n, dtype=float)
    num = 4 * k * (k + a) * (k + b) * (k + a + b)
    den = (2 * k + a + b) ** 2 * (2 * k + a + b + 1) * (2 * k + a + b - 1)
    offdiag = np.sqrt(num / den)
    J = np.diag(diag)
    if n > 1:
        J += np.diag(offdiag, 1) + np.diag(offdiag, -1)
    x, V = np.linalg.eigh(J)
    # total mass of (1-t)^alpha on [0,1] is 1/(alpha+1)
    w = V[0, :] ** 2 / (alpha + 1.0)
    t = (x + 1.0) / 2.0
    order = np.argsort(t)
    return t[order], w[order]


def _npoints(degree):
    return max(1, (int(degree) + 2) // 2)


@dataclass(frozen=True)
class QuadratureRule:
    """Interior quadrature points in barycentric coordinates plus weights.

    points: (nq, dim+1) barycentric coordinates
    weights: (nq,) summing to the reference measure
    degree: polynomial exactness
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def npoints(self):
        return self.weights.shape[0]


@lru_cache(maxsize=None)
def simplex_rule(degree: int) -> QuadratureRule:
    """Conical-product rule on the reference tetrahedron."""
    n = _npoints(degree)
    t1, w1 = _gauss_jacobi_01(n, 2)
    t2, w2 = _gauss_jacobi_01(n, 1)
    t3, w3 = _gauss_jacobi_01(n, 0)
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                x = t1[i]
                y = t2[j] * (1 - x)
                z = t3[k] * (1 - x - y)
                pts.append((1 - x - y - z, x, y, z))
                wts.append(w1[i] * w2[j] * w3[k])
    points = np.array(pts)
    weights = np.array(wts)
    # collapsed-map Jacobian contributes exactly the Jacobi weights,
    # leaving total mass 1/2 * 1/3 ... = 1/6 after normalisation
    weights *= (1.0 / 6.0) / weights.sum()
    return QuadratureRule(points, weights, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Conical-product rule on the reference triangle."""
    n = _npoints(degree)
    t1, w1 = _gauss_jacobi_01(n, 1)
    t2, w2 = _gauss_jacobi_01(n, 0)
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            x = t1[i]
            y = t2[j] * (1 - x)
            pts.append((1 - x - y, x, y))
            wts.append(w1[i] * w2[j])
    points = np.array(pts)
    weights = np.array(wts)
    weights *= 0.5 / weights.sum()
    return QuadratureRule(points, weights, degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0,1], reported in barycentric form (1-t, t)."""
    n = _npoints(degree)
    x, w = np.polynomial.legendre.leggauss(n)
    t = (x + 1.0) / 2.0
    w = w / 2.0
    order = np.argsort(t)
    points = np.column_stack([1.0 - t[order], t[order]])
    return QuadratureRule(points, w[order], degree)


def simplex_monomial_integral(exponents):
    """Exact integral of a barycentric monomial over the reference simplex.

    For exponents (a, b, c, ...) of the d+1 barycentric coordinates the
    value is a! b! ... / (a + b + ... + d)!, the classical Dirichlet
    formula on the measure-1/d! reference simplex.
    """
    exps = [int(e) for e in exponents]
    d = len(exps) - 1
    num = 1
    for e in exps:
        num *= factorial(e)
    return num / factorial(sum(exps) + d)
