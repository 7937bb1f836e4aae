"""Pure-numpy implementations of the hot kernels.

Reference semantics for the numba twins in ``_kernels_numba``; selected
at import time via the CURLAMR_BACKEND environment variable (see
``backend``).  Volume quadrature weights sum to the reference measure
1/6, so physical element integrals carry the factor 6*vol.
"""

import numpy as np

NAME = "numpy"

# local edge k joins local vertices (EDGE_A[k], EDGE_B[k])
EDGE_A = np.array([0, 0, 0, 1, 1, 2])
EDGE_B = np.array([1, 2, 3, 2, 3, 3])

_CHUNK = 4096


def tet_grads_vols(vertices, tets):
    v = vertices[tets]
    J = v[:, 1:] - v[:, :1]            # rows are edge vectors
    det = np.linalg.det(J)
    vols = np.abs(det) / 6.0
    Jinv = np.linalg.inv(J)
    grads = np.empty((tets.shape[0], 4, 3))
    grads[:, 1:] = np.swapaxes(Jinv, 1, 2)   # row i of J^-T
    grads[:, 0] = -grads[:, 1:].sum(axis=1)
    return grads, vols


def whitney_curls(grads, signs):
    ga = grads[:, EDGE_A]
    gb = grads[:, EDGE_B]
    return 2.0 * signs[:, :, None] * np.cross(ga, gb)


def _basis_at(grads, signs, qp):
    """Whitney basis values, (T, nq, 6, 3); small chunks keep memory flat."""
    la = qp[:, EDGE_A]                 # (nq,6)
    lb = qp[:, EDGE_B]
    ga = grads[:, EDGE_A]              # (T,6,3)
    gb = grads[:, EDGE_B]
    w = la[None, :, :, None] * gb[:, None] - lb[None, :, :, None] * ga[:, None]
    return w * signs[:, None, :, None]


def element_matrices(grads, vols, signs, c_curl, c_mass, qp, qw):
    ntet = grads.shape[0]
    out = np.empty((ntet, 6, 6))
    curls = whitney_curls(grads, signs)
    for s in range(0, ntet, _CHUNK):
        e = min(s + _CHUNK, ntet)
        cc = np.einsum("tic,tjc->tij", curls[s:e], curls[s:e])
        w = _basis_at(grads[s:e], signs[s:e], qp)
        mm = np.einsum("q,tqic,tqjc->tij", qw, w, w) * 6.0
        out[s:e] = (c_curl[s:e] * vols[s:e])[:, None, None] * cc \
            + (c_mass[s:e] * vols[s:e])[:, None, None] * mm
    return out


def rhs_dot_basis(grads, vols, signs, qp, qw, fvals, coef):
    ntet = grads.shape[0]
    out = np.empty((ntet, 6))
    for s in range(0, ntet, _CHUNK):
        e = min(s + _CHUNK, ntet)
        w = _basis_at(grads[s:e], signs[s:e], qp)
        out[s:e] = np.einsum("q,tqic,tqc->ti", qw, w, fvals[s:e]) \
            * (6.0 * coef[s:e] * vols[s:e])[:, None]
    return out


def field_values(grads, signs, coeffs, qp):
    ntet = grads.shape[0]
    nq = qp.shape[0]
    out = np.empty((ntet, nq, 3))
    for s in range(0, ntet, _CHUNK):
        e = min(s + _CHUNK, ntet)
        w = _basis_at(grads[s:e], signs[s:e], qp)
        out[s:e] = np.einsum("ti,tqic->tqc", coeffs[s:e], w)
    return out


def integrate_vec(vols, qw, vals):
    return np.einsum("q,tqc->tc", qw, vals) * (6.0 * vols)[:, None]


def weighted_norm2(vols, qw, coef, vals):
    return np.einsum("q,tqc,tqc->t", qw, vals, vals) * 6.0 * vols * coef


def weighted_dot(vols, qw, coef, a, b):
    return np.einsum("q,tqc,tqc->t", qw, a, b) * 6.0 * vols * coef


def csr_matvec(indptr, indices, data, x):
    prod = data * x[indices]
    n = indptr.shape[0] - 1
    y = np.zeros(n)
    starts = indptr[:-1]
    nonempty = starts < indptr[1:]
    y[nonempty] = np.add.reduceat(prod, starts[nonempty])
    return y


def sgs_apply(indptr, indices, data, diag, r):
    """Symmetric Gauss-Seidel preconditioner solve, M = (D+L) D^-1 (D+U).

    Sequential by nature; the numba twin is the practical path, this one
    exists for backend parity.
    """
    n = r.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = r[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j < i:
                s -= data[k] * y[j]
        y[i] = s / diag[i]
    z = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = diag[i] * y[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j > i:
                s -= data[k] * z[j]
        z[i] = s / diag[i]
    return z
