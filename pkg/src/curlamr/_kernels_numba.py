"""Numba-compiled hot kernels; semantics match ``_kernels_numpy``."""

import numpy as np
from numba import njit

NAME = "numba"

EDGE_A = np.array([0, 0, 0, 1, 1, 2])
EDGE_B = np.array([1, 2, 3, 2, 3, 3])


@njit(cache=True)
def tet_grads_vols(vertices, tets):
    ntet = tets.shape[0]
    grads = np.empty((ntet, 4, 3))
    vols = np.empty(ntet)
    for t in range(ntet):
        p0 = vertices[tets[t, 0]]
        a = vertices[tets[t, 1]] - p0
        b = vertices[tets[t, 2]] - p0
        c = vertices[tets[t, 3]] - p0
        det = (a[0] * (b[1] * c[2] - b[2] * c[1])
               - a[1] * (b[0] * c[2] - b[2] * c[0])
               + a[2] * (b[0] * c[1] - b[1] * c[0]))
        vols[t] = abs(det) / 6.0
        inv = 1.0 / det
        # rows of J^-T: cross products of the opposite edge pair
        grads[t, 1, 0] = (b[1] * c[2] - b[2] * c[1]) * inv
        grads[t, 1, 1] = (b[2] * c[0] - b[0] * c[2]) * inv
        grads[t, 1, 2] = (b[0] * c[1] - b[1] * c[0]) * inv
        grads[t, 2, 0] = (c[1] * a[2] - c[2] * a[1]) * inv
        grads[t, 2, 1] = (c[2] * a[0] - c[0] * a[2]) * inv
        grads[t, 2, 2] = (c[0] * a[1] - c[1] * a[0]) * inv
        grads[t, 3, 0] = (a[1] * b[2] - a[2] * b[1]) * inv
        grads[t, 3, 1] = (a[2] * b[0] - a[0] * b[2]) * inv
        grads[t, 3, 2] = (a[0] * b[1] - a[1] * b[0]) * inv
        for c3 in range(3):
            grads[t, 0, c3] = -(grads[t, 1, c3] + grads[t, 2, c3]
                                + grads[t, 3, c3])
    return grads, vols


@njit(cache=True)
def whitney_curls(grads, signs):
    ntet = grads.shape[0]
    out = np.empty((ntet, 6, 3))
    for t in range(ntet):
        for k in range(6):
            a = EDGE_A[k]
            b = EDGE_B[k]
            s = 2.0 * signs[t, k]
            out[t, k, 0] = s * (grads[t, a, 1] * grads[t, b, 2]
                                - grads[t, a, 2] * grads[t, b, 1])
            out[t, k, 1] = s * (grads[t, a, 2] * grads[t, b, 0]
                                - grads[t, a, 0] * grads[t, b, 2])
            out[t, k, 2] = s * (grads[t, a, 0] * grads[t, b, 1]
                                - grads[t, a, 1] * grads[t, b, 0])
    return out


@njit(cache=True)
def element_matrices(grads, vols, signs, c_curl, c_mass, qp, qw):
    ntet = grads.shape[0]
    nq = qp.shape[0]
    curls = whitney_curls(grads, signs)
    out = np.zeros((ntet, 6, 6))
    w = np.empty((6, 3))
    for t in range(ntet):
        for i in range(6):
            for j in range(6):
                d = (curls[t, i, 0] * curls[t, j, 0]
                     + curls[t, i, 1] * curls[t, j, 1]
                     + curls[t, i, 2] * curls[t, j, 2])
                out[t, i, j] = c_curl[t] * vols[t] * d
        for q in range(nq):
            for k in range(6):
                a = EDGE_A[k]
                b = EDGE_B[k]
                for c3 in range(3):
                    w[k, c3] = signs[t, k] * (qp[q, a] * grads[t, b, c3]
                                              - qp[q, b] * grads[t, a, c3])
            scale = 6.0 * c_mass[t] * vols[t] * qw[q]
            for i in range(6):
                for j in range(6):
                    out[t, i, j] += scale * (w[i, 0] * w[j, 0]
                                             + w[i, 1] * w[j, 1]
                                             + w[i, 2] * w[j, 2])
    return out


@njit(cache=True)
def rhs_dot_basis(grads, vols, signs, qp, qw, fvals, coef):
    ntet = grads.shape[0]
    nq = qp.shape[0]
    out = np.zeros((ntet, 6))
    for t in range(ntet):
        for q in range(nq):
            scale = 6.0 * coef[t] * vols[t] * qw[q]
            for k in range(6):
                a = EDGE_A[k]
                b = EDGE_B[k]
                acc = 0.0
                for c3 in range(3):
                    wv = signs[t, k] * (qp[q, a] * grads[t, b, c3]
                                        - qp[q, b] * grads[t, a, c3])
                    acc += wv * fvals[t, q, c3]
                out[t, k] += scale * acc
    return out


@njit(cache=True)
def field_values(grads, signs, coeffs, qp):
    ntet = grads.shape[0]
    nq = qp.shape[0]
    out = np.zeros((ntet, nq, 3))
    for t in range(ntet):
        for q in range(nq):
            for k in range(6):
                a = EDGE_A[k]
                b = EDGE_B[k]
                ck = coeffs[t, k] * signs[t, k]
                for c3 in range(3):
                    out[t, q, c3] += ck * (qp[q, a] * grads[t, b, c3]
                                           - qp[q, b] * grads[t, a, c3])
    return out


@njit(cache=True)
def integrate_vec(vols, qw, vals):
    ntet = vals.shape[0]
    nq = qw.shape[0]
    out = np.zeros((ntet, 3))
    for t in range(ntet):
        for q in range(nq):
            for c3 in range(3):
                out[t, c3] += qw[q] * vals[t, q, c3]
        for c3 in range(3):
            out[t, c3] *= 6.0 * vols[t]
    return out


@njit(cache=True)
def weighted_norm2(vols, qw, coef, vals):
    ntet = vals.shape[0]
    nq = qw.shape[0]
    out = np.empty(ntet)
    for t in range(ntet):
        acc = 0.0
        for q in range(nq):
            acc += qw[q] * (vals[t, q, 0] ** 2 + vals[t, q, 1] ** 2
                            + vals[t, q, 2] ** 2)
        out[t] = 6.0 * vols[t] * coef[t] * acc
    return out


@njit(cache=True)
def weighted_dot(vols, qw, coef, a, b):
    ntet = a.shape[0]
    nq = qw.shape[0]
    out = np.empty(ntet)
    for t in range(ntet):
        acc = 0.0
        for q in range(nq):
            acc += qw[q] * (a[t, q, 0] * b[t, q, 0] + a[t, q, 1] * b[t, q, 1]
                            + a[t, q, 2] * b[t, q, 2])
        out[t] = 6.0 * vols[t] * coef[t] * acc
    return out


@njit(cache=True)
def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return y


@njit(cache=True)
def sgs_apply(indptr, indices, data, diag, r):
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
