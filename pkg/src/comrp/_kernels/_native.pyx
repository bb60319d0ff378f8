# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: pairwise distances, Householder tridiagonalization,
implicit-shift QL, and Lloyd assignment. Signature-compatible with
comrp._kernels.fallback."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot

cnp.import_array()

DEF MAX_ITER_DEFAULT = 50

cdef double _EPS = np.finfo(np.float64).eps


def pairwise_sq_dists(x):
    """Squared Euclidean distance matrix, exactly symmetric, zero diagonal."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0]
    cdef Py_ssize_t dim = xa.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] xv = xa
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                diff = xv[i, k] - xv[j, k]
                acc += diff * diff
            ov[i, j] = acc
            ov[j, i] = acc
    return out


def tred2(a):
    """Householder reduction to tridiagonal form; returns (d, e, q)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] aa = np.array(a, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t n = aa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] av = aa
    cdef double[::1] dv = d
    cdef double[::1] ev = e
    cdef Py_ssize_t i, j, k, l
    cdef double scale, h, hh, f, g

    for i in range(n - 1, 0, -1):
        l = i - 1
        h = 0.0
        scale = 0.0
        if l > 0:
            for k in range(l + 1):
                scale += fabs(av[i, k])
            if scale == 0.0:
                ev[i] = av[i, l]
            else:
                for k in range(l + 1):
                    av[i, k] /= scale
                    h += av[i, k] * av[i, k]
                f = av[i, l]
                g = sqrt(h) if f < 0.0 else -sqrt(h)
                ev[i] = scale * g
                h -= f * g
                av[i, l] = f - g
                f = 0.0
                for j in range(l + 1):
                    av[j, i] = av[i, j] / h
                    g = 0.0
                    for k in range(j + 1):
                        g += av[j, k] * av[i, k]
                    for k in range(j + 1, l + 1):
                        g += av[k, j] * av[i, k]
                    ev[j] = g / h
                    f += ev[j] * av[i, j]
                hh = f / (h + h)
                for j in range(l + 1):
                    f = av[i, j]
                    g = ev[j] - hh * f
                    ev[j] = g
                    for k in range(j + 1):
                        av[j, k] -= f * ev[k] + g * av[i, k]
        else:
            ev[i] = av[i, l]
        dv[i] = h

    dv[0] = 0.0
    ev[0] = 0.0
    for i in range(n):
        if dv[i] != 0.0:
            for j in range(i):
                g = 0.0
                for k in range(i):
                    g += av[i, k] * av[k, j]
                for k in range(i):
                    av[k, j] -= g * av[k, i]
        dv[i] = av[i, i]
        av[i, i] = 1.0
        for j in range(i):
            av[j, i] = 0.0
            av[i, j] = 0.0
    return d, e, aa


def tqli(d, e, z, max_iter=MAX_ITER_DEFAULT):
    """Implicit-shift QL with eigenvector accumulation; ascending output."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.array(d, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ea = np.array(e, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] za = np.array(z, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t n = da.shape[0]
    if n == 1:
        return da, za
    cdef double[::1] dv = da
    cdef double[::1] ev = ea
    cdef double[:, ::1] zv = za
    cdef Py_ssize_t l, m, i, k
    cdef int it, cap = int(max_iter)
    cdef double dd, g, r, s, c, p, f, b
    cdef bint underflow

    for i in range(1, n):
        ev[i - 1] = ev[i]
    ev[n - 1] = 0.0

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = fabs(dv[m]) + fabs(dv[m + 1])
                if fabs(ev[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > cap:
                raise RuntimeError(f"QL failed to converge for index {l}")
            g = (dv[l + 1] - dv[l]) / (2.0 * ev[l])
            r = hypot(g, 1.0)
            g = dv[m] - dv[l] + ev[l] / (g + (fabs(r) if g >= 0.0 else -fabs(r)))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * ev[i]
                b = c * ev[i]
                r = hypot(f, g)
                ev[i + 1] = r
                if r == 0.0:
                    dv[i + 1] -= p
                    ev[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = dv[i + 1] - p
                r = (dv[i] - g) * s + 2.0 * c * b
                p = s * r
                dv[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zv[k, i + 1]
                    zv[k, i + 1] = s * zv[k, i] + c * f
                    zv[k, i] = c * zv[k, i] - s * f
            if underflow:
                continue
            dv[l] -= p
            ev[l] = g
            ev[m] = 0.0

    order = np.argsort(da, kind="stable")
    return da[order], za[:, order]


def lloyd_assign(x, c):
    """Nearest-centroid assignment; ties go to the lowest cluster index."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ca = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0]
    cdef Py_ssize_t k = ca.shape[0]
    cdef Py_ssize_t dim = xa.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sqd = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] xv = xa
    cdef double[:, ::1] cv = ca
    cdef cnp.int64_t[::1] lv = labels
    cdef double[::1] sv = sqd
    cdef Py_ssize_t i, j, t
    cdef double best, acc, diff
    cdef Py_ssize_t best_j
    for i in range(n):
        best = -1.0
        best_j = 0
        for j in range(k):
            acc = 0.0
            for t in range(dim):
                diff = xv[i, t] - cv[j, t]
                acc += diff * diff
            if best < 0.0 or acc < best:
                best = acc
                best_j = j
        lv[i] = best_j
        sv[i] = best
    return labels, sqd
