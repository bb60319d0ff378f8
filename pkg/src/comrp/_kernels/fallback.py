"""Pure-numpy implementations of the hot numeric kernels.

Mirrors the signatures of the compiled module so either backend can be
swapped in at import time. Correctness twin of _native.pyx; the compiled
version wins on large inputs, this one has no build requirements.
"""

import numpy as np

_EPS = np.finfo(np.float64).eps


def pairwise_sq_dists(x):
    """Squared Euclidean distance matrix, exactly symmetric, zero diagonal."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def tred2(a):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns (d, e, q): diagonal, subdiagonal (e[i] couples rows i-1,i;
    e[0] unused) and the accumulated orthogonal transform with
    q.T @ a @ q tridiagonal.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    q = np.eye(n)
    e = np.zeros(n)
    for i in range(n - 1, 1, -1):
        x = a[i, :i].copy()
        scale = np.abs(x).sum()
        if scale == 0.0:
            e[i] = a[i, i - 1]
            continue
        x /= scale
        h = float(x @ x)
        f = x[-1]
        g = np.sqrt(h) if f < 0.0 else -np.sqrt(h)
        e[i] = scale * g
        h -= f * g
        x[-1] = f - g
        # H = I - x x^T / h reflects the leading i-block; apply H A H there.
        s = a[:i, :i]
        p = s @ x / h
        k = float(x @ p) / (2.0 * h)
        w = p - k * x
        s -= np.outer(w, x) + np.outer(x, w)
        a[i, :i] = 0.0
        a[:i, i] = 0.0
        a[i, i - 1] = e[i]
        a[i - 1, i] = e[i]
        qb = q[:, :i]
        qb -= np.outer(qb @ x, x) / h
    if n > 1:
        e[1] = a[1, 0]
    d = np.diag(a).copy()
    return d, e, q


def tqli(d, e, z, max_iter=50):
    """Implicit-shift QL on a tridiagonal matrix, rotating z alongside.

    d is the diagonal, e the subdiagonal as produced by tred2. Returns
    eigenvalues ascending with matching eigenvector columns. Raises
    RuntimeError when an eigenvalue needs more than max_iter sweeps.
    """
    d = np.array(d, dtype=np.float64, copy=True)
    e = np.array(e, dtype=np.float64, copy=True)
    z = np.array(z, dtype=np.float64, copy=True)
    n = d.shape[0]
    if n == 1:
        return d, z
    e[:-1] = e[1:]
    e[-1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise RuntimeError(f"QL failed to converge for index {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (abs(r) if g >= 0.0 else -abs(r)))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                col = z[:, i + 1].copy()
                z[:, i + 1] = s * z[:, i] + c * col
                z[:, i] = c * z[:, i] - s * col
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]


def lloyd_assign(x, c):
    """Nearest-centroid assignment; ties go to the lowest cluster index.

    Returns (labels, sqdist) where sqdist is the squared distance of each
    point to its assigned centroid.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    xc = x @ c.T
    d = np.einsum("ij,ij->i", x, x)[:, None] + np.einsum("ij,ij->i", c, c)[None, :] - 2.0 * xc
    np.maximum(d, 0.0, out=d)
    labels = np.argmin(d, axis=1).astype(np.int64)
    sqd = d[np.arange(d.shape[0]), labels]
    return labels, sqd
