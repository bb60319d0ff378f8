"""Seeded k-means: k-means++ initialization plus Lloyd iterations.

Fully deterministic for a given seed; every tie breaks toward the lowest
index. Empty clusters are reseeded with the point farthest from its
assigned centroid."""

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import KTooLarge


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int


def _plus_plus_init(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = min(int(np.searchsorted(np.cumsum(d2), r, side="right")), n - 1)
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _fix_empty_clusters(labels, sqd, k):
    reseeded = False
    counts = np.bincount(labels, minlength=k)
    for cid in range(k):
        if counts[cid] == 0:
            far = int(np.argmax(sqd))
            counts[labels[far]] -= 1
            labels[far] = cid
            counts[cid] = 1
            sqd[far] = 0.0
            reseeded = True
    return reseeded


def _means(x, labels, k):
    out = np.empty((k, x.shape[1]))
    for cid in range(k):
        out[cid] = x[labels == cid].mean(axis=0)
    return out


def kmeans(x, k, seed, max_iter=300, tol=1e-6):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} with only {n} samples")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(x, k, rng)
    labels, sqd = _kernels.lloyd_assign(x, centroids)
    reseeded = _fix_empty_clusters(labels, sqd, k)
    prev_inertia = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_centroids = _means(x, labels, k)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        labels, sqd = _kernels.lloyd_assign(x, centroids)
        inertia = float(sqd.sum())
        if not reseeded:
            # Lloyd steps never increase the objective; reseeds may
            assert inertia <= prev_inertia + 1e-9 * max(1.0, prev_inertia)
        prev_inertia = inertia
        reseeded = _fix_empty_clusters(labels, sqd, k)
        if shift < tol:
            break
    centroids = _means(x, labels, k)
    inertia = float(((x - centroids[labels]) ** 2).sum())
    return KMeansResult(labels=labels, centroids=centroids,
                        inertia=inertia, n_iter=n_iter)
