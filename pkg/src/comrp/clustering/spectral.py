"""Normalized spectral clustering (Ng-Jordan-Weiss).

RBF affinity with a median-distance sigma heuristic (or a fixed sigma),
optional symmetrized k-NN sparsification, symmetric normalized Laplacian,
eigenvectors of the k smallest eigenvalues, row normalization, then the
same seeded k-means on the embedding."""

import warnings
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import KTooLarge
from .eigen import eig_symmetric
from .kmeans import kmeans

AFFINITIES = ("rbf_dense", "knn_graph")


@dataclass
class SpectralResult:
    labels: np.ndarray
    sigma: float
    embedding: np.ndarray


def median_sigma(dists):
    """Median off-diagonal pairwise distance; 1.0 when all points coincide."""
    n = dists.shape[0]
    if n < 2:
        return 1.0
    iu = np.triu_indices(n, k=1)
    med = float(np.median(dists[iu]))
    return med if med > 0.0 else 1.0


def rbf_affinity(x, sigma=None, affinity="rbf_dense", knn=10):
    if affinity not in AFFINITIES:
        raise ValueError(f"affinity must be one of {AFFINITIES}")
    sq = _kernels.pairwise_sq_dists(x)
    if sigma is None:
        sigma = median_sigma(np.sqrt(sq))
    a = np.exp(-sq / (2.0 * sigma * sigma))
    np.fill_diagonal(a, 0.0)
    if affinity == "knn_graph":
        n = a.shape[0]
        keep = np.zeros_like(a, dtype=bool)
        order = np.argsort(sq, axis=1, kind="stable")
        for i in range(n):
            picked = [j for j in order[i] if j != i][:knn]
            keep[i, picked] = True
        keep |= keep.T  # symmetrized union of directed k-NN edges
        a = np.where(keep, a, 0.0)
    return a, float(sigma)


def spectral(x, k, seed, sigma=None, affinity="rbf_dense", knn=10,
             max_iter=300, tol=1e-6):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} with only {n} samples")

    a, sigma_used = rbf_affinity(x, sigma=sigma, affinity=affinity, knn=knn)
    deg = a.sum(axis=1)
    if (deg == 0.0).any():
        warnings.warn(
            f"{int((deg == 0).sum())} isolated vertices in the affinity graph",
            stacklevel=2,
        )
    dinv = np.where(deg > 0.0, 1.0 / np.sqrt(np.where(deg > 0.0, deg, 1.0)), 0.0)
    lap = np.eye(n) - dinv[:, None] * a * dinv[None, :]
    lap = 0.5 * (lap + lap.T)
    _, vecs = eig_symmetric(lap)
    emb = vecs[:, :k].copy()
    norms = np.sqrt((emb ** 2).sum(axis=1))
    nz = norms > 0.0
    emb[nz] /= norms[nz, None]
    km = kmeans(emb, k, seed, max_iter=max_iter, tol=tol)
    return SpectralResult(labels=km.labels, sigma=sigma_used, embedding=emb)
