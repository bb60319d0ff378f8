"""Clustering of region feature packs into a ClusterModel.

Four from-scratch methods behind one config: spectral (the default),
k-means, k-medoids, and agglomerative. One seed governs a whole run and
every tie breaks by lowest index, so identical inputs give identical
models."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import _kernels
from ..errors import KTooLarge
from .agglomerative import agglomerative
from .eigen import eig_symmetric
from .kmeans import kmeans
from .kmedoids import kmedoids
from .spectral import spectral

METHODS = ("spectral", "kmeans", "kmedoids", "agglomerative")
DEFAULT_K = 20
EXEMPLARS_PER_CLUSTER = 16


@dataclass(frozen=True)
class SpectralParams:
    affinity: str = "rbf_dense"  # or "knn_graph"
    sigma: float = None  # None = median heuristic
    knn: int = 10


@dataclass(frozen=True)
class ClusterConfig:
    method: str = "spectral"
    k: int = DEFAULT_K
    seed: int = 0
    spectral: SpectralParams = field(default_factory=SpectralParams)
    agglo_linkage: str = "average"
    max_iter: int = 300
    tol: float = 1e-6
    max_exact_n: int = 8000
    l2_normalize: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be > 0")


@dataclass
class ClusterModel:
    assignments: dict  # region_id -> cluster_id, contiguous from 0
    centroids: np.ndarray  # (n_clusters, dim); None on models loaded from JSON
    config: ClusterConfig
    inertia: float
    exemplars: dict  # cluster_id -> list of region_ids nearest the centroid

    @property
    def n_clusters(self):
        return len(self.exemplars)

    def cluster_sizes(self):
        sizes = {}
        for cid in self.assignments.values():
            sizes[cid] = sizes.get(cid, 0) + 1
        return sizes


def _relabel_contiguous(labels):
    """Drop empty cluster ids; keep ascending order of the surviving ids."""
    present = np.unique(labels)
    remap = {int(old): new for new, old in enumerate(present)}
    return np.array([remap[int(l)] for l in labels], dtype=np.int64), len(present)


def _member_means(x, labels, k):
    out = np.empty((k, x.shape[1]))
    for cid in range(k):
        out[cid] = x[labels == cid].mean(axis=0)
    return out


def _exemplars(x, labels, centroids, region_ids, per_cluster=EXEMPLARS_PER_CLUSTER):
    out = {}
    for cid in range(centroids.shape[0]):
        members = np.flatnonzero(labels == cid)
        dists = np.sqrt(((x[members] - centroids[cid]) ** 2).sum(axis=1))
        order = np.lexsort((members, dists))
        out[cid] = [region_ids[members[i]] for i in order[:per_cluster]]
    return out


def _l2_rows(x):
    norms = np.sqrt((x ** 2).sum(axis=1))
    out = x.copy()
    nz = norms > 0.0
    out[nz] /= norms[nz, None]
    return out


def _fit(x, config):
    """Run the configured method; returns (labels, medoid_indices or None, cost or None)."""
    if config.method == "kmeans":
        r = kmeans(x, config.k, config.seed, max_iter=config.max_iter, tol=config.tol)
        return r.labels, None, None
    if config.method == "kmedoids":
        r = kmedoids(x, config.k, config.seed, max_iter=config.max_iter)
        return r.labels, r.medoid_indices, r.cost
    if config.method == "agglomerative":
        r = agglomerative(x, config.k, linkage=config.agglo_linkage)
        return r.labels, None, None
    r = spectral(x, config.k, config.seed, sigma=config.spectral.sigma,
                 affinity=config.spectral.affinity, knn=config.spectral.knn,
                 max_iter=config.max_iter, tol=config.tol)
    return r.labels, None, None


def cluster(pack, config):
    """Cluster a FeaturePack into a ClusterModel keyed by region_id."""
    x = pack.matrix.astype(np.float64)
    n = pack.count
    if config.k > n:
        raise KTooLarge(f"k={config.k} with only {n} regions")
    if config.l2_normalize:
        x = _l2_rows(x)

    if config.method == "spectral" and n > config.max_exact_n:
        # dense eigensolver is quadratic in memory: cluster a seeded uniform
        # subsample, assign the remainder to the nearest original-space centroid
        rng = np.random.default_rng(config.seed)
        idx = np.sort(rng.choice(n, size=config.max_exact_n, replace=False))
        sub_labels, _, _ = _fit(x[idx], config)
        sub_labels, k_eff = _relabel_contiguous(sub_labels)
        centroids = _member_means(x[idx], sub_labels, k_eff)
        labels, _ = _kernels.lloyd_assign(x, centroids)
        medoid_indices, pam_cost = None, None
    else:
        labels, medoid_indices, pam_cost = _fit(x, config)

    labels, k_eff = _relabel_contiguous(labels)
    if config.method == "kmedoids" and medoid_indices is not None:
        centroids = x[medoid_indices]
    else:
        centroids = _member_means(x, labels, k_eff)

    if config.method == "kmedoids" and pam_cost is not None:
        inertia = pam_cost
    else:
        inertia = float(((x - centroids[labels]) ** 2).sum())

    region_ids = list(pack.region_ids)
    assignments = {rid: int(labels[i]) for i, rid in enumerate(region_ids)}
    exemplars = _exemplars(x, labels, centroids, region_ids)
    return ClusterModel(assignments=assignments, centroids=centroids,
                        config=config, inertia=inertia, exemplars=exemplars)


# -- model serialization ------------------------------------------------------

def _config_to_json(config):
    d = asdict(config)
    return d


def config_from_json(d):
    sp = d.get("spectral", {})
    return ClusterConfig(
        method=d.get("method", "spectral"),
        k=d.get("k", DEFAULT_K),
        seed=d.get("seed", 0),
        spectral=SpectralParams(
            affinity=sp.get("affinity", "rbf_dense"),
            sigma=sp.get("sigma"),
            knn=sp.get("knn", 10),
        ),
        agglo_linkage=d.get("agglo_linkage", "average"),
        max_iter=d.get("max_iter", 300),
        tol=d.get("tol", 1e-6),
        max_exact_n=d.get("max_exact_n", 8000),
        l2_normalize=d.get("l2_normalize", False),
    )


def save_model(model, path):
    doc = {
        "method": model.config.method,
        "n_clusters": model.n_clusters,
        "inertia": model.inertia,
        "config": _config_to_json(model.config),
        "assignments": {rid: model.assignments[rid] for rid in sorted(model.assignments)},
        "exemplars": {str(cid): model.exemplars[cid] for cid in sorted(model.exemplars)},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_model(path):
    doc = json.loads(Path(path).read_text())
    return ClusterModel(
        assignments=dict(doc["assignments"]),
        centroids=None,
        config=config_from_json(doc["config"]),
        inertia=doc["inertia"],
        exemplars={int(cid): ids for cid, ids in doc["exemplars"].items()},
    )


__all__ = [
    "METHODS", "DEFAULT_K", "EXEMPLARS_PER_CLUSTER",
    "SpectralParams", "ClusterConfig", "ClusterModel",
    "cluster", "kmeans", "kmedoids", "agglomerative", "spectral", "eig_symmetric",
    "save_model", "load_model", "config_from_json",
]
