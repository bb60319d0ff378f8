"""Bottom-up agglomerative clustering with Lance-Williams updates.

Supported linkages: average (on Euclidean distances) and ward (on squared
Euclidean distances). Merge ties break on the lexicographically smallest
(i, j) pair, which row-major argmin gives for free."""

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import KTooLarge

LINKAGES = ("average", "ward")


@dataclass
class AgglomerativeResult:
    labels: np.ndarray
    merge_order: list  # (i, j) pairs, j folded into i


def agglomerative(x, k, linkage="average"):
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} with only {n} samples")

    w = _kernels.pairwise_sq_dists(x)
    if linkage == "average":
        w = np.sqrt(w)
    np.fill_diagonal(w, np.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    merge_order = []

    for _ in range(n - k):
        flat = int(w.argmin())
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        dij = w[i, j]
        t = active.copy()
        t[i] = t[j] = False
        si, sj, st = sizes[i], sizes[j], sizes[t]
        if linkage == "average":
            new = (si * w[i, t] + sj * w[j, t]) / (si + sj)
        else:
            new = ((si + st) * w[i, t] + (sj + st) * w[j, t] - st * dij) / (si + sj + st)
        w[i, t] = new
        w[t, i] = new
        sizes[i] = si + sj
        active[j] = False
        w[j, :] = np.inf
        w[:, j] = np.inf
        members[i].extend(members.pop(j))
        merge_order.append((i, j))

    labels = np.empty(n, dtype=np.int64)
    for label, root in enumerate(sorted(members)):
        labels[members[root]] = label
    return AgglomerativeResult(labels=labels, merge_order=merge_order)
