"""k-medoids via PAM: greedy BUILD then steepest-descent SWAP.

The objective is the sum of Euclidean distances to the nearest medoid.
Deterministic for a given seed; the seed only breaks BUILD ties."""

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import KTooLarge

_IMPROVEMENT_EPS = 1e-12


@dataclass
class KMedoidsResult:
    labels: np.ndarray
    medoid_indices: np.ndarray
    cost: float
    n_swaps: int


def _pick(candidates, rng):
    if len(candidates) == 1:
        return int(candidates[0])
    return int(candidates[rng.integers(len(candidates))])


def kmedoids(x, k, seed, max_iter=300):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} with only {n} samples")
    d = np.sqrt(_kernels.pairwise_sq_dists(x))
    rng = np.random.default_rng(seed)

    # BUILD: best single medoid, then greedily add the biggest cost reducer
    sums = d.sum(axis=1)
    medoids = [_pick(np.flatnonzero(sums == sums.min()), rng)]
    nearest = d[medoids[0]].copy()
    for _ in range(1, k):
        gains = np.maximum(nearest[None, :] - d, 0.0).sum(axis=1)
        gains[medoids] = -np.inf
        best = gains.max()
        medoids.append(_pick(np.flatnonzero(gains == best), rng))
        nearest = np.minimum(nearest, d[medoids[-1]])
    medoids = sorted(medoids)

    # SWAP: take the best strictly improving (medoid, candidate) exchange
    n_swaps = 0
    rows = np.arange(n)
    for _ in range(max_iter):
        med_arr = np.asarray(medoids)
        dm = d[:, med_arr]
        if k == 1:
            nearest_pos = np.zeros(n, dtype=np.intp)
            nearest_val = dm[:, 0]
            second_val = np.full(n, np.inf)
        else:
            order = np.argsort(dm, axis=1, kind="stable")
            nearest_pos = order[:, 0]
            nearest_val = dm[rows, nearest_pos]
            second_val = dm[rows, order[:, 1]]
        current = float(nearest_val.sum())
        in_set = np.zeros(n, dtype=bool)
        in_set[med_arr] = True
        best_cost = current
        best_swap = None
        for mi in range(k):
            base = np.where(nearest_pos == mi, second_val, nearest_val)
            for h in range(n):
                if in_set[h]:
                    continue
                cost = float(np.minimum(base, d[h]).sum())
                if cost < best_cost - _IMPROVEMENT_EPS:
                    best_cost = cost
                    best_swap = (mi, h)
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        medoids = sorted(medoids)
        n_swaps += 1

    med_arr = np.asarray(medoids)
    labels = np.argmin(d[:, med_arr], axis=1).astype(np.int64)
    cost = float(d[rows, med_arr[labels]].sum())
    return KMedoidsResult(labels=labels, medoid_indices=med_arr,
                          cost=cost, n_swaps=n_swaps)
