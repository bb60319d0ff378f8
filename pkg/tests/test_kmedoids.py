from itertools import combinations

import numpy as np
import pytest

from comrp.clustering.kmedoids import kmedoids
from comrp.errors import KTooLarge


def brute_force_cost(x, k):
    """Minimum PAM objective over all C(n, k) medoid subsets."""
    n = len(x)
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2))
    best = np.inf
    for subset in combinations(range(n), k):
        cost = d[:, list(subset)].min(axis=1).sum()
        best = min(best, cost)
    return best


class TestKMedoids:
    def test_collinear_example(self):
        x = np.array([[0.0], [1.0], [2.0], [10.0], [11.0]])
        assert brute_force_cost(x, 2) == pytest.approx(3.0)
        r = kmedoids(x, 2, seed=0)
        assert r.cost == pytest.approx(3.0)

    def test_k_equals_n(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(6, 2))
        r = kmedoids(x, 6, seed=0)
        assert r.cost == 0.0
        assert sorted(r.medoid_indices.tolist()) == list(range(6))

    def test_duplicate_points_zero_cost(self):
        x = np.tile([2.0, 2.0], (7, 1))
        for k in (1, 2, 3):
            assert kmedoids(x, k, seed=3).cost == 0.0

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kmedoids(np.zeros((3, 2)), 4, seed=0)

    def test_matches_brute_force_on_small_sets(self):
        rng = np.random.default_rng(12)
        for trial in range(20):
            n = int(rng.integers(4, 11))
            k = int(rng.integers(1, min(n, 4) + 1))
            x = rng.normal(size=(n, 2)) * 5
            r = kmedoids(x, k, seed=trial)
            assert r.cost == pytest.approx(brute_force_cost(x, k), rel=1e-9)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 4))
        a = kmedoids(x, 5, seed=11)
        b = kmedoids(x, 5, seed=11)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.medoid_indices, b.medoid_indices)

    def test_labels_are_nearest_medoid(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(25, 3))
        r = kmedoids(x, 4, seed=2)
        d = np.sqrt(((x[:, None, :] - x[r.medoid_indices][None, :, :]) ** 2).sum(axis=2))
        assert np.array_equal(r.labels, d.argmin(axis=1))
