from itertools import product

import numpy as np
import pytest

from comrp.clustering.kmeans import kmeans
from comrp.errors import KTooLarge


def brute_force_best_inertia(x, k):
    """Exhaustive minimum over all assignments of points to k clusters."""
    n = len(x)
    best = np.inf
    for assign in product(range(k), repeat=n):
        assign = np.asarray(assign)
        if len(set(assign.tolist())) < k:
            continue
        total = 0.0
        for c in range(k):
            pts = x[assign == c]
            total += ((pts - pts.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return best


FOUR_POINTS = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])


class TestKMeans:
    def test_four_point_optimum(self):
        # exhaustive check: the {left pair}/{right pair} split is optimal at 1.0
        assert brute_force_best_inertia(FOUR_POINTS, 2) == pytest.approx(1.0)
        r = kmeans(FOUR_POINTS, 2, seed=0)
        assert r.labels[0] == r.labels[1]
        assert r.labels[2] == r.labels[3]
        assert r.labels[0] != r.labels[2]
        assert r.inertia == pytest.approx(1.0)

    def test_identical_points_k1(self):
        x = np.tile([3.0, 4.0], (6, 1))
        r = kmeans(x, 1, seed=5)
        assert np.allclose(r.centroids[0], [3.0, 4.0])
        assert r.inertia == 0.0

    def test_k_equals_n(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(5, 3))
        r = kmeans(x, 5, seed=1)
        assert sorted(r.labels.tolist()) == [0, 1, 2, 3, 4]
        assert r.inertia == pytest.approx(0.0, abs=1e-12)

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kmeans(FOUR_POINTS, 5, seed=0)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 5))
        a = kmeans(x, 4, seed=9)
        b = kmeans(x, 4, seed=9)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.inertia == b.inertia

    def test_plus_plus_near_optimal_small(self):
        # k-means++ inertia within 5% of the exhaustive optimum, best of 20 seeds
        rng = np.random.default_rng(4)
        for trial in range(5):
            n = int(rng.integers(5, 9))
            k = int(rng.integers(2, 4))
            x = rng.normal(size=(n, 2)) * 3
            opt = brute_force_best_inertia(x, k)
            achieved = min(kmeans(x, k, seed=s).inertia for s in range(20))
            assert achieved <= 1.05 * opt + 1e-9

    def test_empty_cluster_reseeded(self):
        # k=3 on three duplicate pairs forces reseeding paths to resolve
        x = np.array([[0.0], [0.0], [5.0], [5.0], [9.0], [9.0]])
        r = kmeans(x, 3, seed=0)
        assert len(set(r.labels.tolist())) == 3
        assert r.inertia == pytest.approx(0.0, abs=1e-12)
