import numpy as np
import pytest

from comrp.clustering.agglomerative import agglomerative
from comrp.errors import KTooLarge

# two tight pairs far apart: any sane linkage groups the pairs
PAIRS = np.array([[0.0, 0.0], [0.0, 0.4], [30.0, 0.0], [30.0, 0.4]])


class TestAgglomerative:
    def test_pairs_grouped(self):
        r = agglomerative(PAIRS, 2, "average")
        assert r.labels[0] == r.labels[1]
        assert r.labels[2] == r.labels[3]
        assert r.labels[0] != r.labels[2]

    def test_average_and_ward_agree_on_pairs(self):
        a = agglomerative(PAIRS, 2, "average").labels
        w = agglomerative(PAIRS, 2, "ward").labels
        assert np.array_equal(a, w)

    def test_k_equals_n_singletons(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 3))
        r = agglomerative(x, 6)
        assert sorted(r.labels.tolist()) == list(range(6))

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            agglomerative(PAIRS, 5)

    def test_unknown_linkage(self):
        with pytest.raises(ValueError):
            agglomerative(PAIRS, 2, "single")

    def test_tie_break_lexicographic(self):
        # four equidistant colinear points: first merge must be (0, 1)
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        r = agglomerative(x, 3, "average")
        assert r.merge_order[0] == (0, 1)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 4))
        a = agglomerative(x, 5, "ward")
        b = agglomerative(x, 5, "ward")
        assert np.array_equal(a.labels, b.labels)

    def test_average_linkage_chain(self):
        # a chain plus an outlier: the outlier stays alone at k=2
        x = np.array([[0.0], [1.0], [2.0], [3.0], [50.0]])
        r = agglomerative(x, 2, "average")
        assert r.labels[4] != r.labels[0]
        assert len(set(r.labels[:4].tolist())) == 1

    def test_ward_prefers_balanced_merges(self):
        rng = np.random.default_rng(8)
        a = rng.normal((0, 0), 0.3, (10, 2))
        b = rng.normal((8, 0), 0.3, (12, 2))
        c = rng.normal((0, 8), 0.3, (11, 2))
        x = np.vstack([a, b, c])
        r = agglomerative(x, 3, "ward")
        for lo, hi in ((0, 10), (10, 22), (22, 33)):
            assert len(set(r.labels[lo:hi].tolist())) == 1
