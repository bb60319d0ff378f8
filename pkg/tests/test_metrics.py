import numpy as np
import pytest

from comrp.errors import EmptyMatrix, LabelOutOfRange, ShapeMismatch
from comrp.labeling import IGNORE_VALUE, LabelMap
from comrp.metrics import (ConfusionMatrix, accumulate, iou, merge,
                           per_class_accuracy, pixel_accuracy, report)


def lm(data):
    data = np.asarray(data, dtype=np.uint8)
    return LabelMap("x", data.shape[1], data.shape[0], data)


def naive_iou(gt, pred, c):
    """Oracle: literal pixel-set intersection over union."""
    valid = gt != IGNORE_VALUE
    g = (gt == c) & valid
    p = (pred == c) & valid
    union = (g | p).sum()
    if union == 0:
        return None
    return 100.0 * (g & p).sum() / union


def naive_pa(gt, pred):
    valid = gt != IGNORE_VALUE
    if valid.sum() == 0:
        return None
    return 100.0 * ((gt == pred) & valid).sum() / valid.sum()


class TestAccumulate:
    def test_perfect_prediction_is_diagonal(self):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 4, (8, 8)).astype(np.uint8)
        conf = accumulate(ConfusionMatrix(4), lm(data), lm(data))
        off_diag = conf.counts.copy()
        np.fill_diagonal(off_diag[:, :4], 0)
        assert off_diag.sum() == 0
        assert conf.counts[:, :4].trace() == 64

    def test_total_confusion(self):
        gt = np.zeros((10, 10), dtype=np.uint8)
        pred = np.ones((10, 10), dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        assert conf.counts[0, 1] == 100

    def test_ignored_pixels_excluded(self):
        gt = np.zeros((6, 10), dtype=np.uint8)
        gt.ravel()[:30] = IGNORE_VALUE
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(np.zeros((6, 10))))
        assert conf.ignored_pixels == 30
        assert conf.counts.sum() == 30

    def test_unlabeled_prediction_column(self):
        gt = np.zeros((4, 4), dtype=np.uint8)
        pred = np.full((4, 4), IGNORE_VALUE, dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(3), lm(gt), lm(pred))
        assert conf.counts[0, 3] == 16  # column n = unlabeled prediction

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            accumulate(ConfusionMatrix(2), lm(np.zeros((2, 2))), lm(np.zeros((3, 3))))

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            accumulate(ConfusionMatrix(2), lm(np.full((2, 2), 7)), lm(np.zeros((2, 2))))


class TestIoU:
    def test_perfect(self):
        data = np.zeros((5, 5), dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(1), lm(data), lm(data))
        assert iou(conf, 0) == 100.0

    def test_disjoint(self):
        gt = np.zeros((4, 4), dtype=np.uint8)
        gt[:2] = 1
        pred = np.zeros((4, 4), dtype=np.uint8)
        pred[2:] = 1
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        assert iou(conf, 1) == 0.0

    def test_partial_overlap_two_sixths(self):
        # gt class1 on 4 px, pred class1 on 4 px, overlap 2 -> 2/6
        gt = np.zeros((4, 4), dtype=np.uint8)
        gt[0, 0:4] = 1
        pred = np.zeros((4, 4), dtype=np.uint8)
        pred[0, 2:4] = 1
        pred[1, 0:2] = 1
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        assert iou(conf, 1) == pytest.approx(100.0 * 2 / 6)
        assert iou(conf, 1) == pytest.approx(naive_iou(gt, pred, 1))

    def test_absent_class_is_none(self):
        data = np.zeros((3, 3), dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(4), lm(data), lm(data))
        assert iou(conf, 2) is None

    def test_unpainted_prediction_counts_as_fn(self):
        gt = np.zeros((2, 2), dtype=np.uint8)
        pred = np.full((2, 2), IGNORE_VALUE, dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(1), lm(gt), lm(pred))
        assert iou(conf, 0) == 0.0


class TestPixelAccuracy:
    def test_perfect(self):
        d = np.ones((4, 4), dtype=np.uint8)
        conf = accumulate(ConfusionMatrix(2), lm(d), lm(d))
        assert pixel_accuracy(conf) == 100.0

    def test_half_correct(self):
        gt = np.zeros((2, 2), dtype=np.uint8)
        gt[1] = 1
        pred = np.zeros((2, 2), dtype=np.uint8)
        pred[:, 1] = 1
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        assert pixel_accuracy(conf) == 50.0

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            pixel_accuracy(ConfusionMatrix(2))

    def test_binary_form_on_two_class_map(self):
        rng = np.random.default_rng(1)
        gt = rng.integers(0, 2, (8, 8)).astype(np.uint8)
        pred = rng.integers(0, 2, (8, 8)).astype(np.uint8)
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        # with two classes and no unlabeled pixels, per-class binary accuracy
        # equals overall accuracy
        assert per_class_accuracy(conf, 0) == pytest.approx(pixel_accuracy(conf))


class TestReportAndProperties:
    def test_perfect_all_hundred(self):
        rng = np.random.default_rng(2)
        d = rng.integers(0, 3, (9, 9)).astype(np.uint8)
        rep = report(accumulate(ConfusionMatrix(3), lm(d), lm(d)))
        assert rep.miou == 100.0 and rep.pixel_accuracy == 100.0
        assert all(v == 100.0 for v in rep.per_class_iou)

    def test_single_class_miou_equals_iou(self):
        gt = np.zeros((4, 4), dtype=np.uint8)
        pred = np.zeros((4, 4), dtype=np.uint8)
        pred[0, 0] = 1
        conf = accumulate(ConfusionMatrix(2), lm(gt), lm(pred))
        rep = report(conf)
        assert rep.per_class_presence == [True, True]
        assert rep.miou == pytest.approx((iou(conf, 0) + iou(conf, 1)) / 2)

    def test_oracle_equivalence_random_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            gt = rng.integers(0, n, (12, 12)).astype(np.uint8)
            gt[rng.random((12, 12)) < 0.1] = IGNORE_VALUE
            pred = rng.integers(0, n, (12, 12)).astype(np.uint8)
            pred[rng.random((12, 12)) < 0.1] = IGNORE_VALUE
            conf = accumulate(ConfusionMatrix(n), lm(gt), lm(pred))
            for c in range(n):
                expect = naive_iou(gt, pred, c)
                got = iou(conf, c)
                if expect is None:
                    assert got is None
                else:
                    assert got == pytest.approx(expect, rel=1e-12)
            assert pixel_accuracy(conf) == pytest.approx(naive_pa(gt, pred), rel=1e-12)

    def test_batch_order_independence(self):
        rng = np.random.default_rng(4)
        pairs = []
        for _ in range(10):
            gt = rng.integers(0, 3, (6, 6)).astype(np.uint8)
            pred = rng.integers(0, 3, (6, 6)).astype(np.uint8)
            pairs.append((lm(gt), lm(pred)))
        a = ConfusionMatrix(3)
        for g, p in pairs:
            accumulate(a, g, p)
        b = ConfusionMatrix(3)
        for g, p in reversed(pairs):
            accumulate(b, g, p)
        assert np.array_equal(a.counts, b.counts)
        # pairwise merges give the same totals regardless of chunking
        c = merge(merge(ConfusionMatrix(3), a), ConfusionMatrix(3))
        assert np.array_equal(c.counts, a.counts)

    def test_iou_bounded_by_precision_and_recall(self):
        rng = np.random.default_rng(5)
        gt = rng.integers(0, 3, (20, 20)).astype(np.uint8)
        pred = rng.integers(0, 3, (20, 20)).astype(np.uint8)
        conf = accumulate(ConfusionMatrix(3), lm(gt), lm(pred))
        counts = conf.counts.astype(float)
        for c in range(3):
            tp = counts[c, c]
            precision = 100.0 * tp / counts[:, c].sum()
            recall = 100.0 * tp / counts[c, :].sum()
            v = iou(conf, c)
            assert v <= precision + 1e-9 and v <= recall + 1e-9
