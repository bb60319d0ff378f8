"""Confusion-matrix accumulation and segmentation metrics.

Per-class IoU = TP / (TP + FP + FN) and overall pixel accuracy
= correct / valid, both as percentages. Pixels the prediction left
unpainted (255) are tallied in an extra column (class index n) so
clustering-stage pseudo-labels are scoreable; they count as FN for the
ground-truth class. Ground-truth 255 pixels are excluded entirely.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyMatrix, LabelOutOfRange, ShapeMismatch
from .labeling import IGNORE_VALUE


@dataclass
class ConfusionMatrix:
    n_classes: int
    counts: np.ndarray = None  # (n_classes, n_classes + 1), counts[gt][pred]
    ignored_pixels: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.n_classes, self.n_classes + 1), dtype=np.uint64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.uint64)
            if self.counts.shape != (self.n_classes, self.n_classes + 1):
                raise ValueError(f"counts shape {self.counts.shape} != "
                                 f"({self.n_classes}, {self.n_classes + 1})")

    def copy(self):
        return ConfusionMatrix(self.n_classes, self.counts.copy(), self.ignored_pixels)


def _check_labels(arr, n_classes, which):
    bad = (arr >= n_classes) & (arr != IGNORE_VALUE)
    if bad.any():
        val = int(arr[bad][0])
        raise LabelOutOfRange(f"{which} contains label {val} with n_classes={n_classes}")


def accumulate(conf, gt, pred):
    """Tally one (ground truth, prediction) label-map pair into conf."""
    if (gt.width, gt.height) != (pred.width, pred.height):
        raise ShapeMismatch(f"gt {gt.width}x{gt.height} vs pred {pred.width}x{pred.height}")
    n = conf.n_classes
    g = gt.data.ravel().astype(np.int64)
    p = pred.data.ravel().astype(np.int64)
    _check_labels(g, n, "ground truth")
    _check_labels(p, n, "prediction")
    valid = g != IGNORE_VALUE
    conf.ignored_pixels += int((~valid).sum())
    g = g[valid]
    p = p[valid]
    p[p == IGNORE_VALUE] = n  # unlabeled-prediction column
    idx = g * (n + 1) + p
    binc = np.bincount(idx, minlength=n * (n + 1)).reshape(n, n + 1)
    conf.counts += binc.astype(np.uint64)
    return conf


def merge(a, b):
    """Combine two confusion matrices; addition makes batch order irrelevant."""
    if a.n_classes != b.n_classes:
        raise ValueError("class counts differ")
    return ConfusionMatrix(a.n_classes, a.counts + b.counts,
                           a.ignored_pixels + b.ignored_pixels)


def iou(conf, c):
    """Per-class IoU percent, or None when the class is absent everywhere."""
    counts = conf.counts.astype(np.float64)
    tp = counts[c, c]
    fp = counts[:, c].sum() - tp
    fn = counts[c, :].sum() - tp
    denom = tp + fp + fn
    if denom == 0.0:
        return None
    return 100.0 * tp / denom


def pixel_accuracy(conf):
    """Overall accuracy: correctly labeled pixels over all valid pixels."""
    counts = conf.counts.astype(np.float64)
    total = counts.sum()
    if total == 0.0:
        raise EmptyMatrix("no valid pixels accumulated")
    correct = np.trace(counts[:, :conf.n_classes])
    return 100.0 * correct / total


def per_class_accuracy(conf, c):
    """Binary accuracy for one class: (TP + TN) / all valid pixels."""
    counts = conf.counts.astype(np.float64)
    total = counts.sum()
    if total == 0.0:
        raise EmptyMatrix("no valid pixels accumulated")
    tp = counts[c, c]
    fp = counts[:, c].sum() - tp
    fn = counts[c, :].sum() - tp
    tn = total - tp - fp - fn
    return 100.0 * (tp + tn) / total


@dataclass
class MetricsReport:
    per_class_iou: list  # percent; 0.0 for absent classes
    miou: float
    pixel_accuracy: float
    per_class_presence: list
    per_class_accuracy: list = field(default_factory=list)

    def to_json(self):
        return {
            "per_class_iou": self.per_class_iou,
            "miou": self.miou,
            "pixel_accuracy": self.pixel_accuracy,
            "per_class_presence": self.per_class_presence,
            "per_class_accuracy": self.per_class_accuracy,
        }


def report(conf):
    """Assemble per-class IoU, mIoU over present classes, and PA."""
    ious, presence, accs = [], [], []
    for c in range(conf.n_classes):
        v = iou(conf, c)
        presence.append(v is not None)
        ious.append(v if v is not None else 0.0)
        accs.append(per_class_accuracy(conf, c))
    present_vals = [v for v, p in zip(ious, presence) if p]
    miou = float(np.mean(present_vals)) if present_vals else 0.0
    return MetricsReport(per_class_iou=ious, miou=miou,
                         pixel_accuracy=pixel_accuracy(conf),
                         per_class_presence=presence,
                         per_class_accuracy=accs)


def report_from_json(doc):
    return MetricsReport(
        per_class_iou=doc["per_class_iou"],
        miou=doc["miou"],
        pixel_accuracy=doc["pixel_accuracy"],
        per_class_presence=doc["per_class_presence"],
        per_class_accuracy=doc.get("per_class_accuracy", []),
    )


def write_report(rep, path):
    Path(path).write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True))
