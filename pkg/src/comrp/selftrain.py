"""Iterative teacher-student loop around an external trainer/predictor
command pair.

Iteration 0 is the clustering-stage pseudo-label set itself. Each round
trains on the current labels, predicts fresh labels for every image,
scores them against dev ground truth when available, and stops once the
mIoU improvement falls below the plateau threshold or max_iters is
reached. Completed iterations are resumable via content hashes."""

import hashlib
import json
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadPrediction, TrainerFailed
from .labeling import IGNORE_VALUE, read_label_png
from .metrics import ConfusionMatrix, accumulate, report, report_from_json
from .masks import load_manifest

TRAINER_PLACEHOLDERS = ("{manifest}", "{labels}", "{out}")
PREDICTOR_PLACEHOLDERS = ("{model}", "{images}", "{out}")
TRAINER_ENV = "COMRP_TRAINER_CMD"
PREDICTOR_ENV = "COMRP_PREDICTOR_CMD"
DEFAULT_MAX_ITERS = 3
DEFAULT_PLATEAU_EPS = 0.1


@dataclass
class LoopConfig:
    workdir: str
    manifest: str
    classes: list
    trainer_cmd: str
    predictor_cmd: str
    max_iters: int = DEFAULT_MAX_ITERS
    plateau_eps: float = DEFAULT_PLATEAU_EPS
    dev_gt_dir: str = None
    val_fraction: float = 0.0
    split_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for ph in TRAINER_PLACEHOLDERS:
            if ph not in self.trainer_cmd:
                raise ValueError(f"trainer_cmd is missing placeholder {ph}")
        for ph in PREDICTOR_PLACEHOLDERS:
            if ph not in self.predictor_cmd:
                raise ValueError(f"predictor_cmd is missing placeholder {ph}")


def load_loop_config(path, env=None):
    import os

    env = os.environ if env is None else env
    doc = json.loads(Path(path).read_text())
    return LoopConfig(
        workdir=doc["workdir"],
        manifest=doc["manifest"],
        classes=list(doc["classes"]),
        trainer_cmd=env.get(TRAINER_ENV, doc["trainer_cmd"]),
        predictor_cmd=env.get(PREDICTOR_ENV, doc["predictor_cmd"]),
        max_iters=doc.get("max_iters", DEFAULT_MAX_ITERS),
        plateau_eps=doc.get("plateau_eps", DEFAULT_PLATEAU_EPS),
        dev_gt_dir=doc.get("dev_gt_dir"),
        val_fraction=doc.get("val_fraction", 0.0),
        split_seed=doc.get("split_seed", 0),
    )


@dataclass
class IterationRecord:
    iter: int
    label_dir: str
    model_ref: str
    metrics: object  # MetricsReport or None
    wall_time: float
    content_hash: str = ""

    def to_json(self):
        return {
            "iter": self.iter,
            "label_dir": self.label_dir,
            "model_ref": self.model_ref,
            "metrics": self.metrics.to_json() if self.metrics else None,
            "wall_time": self.wall_time,
            "content_hash": self.content_hash,
        }


def record_from_json(doc):
    metrics = report_from_json(doc["metrics"]) if doc.get("metrics") else None
    return IterationRecord(iter=doc["iter"], label_dir=doc["label_dir"],
                           model_ref=doc["model_ref"], metrics=metrics,
                           wall_time=doc["wall_time"],
                           content_hash=doc.get("content_hash", ""))


def emit_manifest(images, label_dir, split_seed, val_fraction, path):
    """Training manifest: (image, label) pairs with a seeded train/val split."""
    label_dir = Path(label_dir)
    ordered = sorted(images, key=lambda i: i.image_id)
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(len(ordered))
    n_val = int(round(len(ordered) * val_fraction))
    val_idx = set(int(i) for i in perm[:n_val])
    entries = [
        {
            "image_id": img.image_id,
            "image": str(img.path),
            "label": str(label_dir / f"{img.image_id}.png"),
            "split": "val" if i in val_idx else "train",
        }
        for i, img in enumerate(ordered)
    ]
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True))
    return entries


def hash_labels(label_dir):
    """Content hash of a directory of label PNGs (names + bytes)."""
    digest = hashlib.sha256()
    for p in sorted(Path(label_dir).glob("*.png")):
        digest.update(p.name.encode())
        digest.update(p.read_bytes())
    return digest.hexdigest()


def _run_command(template, fills, failure):
    cmd = template
    for key, value in fills.items():
        cmd = cmd.replace("{" + key + "}", str(value))
    proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
    if proc.returncode != 0:
        raise failure(proc.returncode, proc.stderr[-2000:])
    return proc


def _validate_predictions(images, labels_out, n_classes):
    for img in images:
        path = Path(labels_out) / f"{img.image_id}.png"
        if not path.exists():
            raise BadPrediction(img.image_id, "prediction file missing")
        try:
            lab = read_label_png(path)
        except Exception as exc:
            raise BadPrediction(img.image_id, str(exc)) from exc
        if (lab.width, lab.height) != (img.width, img.height):
            raise BadPrediction(img.image_id,
                                f"prediction is {lab.width}x{lab.height}, "
                                f"image is {img.width}x{img.height}")
        bad = (lab.data >= n_classes) & (lab.data != IGNORE_VALUE)
        if bad.any():
            raise BadPrediction(img.image_id,
                                f"label {int(lab.data[bad][0])} outside "
                                f"[0, {n_classes}) and not 255")


def evaluate_labels(images, label_dir, gt_dir, n_classes):
    """Score label PNGs against whatever dev ground truth exists; None when
    no image has a ground-truth file."""
    conf = ConfusionMatrix(n_classes)
    found = False
    for img in images:
        gt_path = Path(gt_dir) / f"{img.image_id}.png"
        if not gt_path.exists():
            continue
        pred_path = Path(label_dir) / f"{img.image_id}.png"
        if not pred_path.exists():
            raise BadPrediction(img.image_id, "no label to evaluate")
        accumulate(conf, read_label_png(gt_path), read_label_png(pred_path))
        found = True
    return report(conf) if found else None


def run_iteration(cfg, it, current_labels, images=None):
    """One teacher-student round: train on current labels, predict new ones."""
    if images is None:
        images = load_manifest(cfg.manifest)
    iter_dir = Path(cfg.workdir) / f"iter_{it:02d}"
    labels_out = iter_dir / "labels"
    labels_out.mkdir(parents=True, exist_ok=True)
    train_manifest = iter_dir / "train_manifest.json"
    model_out = iter_dir / "model.out"

    start = time.monotonic()
    emit_manifest(images, current_labels, cfg.split_seed, cfg.val_fraction, train_manifest)
    _run_command(cfg.trainer_cmd,
                 {"manifest": train_manifest, "labels": current_labels, "out": model_out},
                 TrainerFailed)
    _run_command(cfg.predictor_cmd,
                 {"model": model_out, "images": cfg.manifest, "out": labels_out},
                 TrainerFailed)
    _validate_predictions(images, labels_out, len(cfg.classes))
    metrics = None
    if cfg.dev_gt_dir:
        metrics = evaluate_labels(images, labels_out, cfg.dev_gt_dir, len(cfg.classes))
    wall = time.monotonic() - start
    return IterationRecord(iter=it, label_dir=str(labels_out), model_ref=str(model_out),
                           metrics=metrics, wall_time=round(wall, 3),
                           content_hash=hash_labels(labels_out))


def plateau_stop(miou_history, eps):
    """True when the newest round improved by less than eps mIoU points."""
    if len(miou_history) < 2:
        return False
    return (miou_history[-1] - miou_history[-2]) < eps


def iterations_run_for_series(series, eps, max_iters):
    """How many training rounds the plateau rule allows for a given mIoU
    trajectory (index 0 = clustering stage)."""
    run = 0
    for it in range(1, min(len(series) - 1, max_iters) + 1):
        run = it
        if plateau_stop(series[: it + 1], eps):
            break
    return run


def _write_log(records, path):
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def run_loop(cfg, initial_labels):
    """Drive the full loop; returns the IterationRecord history."""
    workdir = Path(cfg.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    log_path = workdir / "loop.jsonl"
    images = load_manifest(cfg.manifest)

    existing = {}
    if log_path.exists():
        for line in log_path.read_text().splitlines():
            if line.strip():
                rec = record_from_json(json.loads(line))
                existing[rec.iter] = rec

    records = []
    zero_hash = hash_labels(initial_labels)
    if 0 in existing:
        if existing[0].content_hash != zero_hash:
            raise ValueError("workdir log does not match the initial labels; "
                             "refusing to resume")
        records.append(existing[0])
    else:
        metrics = None
        if cfg.dev_gt_dir:
            metrics = evaluate_labels(images, initial_labels, cfg.dev_gt_dir,
                                      len(cfg.classes))
        records.append(IterationRecord(iter=0, label_dir=str(initial_labels),
                                       model_ref="", metrics=metrics, wall_time=0.0,
                                       content_hash=zero_hash))
    _write_log(records, log_path)

    current_labels = records[0].label_dir
    miou_history = [records[0].metrics.miou] if records[0].metrics else []
    for it in range(1, cfg.max_iters + 1):
        if it in existing and existing[it].content_hash == hash_labels(existing[it].label_dir):
            rec = existing[it]
        else:
            rec = run_iteration(cfg, it, current_labels, images=images)
        records.append(rec)
        _write_log(records, log_path)
        current_labels = rec.label_dir
        if rec.metrics:
            miou_history.append(rec.metrics.miou)
            if plateau_stop(miou_history, cfg.plateau_eps):
                break

    scored = [r for r in records if r.metrics]
    best = max(scored, key=lambda r: r.metrics.miou).iter if scored else 0
    summary = {
        "best_iter": best,
        "iterations": [r.iter for r in records],
        "miou": [r.metrics.miou if r.metrics else None for r in records],
    }
    (workdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return records
