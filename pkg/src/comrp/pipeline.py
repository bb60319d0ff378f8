"""Dataset-level glue between the single-image operations: baseline feature
extraction over a mask set, batch pseudo-label rasterization, and
directory-vs-directory evaluation.

Per-image work fans out over a thread pool; results are collected in
submission order so worker count never changes any output byte."""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .features import BASELINE_TAG, FeaturePack, baseline_features
from .labeling import rasterize, write_label_png
from .masks import crop_region, validate_mask
from .metrics import ConfusionMatrix, accumulate, report
from .labeling import read_label_png


def load_image_rgb(image):
    with Image.open(image.path) as im:
        rgb = np.asarray(im.convert("RGB"))
    if rgb.shape[:2] != (image.height, image.width):
        raise ValueError(f"{image.image_id}: file is {rgb.shape[1]}x{rgb.shape[0]}, "
                         f"manifest says {image.width}x{image.height}")
    return rgb


def _map_ordered(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def group_masks_by_image(images, masks):
    by_image = {img.image_id: [] for img in images}
    for m in masks:
        by_image[m.image_id].append(m)
    return by_image


def extract_baseline_pack(images, masks, out_size=224, workers=1, validate=False):
    """Baseline features for every non-empty mask, row order = sorted image
    order then mask-file order."""
    by_image = group_masks_by_image(images, masks)
    ordered_images = sorted(images, key=lambda i: i.image_id)

    def per_image(image):
        rgb = load_image_rgb(image)
        rows = []
        for m in by_image[image.image_id]:
            if validate:
                validate_mask(m, image)
            if m.area == 0:
                continue
            crop = crop_region(rgb, m, out_size=out_size)
            rows.append((m.mask_id, baseline_features(crop)))
        return rows

    region_ids, vectors = [], []
    for rows in _map_ordered(per_image, ordered_images, workers):
        for mask_id, vec in rows:
            region_ids.append(mask_id)
            vectors.append(vec)
    matrix = np.stack(vectors).astype(np.float32) if vectors else np.zeros((0, 152), np.float32)
    return FeaturePack(dim=matrix.shape[1], region_ids=region_ids,
                       matrix=matrix, source_tag=BASELINE_TAG)


def rasterize_dataset(images, masks, region_classes, out_dir, workers=1):
    """Write one pseudo-label PNG per image; regions absent from
    region_classes (discarded) are never painted."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_image = group_masks_by_image(images, masks)

    def per_image(image):
        pairs = [(m, region_classes[m.mask_id])
                 for m in by_image[image.image_id] if m.mask_id in region_classes]
        label = rasterize(image, pairs)
        write_label_png(label, out / f"{image.image_id}.png")
        return image.image_id

    return _map_ordered(per_image, sorted(images, key=lambda i: i.image_id), workers)


def evaluate_dirs(gt_dir, pred_dir, n_classes, workers=1):
    """Confusion matrix over every PNG pair in two directories, paired by
    filename; the ground-truth directory defines the image set."""
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    gt_files = sorted(gt_dir.glob("*.png"))
    if not gt_files:
        raise ValueError(f"no ground-truth PNGs in {gt_dir}")
    missing = [p.name for p in gt_files if not (pred_dir / p.name).exists()]
    if missing:
        raise ValueError(f"predictions missing for: {', '.join(missing[:5])}")

    def per_file(gt_path):
        conf = ConfusionMatrix(n_classes)
        accumulate(conf, read_label_png(gt_path), read_label_png(pred_dir / gt_path.name))
        return conf

    parts = _map_ordered(per_file, gt_files, workers)
    total = ConfusionMatrix(n_classes)
    for part in parts:
        total.counts += part.counts
        total.ignored_pixels += part.ignored_pixels
    return total, report(total)
