"""Built-in toy trainer/predictor pair for exercising the self-training
loop without a deep-learning framework.

Training averages per-class descriptors of the 9x9 patches around labeled
pixels into prototypes and records a per-class acceptance radius; the
predictor labels each pixel by the nearest prototype, or 255 when every
prototype is farther than its radius. Deterministic throughout."""

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadPrediction
from .labeling import IGNORE_VALUE, LabelMap, read_label_png, write_label_png
from .masks import load_manifest

PATCH_RADIUS = 4  # 9x9 window
DEFAULT_SEED = 17
SAMPLES_PER_CLASS_PER_IMAGE = 400
RADIUS_SLACK = 1.25


def _box_mean(plane, radius):
    """Mean over the (2r+1)^2 window clamped to the image, via integral image."""
    h, w = plane.shape
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = plane.cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    sums = ii[y1[:, None], x1[None, :]] - ii[y0[:, None], x1[None, :]] \
        - ii[y1[:, None], x0[None, :]] + ii[y0[:, None], x0[None, :]]
    areas = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums / areas


def patch_descriptors(rgb):
    """(H, W, 9) per-pixel descriptor: the pixel's own R, G, B plus box
    means of R, G, B, luminance, chroma, and gradient magnitude over its
    9x9 patch, all scaled to [0, 1]. The center color keeps thin
    structures from dissolving into their surroundings."""
    img = np.asarray(rgb, dtype=np.float64)
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    lum = 0.299 * r + 0.587 * g + 0.114 * b
    chroma = img.max(axis=2) - img.min(axis=2)
    gy, gx = np.gradient(lum)
    gmag = np.hypot(gx, gy)
    center = [r / 255.0, g / 255.0, b / 255.0]
    context = [_box_mean(p / 255.0, PATCH_RADIUS) for p in (r, g, b, lum, chroma, gmag)]
    return np.stack(center + context, axis=2)


def _load_rgb(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def train(manifest_path, labels_dir, out_path, seed=DEFAULT_SEED,
          samples_per_class=SAMPLES_PER_CLASS_PER_IMAGE):
    """Fit prototypes from a training manifest and a directory of label PNGs."""
    entries = json.loads(Path(manifest_path).read_text())
    labels_dir = Path(labels_dir)
    rng = np.random.default_rng(seed)
    samples = {}
    for entry in entries:
        if entry.get("split", "train") != "train":
            continue
        rgb = _load_rgb(entry["image"])
        label = read_label_png(labels_dir / f"{entry['image_id']}.png").data
        desc = patch_descriptors(rgb)
        desc = desc.reshape(-1, desc.shape[2])
        flat = label.ravel()
        for cls in np.unique(flat):
            if cls == IGNORE_VALUE:
                continue
            idx = np.flatnonzero(flat == cls)
            if len(idx) > samples_per_class:
                idx = np.sort(rng.choice(idx, size=samples_per_class, replace=False))
            samples.setdefault(int(cls), []).append(desc[idx])

    n_classes = max(samples) + 1 if samples else 0
    prototypes, radii = [], []
    for cls in range(n_classes):
        if cls not in samples:
            prototypes.append(None)
            radii.append(None)
            continue
        feats = np.concatenate(samples[cls], axis=0)
        proto = feats.mean(axis=0)
        dists = np.sqrt(((feats - proto) ** 2).sum(axis=1))
        prototypes.append([float(v) for v in proto])
        radii.append(float(dists.max()) * RADIUS_SLACK + 1e-9)

    model = {
        "kind": "comrp-toy-prototypes",
        "version": 1,
        "window": 2 * PATCH_RADIUS + 1,
        "n_classes": n_classes,
        "prototypes": prototypes,
        "radii": radii,
        "seed": seed,
        "samples_per_class": samples_per_class,
    }
    Path(out_path).write_text(json.dumps(model, sort_keys=True))
    return model


def predict(model_path, manifest_path, out_dir):
    """Label every image of the dataset manifest; writes {image_id}.png."""
    model = json.loads(Path(model_path).read_text())
    if model.get("kind") != "comrp-toy-prototypes":
        raise ValueError(f"{model_path} is not a toy prototype model")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    protos = [(i, np.asarray(p), model["radii"][i])
              for i, p in enumerate(model["prototypes"]) if p is not None]
    images = load_manifest(manifest_path)
    for img in images:
        rgb = _load_rgb(img.path)
        if rgb.shape[:2] != (img.height, img.width):
            raise BadPrediction(img.image_id, f"image file is {rgb.shape[1]}x{rgb.shape[0]}, "
                                              f"manifest says {img.width}x{img.height}")
        desc = patch_descriptors(rgb)
        h, w = desc.shape[:2]
        label = np.full((h, w), IGNORE_VALUE, dtype=np.uint8)
        if protos:
            dists = np.stack(
                [np.sqrt(((desc - p) ** 2).sum(axis=2)) for _, p, _ in protos], axis=2
            )
            best = dists.argmin(axis=2)
            best_dist = np.take_along_axis(dists, best[:, :, None], axis=2)[:, :, 0]
            radii = np.asarray([r for _, _, r in protos])
            class_ids = np.asarray([i for i, _, _ in protos], dtype=np.uint8)
            accepted = best_dist <= radii[best]
            label[accepted] = class_ids[best[accepted]]
        write_label_png(
            LabelMap(image_id=img.image_id, width=w, height=h, data=label),
            out / f"{img.image_id}.png",
        )
    return len(images)
