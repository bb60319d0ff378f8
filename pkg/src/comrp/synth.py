"""Deterministic synthetic dataset: solid-color shapes on a plane, with
exact ground truth and mask proposals that can be noised to mimic an
over-segmenting mask generator (splits, dilation).

Shape families map onto the kinds of road objects the real pipeline sees:
a surface plane, long stripes, thin bars, blobs, and small discs. Solid
distinct colors make the baseline extractor separate classes by
construction, so tests probe the pipeline rather than feature quality."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .labeling import DISCARD, IGNORE_VALUE, LabelMap, MergeMap, write_label_png
from .masks import ImageRecord, mask_from_bitmask, write_manifest, write_mask_file

FAMILIES = ("background_plane", "stripe", "blob", "thin_bar", "small_disc")


@dataclass(frozen=True)
class SynthClass:
    name: str
    color: tuple
    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown shape family {self.family}")


@dataclass(frozen=True)
class MaskNoise:
    split_prob: float = 0.0
    dilate_px: int = 0

    def __post_init__(self):
        if not 0.0 <= self.split_prob <= 1.0:
            raise ValueError("split_prob must be in [0, 1]")
        if self.dilate_px < 0:
            raise ValueError("dilate_px must be >= 0")


def default_classes():
    return [
        SynthClass("surface", (96, 96, 96), "background_plane"),
        SynthClass("stripe", (235, 235, 235), "stripe"),
        SynthClass("band", (220, 180, 40), "thin_bar"),
        SynthClass("patch", (40, 60, 160), "blob"),
        SynthClass("dot", (200, 60, 50), "small_disc"),
    ]


@dataclass
class SynthConfig:
    seed: int
    n_images: int
    image_size: int = 256
    classes: list = field(default_factory=default_classes)
    mask_noise: MaskNoise = field(default_factory=MaskNoise)

    def __post_init__(self):
        colors = [c.color for c in self.classes]
        if len(set(colors)) != len(colors):
            raise ValueError("class colors must be pairwise distinct")
        if self.n_images < 1 or self.image_size < 32:
            raise ValueError("need n_images >= 1 and image_size >= 32")


def _dilate(mask, px):
    out = mask.copy()
    h, w = mask.shape
    for dy in range(-px, px + 1):
        for dx in range(-px, px + 1):
            if dy == 0 and dx == 0:
                continue
            shifted = np.zeros_like(mask)
            ys = slice(max(0, dy), min(h, h + dy))
            xs = slice(max(0, dx), min(w, w + dx))
            ys_src = slice(max(0, -dy), min(h, h - dy))
            xs_src = slice(max(0, -dx), min(w, w - dx))
            shifted[ys, xs] = mask[ys_src, xs_src]
            out |= shifted
    return out


def _split_in_two(region, rng):
    """Partition a region into two non-empty halves along a bbox axis."""
    ys, xs = np.nonzero(region)
    h, w = region.shape
    yy, xx = np.mgrid[0:h, 0:w]
    if rng.integers(2) == 0:
        cut = (int(xs.min()) + int(xs.max()) + 1) // 2
        a = region & (xx < cut)
        b = region & (xx >= cut)
    else:
        cut = (int(ys.min()) + int(ys.max()) + 1) // 2
        a = region & (yy < cut)
        b = region & (yy >= cut)
    if a.any() and b.any():
        return a, b
    flat = np.flatnonzero(region.ravel())
    half = flat[: len(flat) // 2]
    a = np.zeros(region.size, dtype=bool)
    a[half] = True
    a = a.reshape(region.shape)
    return a, region & ~a


def _scene_objects(cfg, rng):
    """(class_index, bitmask) list for one image; background plane first."""
    s = cfg.image_size
    yy, xx = np.mgrid[0:s, 0:s]
    by_family = {c.family: i for i, c in enumerate(cfg.classes)}
    objs = []
    if "background_plane" in by_family:
        objs.append((by_family["background_plane"], np.ones((s, s), dtype=bool)))

    def rint(lo, hi):
        return int(rng.integers(lo, hi + 1))

    if "stripe" in by_family:
        for _ in range(2):
            wdt = rint(12, 20)
            if rng.integers(2) == 0:
                x0 = rint(0, s - wdt)
                m = (xx >= x0) & (xx < x0 + wdt)
            else:
                y0 = rint(0, s - wdt)
                m = (yy >= y0) & (yy < y0 + wdt)
            objs.append((by_family["stripe"], m))
    if "thin_bar" in by_family:
        for _ in range(rint(1, 2)):
            t = rint(4, 7)
            length = rint(120, min(220, s - 8))
            if rng.integers(2) == 0:
                y0 = rint(4, s - t - 4)
                x0 = rint(0, s - length)
                m = (yy >= y0) & (yy < y0 + t) & (xx >= x0) & (xx < x0 + length)
            else:
                x0 = rint(4, s - t - 4)
                y0 = rint(0, s - length)
                m = (xx >= x0) & (xx < x0 + t) & (yy >= y0) & (yy < y0 + length)
            objs.append((by_family["thin_bar"], m))
    if "blob" in by_family:
        for _ in range(rint(1, 2)):
            rx, ry = rint(16, 28), rint(12, 22)
            cx = rint(rx, s - 1 - rx)
            cy = rint(ry, s - 1 - ry)
            m = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
            objs.append((by_family["blob"], m))
    if "small_disc" in by_family:
        for _ in range(rint(2, 3)):
            r = rint(7, 12)
            cx = rint(r, s - 1 - r)
            cy = rint(r, s - 1 - r)
            m = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            objs.append((by_family["small_disc"], m))
    return objs


def _paint(objs_with_ids, size):
    """Canonical painter: descending area, equal areas let the smaller
    mask_id paint last. Kept separate from labeling.rasterize on purpose so
    tests can compare the two code paths."""
    order = sorted(objs_with_ids, key=lambda o: o[0], reverse=True)
    order.sort(key=lambda o: int(o[2].sum()), reverse=True)
    img = np.zeros((size, size, 3), dtype=np.uint8)
    gt = np.full((size, size), IGNORE_VALUE, dtype=np.uint8)
    return img, gt, order


def generate(cfg, out_dir):
    """Write manifest, images, ground-truth labels, mask files, and the
    oracle mask->class table under out_dir. Fully deterministic from seed."""
    out = Path(out_dir)
    for sub in ("images", "gt", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_images)
    images, oracle = [], {}
    for i in range(cfg.n_images):
        rng = np.random.default_rng(seeds[i])
        image_id = f"img_{i:03d}"
        objs = _scene_objects(cfg, rng)
        tagged = [(f"{image_id}_obj{k:02d}", cls, m) for k, (cls, m) in enumerate(objs)]

        img, gt, order = _paint(tagged, cfg.image_size)
        for _, cls, m in order:
            img[m] = cfg.classes[cls].color
            gt[m] = cls

        records = []
        for mask_id, cls, region in tagged:
            noisy = _dilate(region, cfg.mask_noise.dilate_px) if cfg.mask_noise.dilate_px else region
            if rng.random() < cfg.mask_noise.split_prob:
                part_a, part_b = _split_in_two(noisy, rng)
                pieces = [(f"{mask_id}a", part_a), (f"{mask_id}b", part_b)]
            else:
                pieces = [(mask_id, noisy)]
            for pid, piece in pieces:
                records.append(mask_from_bitmask(pid, image_id, piece))
                oracle[pid] = cls

        Image.fromarray(img, mode="RGB").save(out / "images" / f"{image_id}.png")
        write_label_png(
            LabelMap(image_id=image_id, width=cfg.image_size, height=cfg.image_size, data=gt),
            out / "gt" / f"{image_id}.png",
        )
        write_mask_file(image_id, records, out / "masks" / f"{image_id}.json")
        images.append(ImageRecord(image_id=image_id, width=cfg.image_size,
                                  height=cfg.image_size, path=f"images/{image_id}.png"))

    write_manifest(images, out / "manifest.json")
    (out / "oracle_classes.json").write_text(
        json.dumps({k: oracle[k] for k in sorted(oracle)}, indent=2, sort_keys=True)
    )
    return {"n_images": len(images), "n_masks": len(oracle),
            "classes": [c.name for c in cfg.classes]}


def oracle_merge_map(model, oracle_classes, class_names):
    """Scripted stand-in for the human: map each cluster to the majority
    oracle class of its member regions; ties pick the smaller class index."""
    votes = {}
    for region_id, cid in model.assignments.items():
        cls = oracle_classes.get(region_id)
        if cls is None:
            continue
        votes.setdefault(cid, {})
        votes[cid][cls] = votes[cid].get(cls, 0) + 1
    mapping = {}
    for cid in sorted(set(model.assignments.values())):
        tally = votes.get(cid)
        if not tally:
            mapping[cid] = DISCARD
            continue
        best = max(sorted(tally), key=lambda c: (tally[c], -c))
        mapping[cid] = int(best)
    return MergeMap(classes=list(class_names), mapping=mapping, created_by="oracle")
