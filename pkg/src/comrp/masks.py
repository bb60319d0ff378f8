"""Mask-proposal ingest: RLE codec, validation, area filtering, coverage.

Masks arrive as per-image JSON documents produced by an external mask
generator adapter. The RLE convention is row-major alternating counts
starting with a background run (first count may be 0).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMask, LengthMismatch, MaskInvalid, UnknownImage

DEFAULT_AREA_THRESHOLD = 3000
DEFAULT_CROP_SIZE = 224


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int
    path: str

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.image_id}: non-positive dimensions")


@dataclass(frozen=True)
class MaskRecord:
    mask_id: str
    image_id: str
    rle: tuple
    area: int
    bbox: tuple  # (x_min, y_min, x_max_exclusive, y_max_exclusive)

    def __post_init__(self):
        object.__setattr__(self, "rle", tuple(int(c) for c in self.rle))
        object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))
        if any(c < 0 for c in self.rle):
            raise MaskInvalid(f"mask {self.mask_id}: negative RLE count")
        fg = sum(self.rle[1::2])
        if fg != self.area:
            raise MaskInvalid(
                f"mask {self.mask_id}: area {self.area} != foreground run sum {fg}"
            )
        x0, y0, x1, y1 = self.bbox
        if self.area == 0:
            if self.bbox != (0, 0, 0, 0):
                raise MaskInvalid(f"mask {self.mask_id}: empty mask must have zero bbox")
        elif x0 >= x1 or y0 >= y1:
            raise MaskInvalid(f"mask {self.mask_id}: degenerate bbox {self.bbox}")


@dataclass
class CoverageReport:
    per_image: dict
    dataset_mean: float
    mask_count_total: int
    mask_count_below_threshold: int
    mask_count_at_or_above_threshold: int
    area_threshold: int

    def to_json(self):
        return {
            "per_image": {k: self.per_image[k] for k in sorted(self.per_image)},
            "dataset_mean": self.dataset_mean,
            "mask_count_total": self.mask_count_total,
            "mask_count_below_threshold": self.mask_count_below_threshold,
            "mask_count_at_or_above_threshold": self.mask_count_at_or_above_threshold,
            "area_threshold": self.area_threshold,
        }


def rle_decode(rle, width, height):
    """Expand run-length counts into a row-major boolean raster."""
    counts = np.asarray(rle, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise MaskInvalid("negative RLE count")
    total = int(counts.sum())
    if total != width * height:
        raise LengthMismatch(f"RLE sums to {total}, raster has {width * height} pixels")
    values = np.zeros(counts.size, dtype=bool)
    values[1::2] = True
    return np.repeat(values, counts).reshape(height, width)


def rle_encode(bitmask):
    """Encode a boolean raster; inverse of rle_decode, background run first."""
    flat = np.asarray(bitmask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def mask_from_bitmask(mask_id, image_id, bitmask):
    """Build a MaskRecord (rle, area, tight bbox) from a boolean raster."""
    b = np.asarray(bitmask, dtype=bool)
    area = int(b.sum())
    if area == 0:
        bbox = (0, 0, 0, 0)
    else:
        ys, xs = np.nonzero(b)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    return MaskRecord(mask_id=mask_id, image_id=image_id, rle=tuple(rle_encode(b)),
                      area=area, bbox=bbox)


def validate_mask(mask, image):
    """Full ingest check: decode and recompute area and bbox from pixels."""
    raster = rle_decode(mask.rle, image.width, image.height)
    area = int(raster.sum())
    if area != mask.area:
        raise MaskInvalid(f"mask {mask.mask_id}: stored area {mask.area}, raster has {area}")
    if area == 0:
        bbox = (0, 0, 0, 0)
    else:
        ys, xs = np.nonzero(raster)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    if bbox != mask.bbox:
        raise MaskInvalid(f"mask {mask.mask_id}: stored bbox {mask.bbox}, raster gives {bbox}")
    return raster


def filter_by_area(masks, theta):
    """Split masks into (kept, dropped) with the strict area > theta rule."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    kept, dropped = [], []
    for m in masks:
        (kept if m.area > theta else dropped).append(m)
    return kept, dropped


def compute_coverage(images, masks, theta=DEFAULT_AREA_THRESHOLD):
    """Union coverage per image plus a mask-size census at the given threshold."""
    by_image = {img.image_id: [] for img in images}
    for m in masks:
        if m.image_id not in by_image:
            raise UnknownImage(f"mask {m.mask_id} references unknown image {m.image_id}")
        by_image[m.image_id].append(m)

    per_image = {}
    for img in images:
        group = by_image[img.image_id]
        if not group:
            per_image[img.image_id] = 0.0
            continue
        union = np.zeros((img.height, img.width), dtype=bool)
        for m in group:
            union |= rle_decode(m.rle, img.width, img.height)
        per_image[img.image_id] = float(union.sum()) / (img.width * img.height) * 100.0

    mean = float(np.mean(list(per_image.values()))) if per_image else 0.0
    below = sum(1 for m in masks if m.area < theta)
    return CoverageReport(
        per_image=per_image,
        dataset_mean=mean,
        mask_count_total=len(masks),
        mask_count_below_threshold=below,
        mask_count_at_or_above_threshold=len(masks) - below,
        area_threshold=theta,
    )


def resize_bilinear(img, out_h, out_w):
    """Corner-aligned bilinear resize; exact at corners and on constants."""
    src = np.asarray(img, dtype=np.float64)
    h, w = src.shape[:2]

    def grid(out_n, src_n):
        if out_n == 1:
            return np.zeros(1)
        return np.arange(out_n) * (src_n - 1) / (out_n - 1)

    ys = grid(out_h, h)
    xs = grid(out_w, w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    if src.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    top = src[y0][:, x0] * (1.0 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1.0 - wx) + src[y1][:, x1] * wx
    out = top * (1.0 - wy) + bot * wy
    if np.issubdtype(np.asarray(img).dtype, np.integer):
        return np.rint(out).clip(0, 255).astype(np.uint8)
    return out


def crop_region(image_pixels, mask, out_size=DEFAULT_CROP_SIZE):
    """Cut the mask's bbox out of the image and resize to out_size square.

    Background pixels inside the bbox are kept; feature extractors see the
    full rectangular crop.
    """
    if mask.area == 0:
        raise EmptyMask(f"mask {mask.mask_id} has no foreground pixels")
    x0, y0, x1, y1 = mask.bbox
    sub = np.asarray(image_pixels)[y0:y1, x0:x1]
    return resize_bilinear(sub, out_size, out_size)


# -- file formats -------------------------------------------------------------

def load_manifest(path):
    """Dataset manifest: JSON array of ImageRecord objects. Relative image
    paths resolve against the manifest's own directory."""
    path = Path(path)
    raw = json.loads(path.read_text())
    base = path.parent
    images = []
    for r in raw:
        p = Path(r["path"])
        if not p.is_absolute():
            p = base / p
        images.append(ImageRecord(image_id=r["image_id"], width=r["width"],
                                  height=r["height"], path=str(p)))
    seen = set()
    for img in images:
        if img.image_id in seen:
            raise ValueError(f"duplicate image_id {img.image_id} in manifest")
        seen.add(img.image_id)
    return images


def write_manifest(images, path):
    rows = [{"image_id": i.image_id, "width": i.width, "height": i.height, "path": i.path}
            for i in images]
    Path(path).write_text(json.dumps(rows, indent=2, sort_keys=True))


def load_mask_file(path):
    """One per-image mask document: {"image_id", "masks": [...]}."""
    doc = json.loads(Path(path).read_text())
    image_id = doc["image_id"]
    return [
        MaskRecord(mask_id=m["mask_id"], image_id=image_id, rle=tuple(m["rle"]),
                   area=m["area"], bbox=tuple(m["bbox"]))
        for m in doc["masks"]
    ]


def write_mask_file(image_id, masks, path):
    doc = {
        "image_id": image_id,
        "masks": [
            {"mask_id": m.mask_id, "rle": list(m.rle), "area": m.area, "bbox": list(m.bbox)}
            for m in masks
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_mask_dir(masks_dir):
    """All mask documents in a directory, sorted by filename."""
    masks = []
    for p in sorted(Path(masks_dir).glob("*.json")):
        masks.extend(load_mask_file(p))
    return masks
