"""Cluster merging and pseudo-label rasterization.

A MergeMap records the human's cluster-to-class decisions (or DISCARD for
mixed clusters). Rasterization paints masks in descending area order so
small objects such as markings overwrite the road surface beneath them;
255 marks unpainted/ignored pixels."""

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadDepth, ForeignMask, UnmappedCluster
from .masks import rle_decode

DISCARD = "DISCARD"
IGNORE_VALUE = 255


@dataclass
class MergeMap:
    classes: list  # ordered class names
    mapping: dict  # cluster_id (int) -> class index (int) or DISCARD
    created_by: str = ""
    created_at: str = ""

    def __post_init__(self):
        if not self.created_at:
            self.created_at = datetime.now(timezone.utc).isoformat()
        clean = {}
        for cid, val in self.mapping.items():
            cid = int(cid)
            if val == DISCARD:
                clean[cid] = DISCARD
            else:
                val = int(val)
                if not 0 <= val < len(self.classes):
                    raise ValueError(f"cluster {cid} maps to class {val}, "
                                     f"only {len(self.classes)} classes defined")
                clean[cid] = val
        self.mapping = clean

    def to_json(self):
        return {
            "classes": list(self.classes),
            "mapping": {str(cid): self.mapping[cid] for cid in sorted(self.mapping)},
            "created_by": self.created_by,
            "created_at": self.created_at,
        }


def merge_map_from_json(doc):
    return MergeMap(classes=list(doc["classes"]),
                    mapping={int(k): v for k, v in doc["mapping"].items()},
                    created_by=doc.get("created_by", ""),
                    created_at=doc.get("created_at", ""))


def load_merge_map(path):
    return merge_map_from_json(json.loads(Path(path).read_text()))


def save_merge_map(merge, path):
    Path(path).write_text(json.dumps(merge.to_json(), indent=2, sort_keys=True))


@dataclass
class LabelMap:
    image_id: str
    width: int
    height: int
    data: np.ndarray = field(repr=False)  # (height, width) uint8

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        if self.data.shape != (self.height, self.width):
            raise ValueError(f"label data shape {self.data.shape} != "
                             f"({self.height}, {self.width})")


def apply_merge(model, merge):
    """Relabel cluster assignments to class indices; DISCARD regions drop out."""
    present = set(model.assignments.values())
    missing = present - set(merge.mapping)
    if missing:
        raise UnmappedCluster(list(missing))
    out = {}
    for region_id, cid in model.assignments.items():
        val = merge.mapping[cid]
        if val != DISCARD:
            out[region_id] = val
    return out


def rasterize(image, labeled_masks):
    """Burn (MaskRecord, class index) pairs into a LabelMap.

    Painting order is canonical regardless of input order: descending area,
    and for equal areas the lexicographically smaller mask_id paints last
    (wins). Unpainted pixels stay at 255.
    """
    for mask, _ in labeled_masks:
        if mask.image_id != image.image_id:
            raise ForeignMask(f"mask {mask.mask_id} belongs to {mask.image_id}, "
                              f"not {image.image_id}")
    data = np.full((image.height, image.width), IGNORE_VALUE, dtype=np.uint8)
    ordered = sorted(labeled_masks, key=lambda mc: mc[0].mask_id, reverse=True)
    ordered.sort(key=lambda mc: mc[0].area, reverse=True)
    for mask, class_index in ordered:
        if not 0 <= int(class_index) < IGNORE_VALUE:
            raise ValueError(f"class index {class_index} not paintable")
        raster = rle_decode(mask.rle, image.width, image.height)
        data[raster] = int(class_index)
    return LabelMap(image_id=image.image_id, width=image.width,
                    height=image.height, data=data)


def write_label_png(label, path):
    Image.fromarray(label.data, mode="L").save(path, format="PNG")
    return Path(path)


def read_label_png(path, image_id=None):
    with Image.open(path) as im:
        if im.mode != "L":
            raise BadDepth(f"{path}: expected single-channel 8-bit PNG, got mode {im.mode}")
        data = np.asarray(im, dtype=np.uint8)
    if image_id is None:
        image_id = Path(path).stem
    return LabelMap(image_id=image_id, width=data.shape[1], height=data.shape[0],
                    data=data)
