"""RoI tiling: map detection boxes from resized-image coordinates back to the
original resolution and cut fixed-size tiles.

Detector and filter verdicts are consumed from a detections file, never
computed here; the `keep` flag is the external classifier's verdict.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateBox, TileExceedsImage

DEFAULT_TILE_SIZE = 800
DEFAULT_RESIZE_LONG_SIDE = 1024
DEFAULT_BOX_THRESHOLD = 0.35
DEFAULT_TEXT_THRESHOLD = 0.25


@dataclass(frozen=True)
class DetectionBox:
    image_id: str
    box: tuple  # (x0, y0, x1, y1) normalized to [0, 1] on the resized image
    score: float
    label: str
    keep: bool

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate normalized box {self.box}")


@dataclass
class TilePlan:
    source_image_id: str
    tile_size: int
    tiles: list  # (x_off, y_off) in original-resolution coordinates
    resize_long_side: int = DEFAULT_RESIZE_LONG_SIDE


def denormalize_box(box, original_w, original_h, resize_long_side=DEFAULT_RESIZE_LONG_SIDE):
    """Scale a normalized resized-image box back onto the original image.

    The resize kept aspect ratio with the longer side at resize_long_side,
    so the uniform scale factor s = max(w, h) / resize_long_side maps
    resized pixels to original pixels; normalized coords times the resized
    dims times s reduce to normalized coords times the original dims.
    Mins are floored and maxes ceiled so no road pixel is lost.
    """
    if resize_long_side < 1:
        raise ValueError("resize_long_side must be >= 1")
    if max(original_w, original_h) < resize_long_side:
        raise ValueError("original image smaller than the resize geometry")
    x0, y0, x1, y1 = box
    if x0 >= x1 or y0 >= y1:
        raise DegenerateBox(f"normalized box {box} has no area")
    px0 = max(0, math.floor(x0 * original_w))
    py0 = max(0, math.floor(y0 * original_h))
    px1 = min(original_w, math.ceil(x1 * original_w))
    py1 = min(original_h, math.ceil(y1 * original_h))
    if px0 >= px1 or py0 >= py1:
        raise DegenerateBox(f"box {box} collapses to zero area at {original_w}x{original_h}")
    return (px0, py0, px1, py1)


def _axis_offsets(a0, a1, tile, limit):
    if tile > limit:
        raise TileExceedsImage(f"tile size {tile} exceeds image extent {limit}")
    span = a1 - a0
    n = max(1, math.ceil(span / tile))
    offs = [a0 + i * tile for i in range(n)]
    # last tile pulled back to end at the box edge; edge tiles may overlap
    offs[-1] = min(offs[-1], max(a0, a1 - tile))
    offs = [min(max(o, 0), limit - tile) for o in offs]
    seen, out = set(), []
    for o in offs:
        if o not in seen:
            seen.add(o)
            out.append(o)
    return out


def plan_tiles(image_id, pixel_box, tile_size, image_w, image_h,
               resize_long_side=DEFAULT_RESIZE_LONG_SIDE):
    """Grid of tile offsets covering the box, all tiles inside the image."""
    if tile_size < 1:
        raise ValueError("tile_size must be >= 1")
    x0, y0, x1, y1 = pixel_box
    if x0 >= x1 or y0 >= y1:
        raise DegenerateBox(f"pixel box {pixel_box} has no area")
    xs = _axis_offsets(x0, x1, tile_size, image_w)
    ys = _axis_offsets(y0, y1, tile_size, image_h)
    tiles = [(x, y) for y in ys for x in xs]
    return TilePlan(source_image_id=image_id, tile_size=tile_size, tiles=tiles,
                    resize_long_side=resize_long_side)


def cut_tiles(image_pixels, plan):
    """Slice every planned tile out of the image; bit-identical sub-regions."""
    img = np.asarray(image_pixels)
    h, w = img.shape[:2]
    t = plan.tile_size
    out = []
    for x, y in plan.tiles:
        if x < 0 or y < 0 or x + t > w or y + t > h:
            raise TileExceedsImage(f"tile at ({x}, {y}) leaves the {w}x{h} image")
        tile_id = f"{plan.source_image_id}_{x}_{y}"
        out.append((tile_id, img[y:y + t, x:x + t].copy()))
    return out


@dataclass
class DetectionsFile:
    image_id: str
    resize_long_side: int
    box_threshold: float
    text_threshold: float
    detections: list = field(default_factory=list)


def load_detections(path):
    doc = json.loads(Path(path).read_text())
    image_id = doc["image_id"]
    dets = [
        DetectionBox(image_id=image_id, box=tuple(d["box"]), score=d["score"],
                     label=d["label"], keep=bool(d["keep"]))
        for d in doc["detections"]
    ]
    return DetectionsFile(
        image_id=image_id,
        resize_long_side=doc.get("resize_long_side", DEFAULT_RESIZE_LONG_SIDE),
        box_threshold=doc.get("box_threshold", DEFAULT_BOX_THRESHOLD),
        text_threshold=doc.get("text_threshold", DEFAULT_TEXT_THRESHOLD),
        detections=dets,
    )


def write_detections(det_file, path):
    doc = {
        "image_id": det_file.image_id,
        "resize_long_side": det_file.resize_long_side,
        "box_threshold": det_file.box_threshold,
        "text_threshold": det_file.text_threshold,
        "detections": [
            {"box": list(d.box), "score": d.score, "label": d.label, "keep": d.keep}
            for d in det_file.detections
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))
