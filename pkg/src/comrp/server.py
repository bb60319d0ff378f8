"""Review service for the human cluster-merging step.

Serves clusters, exemplar crops, pseudo-label previews, and metrics over
JSON/HTTP, and serializes merge-map edits behind an optimistic revision
check (409 on stale writes). The built review UI, when present, is hosted
statically at /."""

import io
import json
import os
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Header, Response
from fastapi.responses import JSONResponse
from PIL import Image

from . import clustering, labeling, masks as masks_mod, pipeline
from .metrics import ConfusionMatrix, accumulate, report

REVISION_HEADER = "X-Expected-Revision"
PREVIEW_CACHE_SIZE = 64
PREVIEW_ALPHA = 0.5
THUMBNAIL_SIZE = 224

# fixed class tint palette, cycled when a merge map defines more classes
PALETTE = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
    (152, 223, 138), (255, 152, 150), (197, 176, 213), (196, 156, 148),
    (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
]


class SessionState:
    """Everything one review session needs, plus the merge-map writer lock."""

    def __init__(self, model, images, mask_records, merge_path, gt_dir=None):
        self.model = model
        self.images = {img.image_id: img for img in images}
        self.masks_by_id = {m.mask_id: m for m in mask_records}
        self.masks_by_image = pipeline.group_masks_by_image(images, mask_records)
        self.merge_path = Path(merge_path)
        self.gt_dir = Path(gt_dir) if gt_dir else None
        self.lock = threading.Lock()
        self._previews = OrderedDict()
        if self.merge_path.exists():
            self.merge = labeling.load_merge_map(self.merge_path)
            self.revision = 1
        else:
            self.merge = None
            self.revision = 0

    def snapshot(self):
        with self.lock:
            return self.merge, self.revision

    def commit_merge(self, merge):
        tmp = self.merge_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(merge.to_json(), indent=2, sort_keys=True))
        os.replace(tmp, self.merge_path)
        self.merge = merge
        self.revision += 1
        return self.revision

    def preview_cache_get(self, key):
        with self.lock:
            if key in self._previews:
                self._previews.move_to_end(key)
                return self._previews[key]
        return None

    def preview_cache_put(self, key, value):
        with self.lock:
            self._previews[key] = value
            self._previews.move_to_end(key)
            while len(self._previews) > PREVIEW_CACHE_SIZE:
                self._previews.popitem(last=False)


def load_state(model_path, masks_dir, manifest_path, merge_path, gt_dir=None):
    model = clustering.load_model(model_path)
    images = masks_mod.load_manifest(manifest_path)
    mask_records = masks_mod.load_mask_dir(masks_dir)
    return SessionState(model, images, mask_records, merge_path, gt_dir=gt_dir)


def _class_map(state, merge):
    """region_id -> class index under a merge map; unmapped clusters and
    DISCARD both drop out."""
    if merge is None:
        return {}
    out = {}
    for region_id, cid in state.model.assignments.items():
        val = merge.mapping.get(cid, labeling.DISCARD)
        if val != labeling.DISCARD:
            out[region_id] = val
    return out


def _render_preview(state, image_id, merge):
    image = state.images[image_id]
    rgb = pipeline.load_image_rgb(image).astype(np.float64)
    class_map = _class_map(state, merge)
    pairs = [(m, class_map[m.mask_id])
             for m in state.masks_by_image[image_id] if m.mask_id in class_map]
    label = labeling.rasterize(image, pairs).data
    out = rgb.copy()
    for cls in np.unique(label):
        if cls == labeling.IGNORE_VALUE:
            continue
        tint = np.asarray(PALETTE[int(cls) % len(PALETTE)], dtype=np.float64)
        sel = label == cls
        out[sel] = (1.0 - PREVIEW_ALPHA) * rgb[sel] + PREVIEW_ALPHA * tint
    buf = io.BytesIO()
    Image.fromarray(np.rint(out).clip(0, 255).astype(np.uint8), "RGB").save(buf, "PNG")
    return buf.getvalue()


def _compute_metrics(state, merge):
    n_classes = len(merge.classes)
    class_map = _class_map(state, merge)
    conf = ConfusionMatrix(n_classes)
    found = False
    for image_id in sorted(state.images):
        gt_path = state.gt_dir / f"{image_id}.png"
        if not gt_path.exists():
            continue
        image = state.images[image_id]
        pairs = [(m, class_map[m.mask_id])
                 for m in state.masks_by_image[image_id] if m.mask_id in class_map]
        pred = labeling.rasterize(image, pairs)
        accumulate(conf, labeling.read_label_png(gt_path), pred)
        found = True
    return report(conf) if found else None


def create_app(state, ui_dir=None):
    app = FastAPI(title="comrp review service")

    @app.get("/api/clusters")
    def clusters():
        merge, revision = state.snapshot()
        sizes = state.model.cluster_sizes()
        rows = []
        for cid in sorted(state.model.exemplars):
            mapping = merge.mapping.get(cid) if merge else None
            rows.append({
                "cluster_id": cid,
                "size": sizes.get(cid, 0),
                "exemplars": state.model.exemplars[cid],
                "mapping": mapping,
            })
        return {"revision": revision, "clusters": rows}

    @app.get("/api/mergemap")
    def get_mergemap():
        merge, revision = state.snapshot()
        return {"revision": revision,
                "mergemap": merge.to_json() if merge else None}

    @app.put("/api/mergemap")
    def put_mergemap(body: dict, x_expected_revision: int = Header(None, alias=REVISION_HEADER)):
        with state.lock:
            if x_expected_revision is None or x_expected_revision != state.revision:
                return JSONResponse(status_code=409, content={
                    "error": "revision mismatch",
                    "current_revision": state.revision,
                })
            try:
                merge = labeling.merge_map_from_json(body)
            except (KeyError, ValueError, TypeError) as exc:
                return JSONResponse(status_code=422, content={"error": str(exc)})
            cluster_ids = set(state.model.assignments.values())
            missing = sorted(cluster_ids - set(merge.mapping))
            if missing:
                return JSONResponse(status_code=422, content={
                    "error": "unmapped clusters", "missing": missing,
                })
            revision = state.commit_merge(merge)
        return {"revision": revision}

    @app.get("/api/regions/{mask_id}/crop.png")
    def region_crop(mask_id: str):
        mask = state.masks_by_id.get(mask_id)
        if mask is None or mask.area == 0:
            return JSONResponse(status_code=404, content={"error": f"unknown mask {mask_id}"})
        rgb = pipeline.load_image_rgb(state.images[mask.image_id])
        crop = masks_mod.crop_region(rgb, mask, out_size=THUMBNAIL_SIZE)
        buf = io.BytesIO()
        Image.fromarray(crop, "RGB").save(buf, "PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/images")
    def images():
        rows = []
        for image_id in sorted(state.images):
            img = state.images[image_id]
            has_gt = bool(state.gt_dir and (state.gt_dir / f"{image_id}.png").exists())
            rows.append({"image_id": image_id, "width": img.width,
                         "height": img.height, "has_gt": has_gt})
        return rows

    @app.get("/api/images/{image_id}/preview")
    def preview(image_id: str):
        if image_id not in state.images:
            return JSONResponse(status_code=404, content={"error": f"unknown image {image_id}"})
        merge, revision = state.snapshot()
        key = (image_id, revision)
        cached = state.preview_cache_get(key)
        if cached is None:
            cached = _render_preview(state, image_id, merge)
            state.preview_cache_put(key, cached)
        return Response(content=cached, media_type="image/png")

    @app.get("/api/metrics")
    def metrics():
        merge, _ = state.snapshot()
        if state.gt_dir is None:
            return JSONResponse(status_code=404, content={"error": "no ground truth loaded"})
        if merge is None:
            return JSONResponse(status_code=404, content={"error": "no merge map saved yet"})
        rep = _compute_metrics(state, merge)
        if rep is None:
            return JSONResponse(status_code=404, content={"error": "no ground-truth files found"})
        return rep.to_json()

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
