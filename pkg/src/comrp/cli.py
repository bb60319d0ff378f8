"""comrp command-line interface."""

import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import clustering, labeling, pipeline, selftrain, synth as synth_mod, toymodel
from ._kernels import BACKEND
from .errors import ComrpError
from .features import FeaturePack, read_pack, write_pack, BASELINE_TAG, baseline_features
from .masks import (DEFAULT_AREA_THRESHOLD, compute_coverage, filter_by_area,
                    load_manifest, load_mask_dir, load_mask_file, resize_bilinear,
                    validate_mask, write_mask_file)
from .metrics import write_report
from .tiler import DEFAULT_TILE_SIZE, cut_tiles, denormalize_box, load_detections, plan_tiles


@click.group()
@click.version_option(package_name="comrp")
def main():
    """Mask clustering, pseudo-label synthesis, and self-training toolkit."""


@main.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--n", "n_images", type=int, default=40, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--image-size", type=int, default=256, show_default=True)
@click.option("--split-prob", type=float, default=0.0, show_default=True)
@click.option("--dilate-px", type=int, default=0, show_default=True)
def synth(seed, n_images, out, image_size, split_prob, dilate_px):
    """Generate the deterministic synthetic fixture dataset."""
    cfg = synth_mod.SynthConfig(
        seed=seed, n_images=n_images, image_size=image_size,
        mask_noise=synth_mod.MaskNoise(split_prob=split_prob, dilate_px=dilate_px))
    summary = synth_mod.generate(cfg, out)
    click.echo(json.dumps(summary))


@main.group()
def masks():
    """Inspect, filter, and summarize mask proposals."""


def _load_dataset(manifest, masks_dir):
    images = load_manifest(manifest)
    records = load_mask_dir(masks_dir)
    return images, records


@masks.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
def validate(manifest, masks_dir, out):
    """Decode every mask and check stored area/bbox against the pixels."""
    images, records = _load_dataset(manifest, masks_dir)
    by_id = {img.image_id: img for img in images}
    errors = []
    for m in records:
        if m.image_id not in by_id:
            errors.append(f"mask {m.mask_id}: unknown image {m.image_id}")
            continue
        try:
            validate_mask(m, by_id[m.image_id])
        except ComrpError as exc:
            errors.append(str(exc))
    doc = {"ok": not errors, "mask_count": len(records), "errors": errors}
    if out:
        Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True))
    click.echo(json.dumps({"ok": doc["ok"], "mask_count": len(records),
                           "error_count": len(errors)}))
    if errors:
        raise SystemExit(1)


@masks.command("filter")
@click.option("--theta", type=int, default=DEFAULT_AREA_THRESHOLD, show_default=True)
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def filter_cmd(theta, manifest, masks_dir, out):
    """Keep masks with area strictly greater than theta."""
    images, _ = _load_dataset(manifest, masks_dir)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kept_total = dropped_total = 0
    for img in images:
        path = Path(masks_dir) / f"{img.image_id}.json"
        records = load_mask_file(path) if path.exists() else []
        kept, dropped = filter_by_area(records, theta)
        kept_total += len(kept)
        dropped_total += len(dropped)
        write_mask_file(img.image_id, kept, out_dir / f"{img.image_id}.json")
    click.echo(json.dumps({"kept": kept_total, "dropped": dropped_total, "theta": theta}))


@masks.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), required=True)
@click.option("--theta", type=int, default=DEFAULT_AREA_THRESHOLD, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def coverage(manifest, masks_dir, theta, out):
    """Per-image and dataset mask coverage plus a size census at theta."""
    images, records = _load_dataset(manifest, masks_dir)
    rep = compute_coverage(images, records, theta=theta)
    Path(out).write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True))
    click.echo(json.dumps({"dataset_mean": rep.dataset_mean,
                           "masks": rep.mask_count_total}))


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--detections", "det_dir", type=click.Path(exists=True), required=True)
@click.option("--tile-size", type=int, default=DEFAULT_TILE_SIZE, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def tile(manifest, det_dir, tile_size, out):
    """Cut kept detection boxes into fixed-size tiles at original resolution."""
    images = load_manifest(manifest)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tile_records = []
    for img in images:
        det_path = Path(det_dir) / f"{img.image_id}.json"
        if not det_path.exists():
            continue
        dets = load_detections(det_path)
        rgb = pipeline.load_image_rgb(img)
        for det in dets.detections:
            if not det.keep:
                continue
            box = denormalize_box(det.box, img.width, img.height, dets.resize_long_side)
            plan = plan_tiles(img.image_id, box, tile_size, img.width, img.height,
                              resize_long_side=dets.resize_long_side)
            for tile_id, raster in cut_tiles(rgb, plan):
                Image.fromarray(raster, "RGB").save(out_dir / f"{tile_id}.png")
                tile_records.append({"image_id": tile_id, "width": tile_size,
                                     "height": tile_size, "path": f"{tile_id}.png"})
    (out_dir / "manifest.json").write_text(json.dumps(tile_records, indent=2, sort_keys=True))
    click.echo(json.dumps({"tiles": len(tile_records)}))


@main.group()
def features():
    """Feature-pack tools."""


@features.command("extract-baseline")
@click.option("--crops", "crops_dir", type=click.Path(exists=True), default=None,
              help="Directory of region crop PNGs named {region_id}.png.")
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
def extract_baseline(crops_dir, manifest, masks_dir, out, workers):
    """Baseline features from crop PNGs, or straight from manifest + masks."""
    if crops_dir:
        region_ids, rows = [], []
        for p in sorted(Path(crops_dir).glob("*.png")):
            with Image.open(p) as im:
                rgb = np.asarray(im.convert("RGB"))
            if rgb.shape[:2] != (224, 224):
                rgb = resize_bilinear(rgb, 224, 224)
            region_ids.append(p.stem)
            rows.append(baseline_features(rgb))
        matrix = np.stack(rows).astype(np.float32) if rows else np.zeros((0, 152), np.float32)
        pack = FeaturePack(dim=matrix.shape[1], region_ids=region_ids,
                           matrix=matrix, source_tag=BASELINE_TAG)
    elif manifest and masks_dir:
        images, records = _load_dataset(manifest, masks_dir)
        pack = pipeline.extract_baseline_pack(images, records, workers=workers)
    else:
        raise click.UsageError("provide --crops, or --manifest with --masks")
    write_pack(pack, out)
    click.echo(json.dumps({"regions": pack.count, "dim": pack.dim}))


@features.command("validate")
@click.argument("pack_path", type=click.Path(exists=True))
def features_validate(pack_path):
    """Check magic, header consistency, and finiteness of a feature pack."""
    pack = read_pack(pack_path)
    click.echo(json.dumps({"ok": True, "regions": pack.count, "dim": pack.dim,
                           "source_tag": pack.source_tag}))


@main.command()
@click.option("--features", "features_path", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(clustering.METHODS), default="spectral",
              show_default=True)
@click.option("--k", type=int, default=clustering.DEFAULT_K, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--affinity", type=click.Choice(("rbf_dense", "knn_graph")),
              default="rbf_dense", show_default=True)
@click.option("--sigma", type=float, default=None,
              help="Fixed RBF sigma; defaults to the median-distance heuristic.")
@click.option("--knn", type=int, default=10, show_default=True)
@click.option("--linkage", type=click.Choice(("average", "ward")), default="average",
              show_default=True)
@click.option("--max-iter", type=int, default=300, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--max-exact-n", type=int, default=8000, show_default=True)
@click.option("--l2-normalize", is_flag=True, default=False)
@click.option("--out", type=click.Path(), required=True)
def cluster(features_path, method, k, seed, affinity, sigma, knn, linkage,
            max_iter, tol, max_exact_n, l2_normalize, out):
    """Cluster a feature pack into a model of region assignments."""
    pack = read_pack(features_path)
    config = clustering.ClusterConfig(
        method=method, k=k, seed=seed,
        spectral=clustering.SpectralParams(affinity=affinity, sigma=sigma, knn=knn),
        agglo_linkage=linkage, max_iter=max_iter, tol=tol,
        max_exact_n=max_exact_n, l2_normalize=l2_normalize)
    model = clustering.cluster(pack, config)
    clustering.save_model(model, out)
    click.echo(json.dumps({"clusters": model.n_clusters, "inertia": model.inertia,
                           "backend": BACKEND}))


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--merge", "merge_path", type=click.Path(exists=True), required=True)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), required=True)
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
def rasterize(model_path, merge_path, masks_dir, manifest, out, workers):
    """Apply a merge map to a cluster model and burn pseudo-label PNGs."""
    model = clustering.load_model(model_path)
    merge = labeling.load_merge_map(merge_path)
    images, records = _load_dataset(manifest, masks_dir)
    region_classes = labeling.apply_merge(model, merge)
    written = pipeline.rasterize_dataset(images, records, region_classes, out,
                                         workers=workers)
    click.echo(json.dumps({"images": len(written)}))


def _load_classes(path):
    doc = json.loads(Path(path).read_text())
    return doc["classes"] if isinstance(doc, dict) else list(doc)


@main.command("eval")
@click.option("--gt", "gt_dir", type=click.Path(exists=True), required=True)
@click.option("--pred", "pred_dir", type=click.Path(exists=True), required=True)
@click.option("--classes", "classes_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
def eval_cmd(gt_dir, pred_dir, classes_path, out, workers):
    """Score prediction PNGs against ground truth PNGs."""
    class_names = _load_classes(classes_path)
    _, rep = pipeline.evaluate_dirs(gt_dir, pred_dir, len(class_names), workers=workers)
    write_report(rep, out)
    click.echo(json.dumps({"miou": rep.miou, "pixel_accuracy": rep.pixel_accuracy}))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_dir", type=click.Path(exists=True), required=True)
def loop(config_path, labels_dir):
    """Run the iterative self-training loop from initial pseudo-labels."""
    cfg = selftrain.load_loop_config(config_path)
    records = selftrain.run_loop(cfg, labels_dir)
    mious = [r.metrics.miou if r.metrics else None for r in records]
    click.echo(json.dumps({"iterations": len(records) - 1, "miou": mious}))


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--masks", "masks_dir", type=click.Path(exists=True), required=True)
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--merge", "merge_path", type=click.Path(), required=True)
@click.option("--gt", "gt_dir", type=click.Path(exists=True), default=None)
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
def serve(model_path, masks_dir, manifest, merge_path, gt_dir, ui_dir, host, port):
    """Serve the cluster review API (and the UI bundle when present)."""
    import uvicorn

    from .server import create_app, load_state

    state = load_state(model_path, masks_dir, manifest, merge_path, gt_dir=gt_dir)
    app = create_app(state, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


@main.command("toy-train")
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("labels", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@click.option("--seed", type=int, default=toymodel.DEFAULT_SEED, show_default=True)
def toy_train(manifest, labels, out, seed):
    """Toy trainer: per-class patch-descriptor prototypes."""
    model = toymodel.train(manifest, labels, out, seed=seed)
    click.echo(json.dumps({"n_classes": model["n_classes"]}))


@main.command("toy-predict")
@click.argument("model", type=click.Path(exists=True))
@click.argument("images", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
def toy_predict(model, images, out):
    """Toy predictor: nearest prototype within its radius, else 255."""
    n = toymodel.predict(model, images, out)
    click.echo(json.dumps({"images": n}))


if __name__ == "__main__":
    main()
