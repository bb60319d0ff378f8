import json
from pathlib import Path

import pytest

from comrp import clustering, labeling, pipeline, synth
from comrp.masks import load_manifest, load_mask_dir

SYNTH_SEED = 7
SYNTH_N = 40
CLASS_NAMES = ["surface", "stripe", "band", "patch", "dot"]


@pytest.fixture(scope="session")
def synth_ds(tmp_path_factory):
    """The seed-7, 40-image synthetic corpus used across the suite."""
    root = tmp_path_factory.mktemp("synth40")
    cfg = synth.SynthConfig(seed=SYNTH_SEED, n_images=SYNTH_N)
    synth.generate(cfg, root)
    return {
        "root": root,
        "cfg": cfg,
        "images": load_manifest(root / "manifest.json"),
        "masks": load_mask_dir(root / "masks"),
        "oracle": json.loads((root / "oracle_classes.json").read_text()),
    }


@pytest.fixture(scope="session")
def synth_pack(synth_ds):
    return pipeline.extract_baseline_pack(synth_ds["images"], synth_ds["masks"])


@pytest.fixture(scope="session")
def synth_model(synth_pack):
    config = clustering.ClusterConfig(method="spectral", k=10, seed=SYNTH_SEED)
    return clustering.cluster(synth_pack, config)


@pytest.fixture(scope="session")
def synth_merge(synth_ds, synth_model):
    return synth.oracle_merge_map(synth_model, synth_ds["oracle"], CLASS_NAMES)


@pytest.fixture(scope="session")
def synth_labels0(synth_ds, synth_model, synth_merge, tmp_path_factory):
    out = tmp_path_factory.mktemp("labels0")
    region_classes = labeling.apply_merge(synth_model, synth_merge)
    pipeline.rasterize_dataset(synth_ds["images"], synth_ds["masks"], region_classes, out)
    return Path(out)
