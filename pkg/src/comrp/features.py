"""Per-region feature exchange format and the non-neural baseline extractor.

The .cmrp container carries a dense float32 matrix of one representation
vector per region. External backbones write the same format through their
own adapters; source_tag records which extractor produced the pack.

Layout: magic "CMRP" | u32 version | u32 dim | u64 count |
count*dim little-endian f32 row-major | UTF-8 JSON trailer
{"region_ids": [...], "source_tag": "..."} | u64 trailer length.
All integers little-endian. The trailing length field makes the trailer
seekable from the end of the file.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, BadShape, DimMismatch, NonFiniteValue

MAGIC = b"CMRP"
FORMAT_VERSION = 1
BASELINE_DIM = 152
BASELINE_TAG = "baseline-v1"

_HEADER = struct.Struct("<4sIIQ")
_TAIL = struct.Struct("<Q")


@dataclass
class FeaturePack:
    dim: int
    region_ids: list
    matrix: np.ndarray  # (count, dim) float32
    source_tag: str
    version: int = FORMAT_VERSION

    @property
    def count(self):
        return len(self.region_ids)

    def __eq__(self, other):
        if not isinstance(other, FeaturePack):
            return NotImplemented
        return (
            self.version == other.version
            and self.dim == other.dim
            and self.region_ids == other.region_ids
            and self.source_tag == other.source_tag
            and self.matrix.shape == other.matrix.shape
            and np.array_equal(self.matrix, other.matrix)
        )


def _validate_pack(pack):
    m = pack.matrix
    if m.ndim != 2 or m.shape != (len(pack.region_ids), pack.dim):
        raise DimMismatch(
            f"matrix shape {m.shape} vs {len(pack.region_ids)} ids x dim {pack.dim}"
        )
    if pack.dim < 1:
        raise DimMismatch("dim must be >= 1")
    if len(set(pack.region_ids)) != len(pack.region_ids):
        raise DimMismatch("region_ids are not unique")
    finite = np.isfinite(m).all(axis=1) if m.size else np.ones(m.shape[0], dtype=bool)
    if not finite.all():
        raise NonFiniteValue(int(np.flatnonzero(~finite)[0]))


def write_pack(pack, path):
    _validate_pack(pack)
    matrix = np.ascontiguousarray(pack.matrix, dtype="<f4")
    trailer = json.dumps(
        {"region_ids": list(pack.region_ids), "source_tag": pack.source_tag},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, pack.version, pack.dim, len(pack.region_ids)))
        fh.write(matrix.tobytes())
        fh.write(trailer)
        fh.write(_TAIL.pack(len(trailer)))
    return Path(path)


def read_pack(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + _TAIL.size or data[:4] != MAGIC:
        raise BadMagic(f"{path} is not a feature pack")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    matrix_bytes = 4 * dim * count
    (trailer_len,) = _TAIL.unpack_from(data, len(data) - _TAIL.size)
    expected = _HEADER.size + matrix_bytes + trailer_len + _TAIL.size
    if len(data) != expected:
        raise DimMismatch(f"file size {len(data)} != expected {expected} from header")
    matrix = np.frombuffer(
        data, dtype="<f4", count=dim * count, offset=_HEADER.size
    ).reshape(count, dim).copy()
    trailer_start = _HEADER.size + matrix_bytes
    trailer = json.loads(data[trailer_start:trailer_start + trailer_len].decode("utf-8"))
    region_ids = list(trailer["region_ids"])
    if len(region_ids) != count:
        raise DimMismatch(f"{len(region_ids)} region ids for count {count}")
    pack = FeaturePack(dim=dim, region_ids=region_ids, matrix=matrix,
                       source_tag=trailer["source_tag"], version=version)
    _validate_pack(pack)
    return pack


# -- baseline extractor -------------------------------------------------------

def _safe_l1(v):
    # all-zero blocks stay zero instead of dividing by zero
    s = v.sum()
    return v / s if s > 0 else v


def _grid_bounds(size, cells):
    return [(i * size) // cells for i in range(cells + 1)]


def _luminance(rgb):
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def baseline_features(crop):
    """152-dim deterministic descriptor of a 224x224 RGB crop.

    Concatenates the attributes clustering keys on: color (three 16-bin
    channel histograms, 48 dims), shape (8-bin gradient-orientation
    histograms over a 2x2 grid, magnitude weighted, 32 dims) and coarse
    layout (6x6 luminance plus chroma grid, 72 dims).
    """
    img = np.asarray(crop)
    if img.shape != (224, 224, 3):
        raise BadShape(f"expected 224x224x3 RGB crop, got {img.shape}")
    img = img.astype(np.float64)

    parts = []
    for ch in range(3):
        bins = np.bincount((img[:, :, ch].astype(np.int64) >> 4).ravel(), minlength=16)
        parts.append(_safe_l1(bins.astype(np.float64)))

    lum = _luminance(img)
    gy, gx = np.gradient(lum)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    idx = np.clip(((ang + np.pi) / (2.0 * np.pi / 8.0)).astype(np.int64), 0, 7)
    half = 112
    for cy in range(2):
        for cx in range(2):
            sl = (slice(cy * half, (cy + 1) * half), slice(cx * half, (cx + 1) * half))
            hist = np.bincount(idx[sl].ravel(), weights=mag[sl].ravel(), minlength=8)
            parts.append(_safe_l1(hist))

    lum01 = lum / 255.0
    chroma01 = (img.max(axis=2) - img.min(axis=2)) / 255.0
    yb = _grid_bounds(224, 6)
    xb = _grid_bounds(224, 6)
    for plane in (lum01, chroma01):
        cells = np.empty(36)
        for i in range(6):
            for j in range(6):
                cells[i * 6 + j] = plane[yb[i]:yb[i + 1], xb[j]:xb[j + 1]].mean()
        parts.append(cells)

    vec = np.concatenate(parts).astype(np.float32)
    assert vec.shape == (BASELINE_DIM,)
    return vec
