"""Dataset discovery, decoding and preprocessing for RGB-D sample triples.

Expected on-disk layout:

    <root>/rgb/<id>.<png|jpg|jpeg>
    <root>/depth/<id>.<png>
    <root>/gt/<id>.<png>

Depth and ground-truth files are single channel, 8 or 16 bit. Samples are
matched by file stem. Incomplete triples are reported on the manifest, never
silently dropped.
"""

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

RGB_DIR = "rgb"
DEPTH_DIR = "depth"
GT_DIR = "gt"


class DataLayoutError(ValueError):
    pass


@dataclass
class SampleRecord:
    sample_id: str
    rgb_path: str
    depth_path: str
    gt_path: str = None


@dataclass
class DatasetManifest:
    name: str
    root: str
    entries: list = field(default_factory=list)
    issues: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)


@dataclass
class RgbdSample:
    """One preprocessed sample. rgb is HxWx3 in [0, 1], depth is HxWx1 in
    [0, 1] after per-image min-max normalization, gt is HxW with values in
    {0, 1}. original_size is (height, width) of the source rgb image."""

    sample_id: str
    rgb: np.ndarray
    depth: np.ndarray
    gt: np.ndarray
    original_size: tuple
    flags: tuple = ()


def _index_dir(path):
    files = {}
    for entry in sorted(path.iterdir()):
        if entry.suffix.lower() in IMAGE_EXTENSIONS:
            files[entry.stem] = entry
    return files


def _check_decodes(path):
    with Image.open(path) as img:
        img.verify()


def load_manifest(root, name=None, require_gt=True, check=True):
    """Scan a dataset root and return the manifest of complete triples,
    sorted by sample id. Missing counterpart files land in manifest.issues."""
    root = Path(root)
    if not root.is_dir():
        raise DataLayoutError("dataset root %s does not exist" % root)
    subdirs = [RGB_DIR, DEPTH_DIR] + ([GT_DIR] if require_gt else [])
    for sub in subdirs:
        if not (root / sub).is_dir():
            raise DataLayoutError(
                "dataset root %s is missing the %s/ directory" % (root, sub)
            )
    rgb = _index_dir(root / RGB_DIR)
    depth = _index_dir(root / DEPTH_DIR)
    gt = _index_dir(root / GT_DIR) if (root / GT_DIR).is_dir() else {}
    if not rgb:
        raise DataLayoutError("no images under %s" % (root / RGB_DIR))

    manifest = DatasetManifest(name=name or root.name, root=str(root))
    ids = sorted(set(rgb) | set(depth) | (set(gt) if require_gt else set()))
    for sample_id in ids:
        missing = []
        if sample_id not in rgb:
            missing.append(RGB_DIR)
        if sample_id not in depth:
            missing.append(DEPTH_DIR)
        if require_gt and sample_id not in gt:
            missing.append(GT_DIR)
        if missing:
            manifest.issues.append(
                "%s: missing %s" % (sample_id, ", ".join(missing))
            )
            continue
        record = SampleRecord(
            sample_id=sample_id,
            rgb_path=str(rgb[sample_id]),
            depth_path=str(depth[sample_id]),
            gt_path=str(gt[sample_id]) if sample_id in gt else None,
        )
        if check:
            try:
                for p in (record.rgb_path, record.depth_path, record.gt_path):
                    if p is not None:
                        _check_decodes(p)
            except Exception as exc:
                manifest.issues.append("%s: unreadable (%s)" % (sample_id, exc))
                continue
        manifest.entries.append(record)
    return manifest


def write_manifest(manifest, path):
    """Export as JSON lines, one record per line, issues last under a
    sentinel id so nothing is lost on round trip."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.entries:
            fh.write(json.dumps({
                "sample_id": rec.sample_id,
                "rgb_path": rec.rgb_path,
                "depth_path": rec.depth_path,
                "gt_path": rec.gt_path,
            }, sort_keys=True) + "\n")
        for issue in manifest.issues:
            fh.write(json.dumps({"issue": issue}, sort_keys=True) + "\n")


def read_manifest(path, name=None):
    manifest = DatasetManifest(name=name or Path(path).stem, root="")
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "issue" in doc:
                manifest.issues.append(doc["issue"])
            else:
                manifest.entries.append(SampleRecord(**doc))
    return manifest


def _resize_plane(arr, size):
    # PIL size argument is (width, height)
    img = Image.fromarray(np.ascontiguousarray(arr, dtype=np.float32), mode="F")
    out = img.resize((size[1], size[0]), Image.BILINEAR)
    return np.asarray(out, dtype=np.float32)


def resize_bilinear(arr, size):
    """Bilinear resize of a float HxW or HxWxC array to (height, width)."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 2:
        return _resize_plane(arr, size)
    planes = [_resize_plane(arr[..., c], size) for c in range(arr.shape[-1])]
    return np.stack(planes, axis=-1)


def _read_rgb(path):
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    return arr


def _read_gray(path):
    """Single channel image as float64 raw values plus the nominal maximum
    of its storage type."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr.mean(axis=-1)
    if arr.dtype == np.bool_:
        return arr.astype(np.float64), 1.0
    if arr.dtype == np.uint8:
        return arr.astype(np.float64), 255.0
    # 16 bit PNG decodes as uint16 or int32 depending on the PIL mode
    return arr.astype(np.float64), 65535.0


def preprocess_rgb(arr, size):
    out = resize_bilinear(arr.astype(np.float32) / 255.0, (size, size))
    return np.clip(out, 0.0, 1.0)


def preprocess_depth(arr, size, invert=False):
    """Min-max normalize, then resize. Returns (HxWx1 array, flags)."""
    arr = np.asarray(arr, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    flags = []
    if hi > lo:
        norm = (arr - lo) / (hi - lo)
    else:
        norm = np.full_like(arr, 0.5)
        flags.append("constant_depth")
    if invert:
        norm = 1.0 - norm
    out = resize_bilinear(norm.astype(np.float32), (size, size))
    out = np.clip(out, 0.0, 1.0)
    return out[..., None], tuple(flags)


def preprocess_gt(arr, scale, size):
    norm = arr.astype(np.float32) / scale
    out = resize_bilinear(norm, (size, size))
    return (out >= 0.5).astype(np.float32)


def load_sample(record, size=224, invert_depth=False):
    rgb_raw = _read_rgb(record.rgb_path)
    original_size = rgb_raw.shape[0], rgb_raw.shape[1]
    rgb = preprocess_rgb(rgb_raw, size)
    depth_raw, _ = _read_gray(record.depth_path)
    depth, flags = preprocess_depth(depth_raw, size, invert=invert_depth)
    if record.gt_path is not None:
        gt_raw, gt_scale = _read_gray(record.gt_path)
        gt = preprocess_gt(gt_raw, gt_scale, size)
    else:
        gt = np.zeros((size, size), dtype=np.float32)
        flags = flags + ("no_gt",)
    return RgbdSample(
        sample_id=record.sample_id,
        rgb=rgb,
        depth=depth,
        gt=gt,
        original_size=original_size,
        flags=flags,
    )


def epoch_order(n, seed, epoch, shuffle=True):
    """Sample order for one epoch, a pure function of (seed, epoch)."""
    order = np.arange(n)
    if shuffle:
        rng = np.random.default_rng([seed, epoch])
        rng.shuffle(order)
    return order


def iter_batches(manifest, batch_size, size=224, seed=0, epoch=0,
                 shuffle=True, invert_depth=False, workers=0):
    """Yield lists of preprocessed samples for one epoch. The final short
    batch is kept. Batch contents depend only on (seed, epoch) regardless
    of worker count."""
    n = len(manifest.entries)
    if n == 0:
        raise DataLayoutError("manifest %s has no complete samples" % manifest.name)
    if batch_size > n:
        warnings.warn(
            "batch_size %d exceeds dataset size %d, emitting one batch"
            % (batch_size, n)
        )
    order = epoch_order(n, seed, epoch, shuffle=shuffle)
    records = [manifest.entries[i] for i in order]

    def _load(rec):
        return load_sample(rec, size=size, invert_depth=invert_depth)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            loaded = list(pool.map(_load, records))
    else:
        loaded = [_load(rec) for rec in records]
    for start in range(0, n, batch_size):
        yield loaded[start:start + batch_size]
