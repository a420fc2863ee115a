"""Tiny synthetic RGB-D datasets for the demo scripts. The salient blob is
bright in the color image and near in the depth map, so a model can learn
the mapping from a handful of samples."""

from pathlib import Path

import numpy as np
from PIL import Image


def _save(path, arr01):
    levels = np.rint(np.clip(arr01, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(levels).save(path, format="PNG")


def make_dataset(root, sizes, seed=7):
    root = Path(root)
    rng = np.random.default_rng(seed)
    for sub in ("rgb", "depth", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    ids = []
    for i, (h, w) in enumerate(sizes):
        cy = rng.integers(h // 4, 3 * h // 4)
        cx = rng.integers(w // 4, 3 * w // 4)
        ry = rng.integers(h // 6, h // 3)
        rx = rng.integers(w // 6, w // 3)
        yy, xx = np.mgrid[0:h, 0:w]
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0

        rgb = rng.uniform(0.05, 0.25, size=(h, w, 3))
        tint = rng.uniform(0.75, 0.95, size=3)
        rgb[mask] = tint + rng.normal(0, 0.02, size=(int(mask.sum()), 3))

        depth = np.full((h, w), 0.85) + rng.normal(0, 0.02, size=(h, w))
        depth[mask] = 0.15 + rng.normal(0, 0.02, size=int(mask.sum()))

        sample_id = "img%03d" % i
        _save(root / "rgb" / (sample_id + ".png"), rgb)
        _save(root / "depth" / (sample_id + ".png"), depth)
        _save(root / "gt" / (sample_id + ".png"), mask.astype(np.float64))
        ids.append(sample_id)
    return ids
