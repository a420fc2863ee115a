"""Batch inference: final saliency maps written as 8-bit grayscale PNGs at
each sample's original resolution. Inference is deterministic, so running
the same checkpoint twice produces byte-identical files."""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import data
from .checkpoint import config_diff, load_checkpoint, restore_model
from .model import build_model
from .train import batch_tensors


def load_model_for_inference(checkpoint_path, overrides=None):
    """Rebuild the model stored in a checkpoint. overrides, when given,
    must agree with the stored ModelConfig; differing fields are an error
    so a checkpoint is never silently reinterpreted."""
    ckpt = load_checkpoint(checkpoint_path)
    stored = ckpt.model_config()
    if overrides is not None:
        diff = config_diff(stored, overrides)
        if diff:
            raise ValueError(
                "checkpoint %s does not match the requested config: %s"
                % (checkpoint_path, "; ".join(diff))
            )
    model = build_model(stored)
    restore_model(model, ckpt)
    model.eval()
    return model, stored


def save_map_png(saliency, size, path):
    """Resize a float map in [0, 1] to (height, width) and store it as an
    8-bit grayscale PNG."""
    resized = data.resize_bilinear(np.asarray(saliency, dtype=np.float32),
                                   size)
    levels = np.rint(np.clip(resized, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(levels, mode="L").save(path, format="PNG")


def predict_directory(checkpoint_path, data_root, out_dir, batch_size=8,
                      invert_depth=False, workers=0):
    """Run the checkpointed model over every rgb/depth pair under
    data_root and write <out_dir>/<id>.png maps. Returns the written
    paths."""
    model, config = load_model_for_inference(checkpoint_path)
    manifest = data.load_manifest(data_root, require_gt=False)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    batches = data.iter_batches(
        manifest, batch_size, size=config.input_size, shuffle=False,
        invert_depth=invert_depth, workers=workers,
    )
    with torch.no_grad():
        for batch in batches:
            rgb, depth, _ = batch_tensors(batch)
            prediction = model(rgb, depth)
            final = prediction.final.cpu().numpy()
            for i, sample in enumerate(batch):
                path = out_dir / ("%s.png" % sample.sample_id)
                save_map_png(final[i, 0], sample.original_size, path)
                written.append(path)
    return written
