"""SGD training loop with per-step JSONL logging and resumable
checkpoints. Batch order, initialization and updates are pure functions of
the configs, so two runs with the same seed produce the same loss log."""

import json
from pathlib import Path

import numpy as np
import torch

# The bundled oneDNN jit kernel for 1x1 convolution weight gradients writes
# past the end of its reduction buffer and corrupts the heap, so convolutions
# run through the native backend whenever this module is in the process.
torch.backends.mkldnn.enabled = False

from . import data
from .checkpoint import (load_checkpoint, restore_model, restore_optimizer,
                         save_checkpoint)
from .config import save_config_file
from .losses import supervision_loss
from .model import build_model

LOG_NAME = "train_log.jsonl"
LAST_CHECKPOINT = "ckpt_last.npz"


class TrainingDiverged(RuntimeError):
    pass


def batch_tensors(batch):
    """Stack preprocessed samples into model inputs (rgb, depth, gt)."""
    rgb = torch.from_numpy(
        np.stack([s.rgb.transpose(2, 0, 1) for s in batch]))
    depth = torch.from_numpy(
        np.stack([s.depth.transpose(2, 0, 1) for s in batch]))
    gt = torch.from_numpy(np.stack([s.gt[None] for s in batch]))
    return rgb.float(), depth.float(), gt.float()


def _broadcast_gt(gt, like):
    if gt.shape != like.shape:
        raise ValueError(
            "gt shape %s does not match prediction shape %s"
            % (tuple(gt.shape), tuple(like.shape))
        )
    return gt


def make_optimizer(model, train_config):
    return torch.optim.SGD(
        model.parameters(),
        lr=train_config.lr,
        momentum=train_config.momentum,
        weight_decay=train_config.weight_decay,
    )


def train(manifest, model_config, train_config, out_dir, model=None,
          resume=None, coarse_weight_schedule=None, quiet=True):
    """Run the configured number of epochs over the manifest.

    out_dir receives config.json, train_log.jsonl and checkpoints/.
    resume takes a checkpoint path and continues after its stored epoch.
    coarse_weight_schedule optionally maps an epoch index to the side-loss
    weight for that epoch; the default keeps it constant.
    Returns the path of the final checkpoint.
    """
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    save_config_file(out_dir / "config.json", model_config, train_config)

    torch.manual_seed(model_config.seed)
    if model is None:
        model = build_model(model_config)
    optimizer = make_optimizer(model, train_config)

    start_epoch = 0
    step = 0
    if resume is not None:
        ckpt = load_checkpoint(resume)
        restore_model(model, ckpt)
        restore_optimizer(optimizer, model, ckpt)
        start_epoch = ckpt.epoch + 1
        step = ckpt.step

    if resume is not None:
        last_good = Path(resume)
    else:
        # an initial checkpoint so even a zero-epoch run leaves one behind
        last_good = ckpt_dir / LAST_CHECKPOINT
        save_checkpoint(last_good, model, model_config, train_config,
                        optimizer=optimizer, epoch=-1, step=0)
    log_path = out_dir / LOG_NAME
    log_mode = "a" if resume is not None and log_path.exists() else "w"
    model.train()

    with open(log_path, log_mode, encoding="utf-8") as log:
        for epoch in range(start_epoch, train_config.epochs):
            lr = train_config.lr_at(epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr
            weight = model_config.coarse_weight
            if coarse_weight_schedule is not None:
                weight = coarse_weight_schedule(epoch)
            batches = data.iter_batches(
                manifest, train_config.batch_size,
                size=model_config.input_size,
                seed=model_config.seed, epoch=epoch, shuffle=True,
                invert_depth=train_config.invert_depth,
                workers=train_config.workers,
            )
            for batch in batches:
                rgb, depth, gt = batch_tensors(batch)
                prediction = model(rgb, depth)
                gt = _broadcast_gt(gt, prediction.final)
                breakdown = supervision_loss(prediction, gt, weight=weight)
                if not torch.isfinite(breakdown.total):
                    raise TrainingDiverged(
                        "non-finite loss at epoch %d step %d; last good "
                        "checkpoint: %s"
                        % (epoch, step,
                           last_good if last_good is not None else "none")
                    )
                optimizer.zero_grad()
                breakdown.total.backward()
                optimizer.step()
                record = {"epoch": epoch, "step": step, "lr": lr}
                record.update(breakdown.scalars())
                log.write(json.dumps(record, sort_keys=True) + "\n")
                step += 1
            log.flush()
            last_good = ckpt_dir / LAST_CHECKPOINT
            save_checkpoint(last_good, model, model_config, train_config,
                            optimizer=optimizer, epoch=epoch, step=step)
            periodic = (
                train_config.checkpoint_every > 0
                and (epoch + 1) % train_config.checkpoint_every == 0
            )
            if periodic or epoch == train_config.epochs - 1:
                path = ckpt_dir / ("ckpt_epoch%04d.npz" % epoch)
                save_checkpoint(path, model, model_config, train_config,
                                optimizer=optimizer, epoch=epoch, step=step)
            if not quiet:
                print("epoch %d done, lr %.2e" % (epoch, lr))
    return last_good


def read_log(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
