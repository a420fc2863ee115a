"""Checkpoints as flat array archives.

A checkpoint is one .npz file mapping canonical names to arrays:

    param/<state key>        model parameters and buffers
    momentum/<param key>     SGD momentum buffers, when training state is saved
    meta                     JSON string with configs, epoch and step

State keys follow the module tree, for example rgb.level3.block1.conv2.weight
or abf.level6.aspp.branch2.conv.weight.
"""

import json
from dataclasses import dataclass

import numpy as np
import torch

from .config import ModelConfig, TrainConfig, config_to_dict, _from_dict

FORMAT = "rgbdsod-checkpoint-1"


@dataclass
class Checkpoint:
    params: dict
    momentum: dict
    meta: dict

    @property
    def epoch(self):
        return self.meta.get("epoch", -1)

    @property
    def step(self):
        return self.meta.get("step", 0)

    def model_config(self):
        return _from_dict(ModelConfig, self.meta["model"], "model")

    def train_config(self):
        if "train" not in self.meta:
            return None
        return _from_dict(TrainConfig, self.meta["train"], "train")


def save_checkpoint(path, model, model_config, train_config=None,
                    optimizer=None, epoch=-1, step=0):
    arrays = {}
    for key, value in model.state_dict().items():
        arrays["param/%s" % key] = value.detach().cpu().numpy()
    if optimizer is not None:
        name_of = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p, {})
                buf = state.get("momentum_buffer")
                if buf is not None:
                    arrays["momentum/%s" % name_of[id(p)]] = \
                        buf.detach().cpu().numpy()
    meta = {
        "format": FORMAT,
        "epoch": int(epoch),
        "step": int(step),
    }
    meta.update(config_to_dict(model_config, train_config))
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(path):
    archive = np.load(path, allow_pickle=False)
    if "meta" not in archive.files:
        raise ValueError("%s is not a checkpoint archive (no meta entry)" % path)
    meta = json.loads(str(archive["meta"]))
    if meta.get("format") != FORMAT:
        raise ValueError(
            "unsupported checkpoint format %r in %s" % (meta.get("format"), path)
        )
    params = {}
    momentum = {}
    for key in archive.files:
        if key.startswith("param/"):
            params[key[len("param/"):]] = archive[key]
        elif key.startswith("momentum/"):
            momentum[key[len("momentum/"):]] = archive[key]
    return Checkpoint(params=params, momentum=momentum, meta=meta)


def config_diff(stored, requested):
    """Human-readable list of differing ModelConfig fields."""
    import dataclasses

    lines = []
    for f in dataclasses.fields(ModelConfig):
        a = getattr(stored, f.name)
        b = getattr(requested, f.name)
        if a != b:
            lines.append("%s: checkpoint=%r requested=%r" % (f.name, a, b))
    return lines


def restore_model(model, checkpoint):
    """Load checkpoint arrays into a constructed model. Any name or shape
    mismatch fails with the offending keys listed."""
    state = model.state_dict()
    missing = sorted(set(state) - set(checkpoint.params))
    unexpected = sorted(set(checkpoint.params) - set(state))
    problems = []
    if missing:
        problems.append("missing keys %r" % missing[:8])
    if unexpected:
        problems.append("unexpected keys %r" % unexpected[:8])
    for key in state:
        if key in checkpoint.params:
            have = tuple(checkpoint.params[key].shape)
            want = tuple(state[key].shape)
            if have != want:
                problems.append(
                    "shape mismatch at %s: checkpoint %s vs model %s"
                    % (key, have, want)
                )
    if problems:
        diff = config_diff(checkpoint.model_config(), model.config)
        if diff:
            problems.append("config fields differ: " + "; ".join(diff))
        raise ValueError("checkpoint does not fit the model: " +
                         "; ".join(problems))
    new_state = {}
    for key, value in state.items():
        loaded = torch.from_numpy(np.asarray(checkpoint.params[key]))
        new_state[key] = loaded.to(value.dtype)
    model.load_state_dict(new_state)
    return model


def restore_optimizer(optimizer, model, checkpoint):
    """Refill SGD momentum buffers saved under the parameter names."""
    if not checkpoint.momentum:
        return optimizer
    param_of = dict(model.named_parameters())
    for name, buf in checkpoint.momentum.items():
        if name not in param_of:
            raise ValueError("momentum entry %r has no matching parameter" % name)
        p = param_of[name]
        optimizer.state[p]["momentum_buffer"] = \
            torch.from_numpy(np.asarray(buf)).to(p.dtype)
    return optimizer
