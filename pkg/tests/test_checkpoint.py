import dataclasses

import numpy as np
import pytest
import torch

from rgbdsod.checkpoint import (FORMAT, config_diff, load_checkpoint,
                                restore_model, restore_optimizer,
                                save_checkpoint)
from rgbdsod.config import ModelConfig, TrainConfig
from rgbdsod.losses import supervision_loss
from rgbdsod.model import build_model
from rgbdsod.train import make_optimizer

SMALL = ModelConfig(width_scale=0.0625, input_size=128, seed=5)
TRAIN = TrainConfig(lr=1e-3, epochs=1, batch_size=2)


def _fixed_batch(config, n=2, seed=17):
    g = torch.Generator().manual_seed(seed)
    size = config.input_size
    rgb = torch.rand(n, 3, size, size, generator=g)
    depth = torch.rand(n, 1, size, size, generator=g)
    gt = (torch.rand(n, 1, size, size, generator=g) > 0.5).float()
    return rgb, depth, gt


def _one_step(model, optimizer, batch, weight=0.99):
    rgb, depth, gt = batch
    model.train()
    prediction = model(rgb, depth)
    loss = supervision_loss(prediction, gt, weight=weight)
    optimizer.zero_grad()
    loss.total.backward()
    optimizer.step()


def test_round_trip_preserves_all_state(tmp_path):
    model = build_model(SMALL)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, SMALL, TRAIN, epoch=3, step=12)
    ckpt = load_checkpoint(path)
    assert ckpt.epoch == 3 and ckpt.step == 12
    assert ckpt.meta["format"] == FORMAT
    assert ckpt.model_config() == SMALL
    assert ckpt.train_config() == TRAIN
    state = model.state_dict()
    assert sorted(ckpt.params) == sorted(state)
    for key, value in state.items():
        assert np.array_equal(ckpt.params[key], value.numpy()), key


def test_restore_model_round_trip(tmp_path):
    model = build_model(SMALL)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, SMALL)
    other = build_model(dataclasses.replace(SMALL, seed=9))
    restore_model(other, load_checkpoint(path))
    for key, value in model.state_dict().items():
        assert torch.equal(other.state_dict()[key], value), key


def test_checkpoint_without_train_config(tmp_path):
    model = build_model(SMALL)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, SMALL)
    ckpt = load_checkpoint(path)
    assert ckpt.train_config() is None


def test_momentum_survives_and_training_continues_identically(tmp_path):
    batch1 = _fixed_batch(SMALL, seed=17)
    batch2 = _fixed_batch(SMALL, seed=23)

    straight = build_model(SMALL)
    opt_s = make_optimizer(straight, TRAIN)
    _one_step(straight, opt_s, batch1)
    _one_step(straight, opt_s, batch2)

    stop = build_model(SMALL)
    opt_p = make_optimizer(stop, TRAIN)
    _one_step(stop, opt_p, batch1)
    path = tmp_path / "mid.npz"
    save_checkpoint(path, stop, SMALL, TRAIN, optimizer=opt_p, epoch=0, step=1)

    ckpt = load_checkpoint(path)
    assert ckpt.momentum, "momentum buffers should be stored after a step"
    resumed = build_model(SMALL)
    opt_r = make_optimizer(resumed, TRAIN)
    restore_model(resumed, ckpt)
    restore_optimizer(opt_r, resumed, ckpt)
    _one_step(resumed, opt_r, batch2)

    for key, value in straight.state_dict().items():
        assert torch.equal(resumed.state_dict()[key], value), key


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "junk.npz"
    np.savez(path, a=np.zeros(3))
    with pytest.raises(ValueError, match="no meta"):
        load_checkpoint(path)


def test_wrong_format_marker(tmp_path):
    import json
    path = tmp_path / "old.npz"
    np.savez(path, meta=np.array(json.dumps({"format": "something-else"})))
    with pytest.raises(ValueError, match="unsupported checkpoint format"):
        load_checkpoint(path)


def test_restore_rejects_mismatched_architecture(tmp_path):
    model = build_model(SMALL)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, SMALL)
    wide = build_model(dataclasses.replace(SMALL, width_scale=0.125))
    with pytest.raises(ValueError) as err:
        restore_model(wide, load_checkpoint(path))
    message = str(err.value)
    assert "does not fit" in message
    assert "width_scale" in message


def test_config_diff_reports_changed_fields():
    a = SMALL
    b = dataclasses.replace(SMALL, refine_steps=2, seed=8)
    lines = config_diff(a, b)
    assert len(lines) == 2
    assert any("refine_steps" in line for line in lines)
    assert any("seed" in line for line in lines)
    assert config_diff(a, a) == []


def test_restore_optimizer_rejects_unknown_parameter(tmp_path):
    model = build_model(SMALL)
    optimizer = make_optimizer(model, TRAIN)
    _one_step(model, optimizer, _fixed_batch(SMALL))
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, SMALL, TRAIN, optimizer=optimizer)
    ckpt = load_checkpoint(path)
    ckpt.momentum["not.a.parameter"] = np.zeros(3, dtype=np.float32)
    fresh = build_model(SMALL)
    with pytest.raises(ValueError, match="no matching parameter"):
        restore_optimizer(make_optimizer(fresh, TRAIN), fresh, ckpt)
