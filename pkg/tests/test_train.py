import json
from types import SimpleNamespace

import numpy as np
import pytest
import torch

import rgbdsod.train as train_mod
from rgbdsod import data
from rgbdsod.checkpoint import load_checkpoint
from rgbdsod.config import TrainConfig, load_config_file
from rgbdsod.train import (LAST_CHECKPOINT, LOG_NAME, TrainingDiverged,
                           batch_tensors, read_log, train)

from datagen import make_toy_dataset

RECORD_KEYS = {"epoch", "step", "lr", "total", "fine", "coarse"}


@pytest.fixture(scope="module")
def quad_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("quad")
    make_toy_dataset(root, [(64, 64)] * 4, seed=13)
    return root


def _manifest(root):
    return data.load_manifest(root)


def _train_config(**overrides):
    base = dict(lr=1e-3, epochs=2, batch_size=2, checkpoint_every=0,
                workers=0)
    base.update(overrides)
    return TrainConfig(**base)


def test_run_writes_log_checkpoints_and_config(quad_root, tiny_model_config,
                                               tmp_path):
    tc = _train_config(checkpoint_every=1)
    out = tmp_path / "run"
    last = train(_manifest(quad_root), tiny_model_config, tc, out)

    records = read_log(out / LOG_NAME)
    assert len(records) == 4
    for i, record in enumerate(records):
        assert set(record) == RECORD_KEYS
        assert record["step"] == i
        assert record["epoch"] == i // 2
        assert record["lr"] == tc.lr_at(record["epoch"])
        assert len(record["coarse"]) == 6
        recomputed = record["fine"] + 0.99 * sum(record["coarse"])
        assert record["total"] == pytest.approx(recomputed, abs=1e-5)

    ckpt_dir = out / "checkpoints"
    assert last == ckpt_dir / LAST_CHECKPOINT
    assert (ckpt_dir / "ckpt_epoch0000.npz").exists()
    assert (ckpt_dir / "ckpt_epoch0001.npz").exists()
    assert load_checkpoint(last).epoch == 1

    stored_model, stored_train = load_config_file(out / "config.json")
    assert stored_model == tiny_model_config
    assert stored_train == tc


def test_zero_epoch_run_still_leaves_a_checkpoint(quad_root,
                                                  tiny_model_config,
                                                  tmp_path):
    out = tmp_path / "run"
    last = train(_manifest(quad_root), tiny_model_config,
                 _train_config(epochs=0), out)
    assert last.exists()
    assert load_checkpoint(last).epoch == -1
    assert read_log(out / LOG_NAME) == []


def test_same_seed_runs_log_identically(quad_root, tiny_model_config,
                                        tmp_path):
    tc = _train_config(epochs=1)
    manifest = _manifest(quad_root)
    train(manifest, tiny_model_config, tc, tmp_path / "a")
    train(manifest, tiny_model_config, tc, tmp_path / "b")
    log_a = read_log(tmp_path / "a" / LOG_NAME)
    log_b = read_log(tmp_path / "b" / LOG_NAME)
    assert log_a == log_b


def test_resume_matches_uninterrupted_run(quad_root, tiny_model_config,
                                          tmp_path):
    manifest = _manifest(quad_root)
    straight_out = tmp_path / "straight"
    train(manifest, tiny_model_config, _train_config(epochs=4), straight_out)

    split_out = tmp_path / "split"
    mid = train(manifest, tiny_model_config, _train_config(epochs=2),
                split_out)
    assert load_checkpoint(mid).epoch == 1
    final = train(manifest, tiny_model_config, _train_config(epochs=4),
                  split_out, resume=mid)

    straight_log = read_log(straight_out / LOG_NAME)
    split_log = read_log(split_out / LOG_NAME)
    assert [r["epoch"] for r in split_log] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert [r["step"] for r in split_log] == list(range(8))
    assert split_log == straight_log

    a = load_checkpoint(straight_out / "checkpoints" / LAST_CHECKPOINT)
    b = load_checkpoint(final)
    assert sorted(a.params) == sorted(b.params)
    for key in a.params:
        assert np.array_equal(a.params[key], b.params[key]), key


def test_non_finite_loss_aborts_with_last_checkpoint(quad_root,
                                                     tiny_model_config,
                                                     tmp_path, monkeypatch):
    def poisoned(prediction, target, weight=0.99):
        return SimpleNamespace(total=torch.tensor(float("nan")))

    monkeypatch.setattr(train_mod, "supervision_loss", poisoned)
    with pytest.raises(TrainingDiverged) as err:
        train(_manifest(quad_root), tiny_model_config,
              _train_config(epochs=1), tmp_path / "run")
    message = str(err.value)
    assert "epoch 0 step 0" in message
    assert str(tmp_path / "run" / "checkpoints" / LAST_CHECKPOINT) in message
    assert (tmp_path / "run" / "checkpoints" / LAST_CHECKPOINT).exists()


def test_coarse_weight_schedule_is_consulted_per_epoch(quad_root,
                                                       tiny_model_config,
                                                       tmp_path):
    seen = []

    def schedule(epoch):
        seen.append(epoch)
        return 0.0

    out = tmp_path / "run"
    train(_manifest(quad_root), tiny_model_config, _train_config(), out,
          coarse_weight_schedule=schedule)
    assert seen == [0, 1]
    for record in read_log(out / LOG_NAME):
        assert record["total"] == record["fine"]


def test_progress_lines_when_not_quiet(quad_root, tiny_model_config,
                                       tmp_path, capsys):
    train(_manifest(quad_root), tiny_model_config, _train_config(epochs=1),
          tmp_path / "run", quiet=False)
    assert "epoch 0 done" in capsys.readouterr().out


def test_batch_tensors_shapes(quad_root):
    manifest = _manifest(quad_root)
    batch = [data.load_sample(record, size=64)
             for record in manifest.entries[:2]]
    rgb, depth, gt = batch_tensors(batch)
    assert rgb.shape == (2, 3, 64, 64) and rgb.dtype == torch.float32
    assert depth.shape == (2, 1, 64, 64)
    assert gt.shape == (2, 1, 64, 64)
    assert set(gt.unique().tolist()) <= {0.0, 1.0}


def test_read_log_skips_blank_lines(tmp_path):
    path = tmp_path / "log.jsonl"
    path.write_text('{"a": 1}\n\n{"a": 2}\n   \n', encoding="utf-8")
    assert read_log(path) == [{"a": 1}, {"a": 2}]
