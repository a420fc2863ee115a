import pytest
import torch

# Tests call backward() directly; the oneDNN 1x1 weight-gradient kernel in
# this torch build overruns its buffer, so keep the mkldnn backend off.
torch.backends.mkldnn.enabled = False

import datagen
from rgbdsod import ModelConfig, TrainConfig
from rgbdsod.data import load_manifest
from rgbdsod.train import train

TOY_SIZES = [(48, 64), (97, 53), (64, 64), (80, 40), (33, 29)]


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyset")
    datagen.make_toy_dataset(root, TOY_SIZES, seed=11)
    return root


@pytest.fixture(scope="session")
def tiny_model_config():
    return ModelConfig(width_scale=0.0625, input_size=128, seed=5)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, toy_root, tiny_model_config):
    """One-epoch checkpoint over the toy set, shared by inference tests."""
    out = tmp_path_factory.mktemp("tinyrun")
    train_config = TrainConfig(epochs=1, batch_size=5, lr=1e-3,
                               checkpoint_every=0)
    manifest = load_manifest(toy_root)
    return train(manifest, tiny_model_config, train_config, out)
