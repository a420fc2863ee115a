import numpy as np
import pytest
import torch

from rgbdsod.backbone import (MIN_INPUT_SIZE, EncoderStream, TwoStreamBackbone,
                              build_backbone, check_input,
                              expected_pyramid_sizes, load_stream_weights)
from rgbdsod.config import ModelConfig

SMALL = ModelConfig(width_scale=0.0625, input_size=128, seed=5)


def test_expected_pyramid_sizes():
    assert expected_pyramid_sizes(224) == [112, 56, 28, 14, 7, 4, 2]
    assert expected_pyramid_sizes(128) == [64, 32, 16, 8, 4, 2, 1]
    assert expected_pyramid_sizes(129) == [65, 33, 17, 9, 5, 3, 2]


def test_stream_output_shapes_match_ladder():
    channels = SMALL.scaled_channels()
    # eval mode, the deepest level is 1x1 and batch statistics need more
    stream = EncoderStream(3, channels, SMALL.blocks).eval()
    maps = stream(torch.rand(1, 3, 128, 128))
    assert len(maps) == 7
    for level, (m, c, size) in enumerate(
            zip(maps, channels, expected_pyramid_sizes(128)), start=1):
        assert m.shape == (1, c, size, size), "level %d" % level


def test_backbone_two_streams(tmp_path):
    backbone = build_backbone(SMALL)
    rgb_maps, dep_maps = backbone(torch.rand(2, 3, 128, 128),
                                  torch.rand(2, 1, 128, 128))
    assert len(rgb_maps) == 7 and len(dep_maps) == 7
    assert backbone.depth.level1.conv.in_channels == 1


def test_replicate_depth_widens_the_depth_stem():
    config = ModelConfig(width_scale=0.0625, input_size=128,
                         replicate_depth=True)
    backbone = build_backbone(config)
    assert backbone.depth.level1.conv.in_channels == 3
    backbone(torch.rand(2, 3, 128, 128), torch.rand(2, 1, 128, 128))


def test_construction_rejects_small_inputs():
    with pytest.raises(ValueError, match="at least %d" % MIN_INPUT_SIZE):
        TwoStreamBackbone(ModelConfig(input_size=64))


def test_check_input_errors():
    backbone = build_backbone(SMALL)
    with pytest.raises(ValueError, match="rgb input must be"):
        backbone(torch.rand(1, 4, 128, 128), torch.rand(1, 1, 128, 128))
    with pytest.raises(ValueError, match="expects 128x128"):
        backbone(torch.rand(1, 3, 96, 96), torch.rand(1, 1, 96, 96))
    bad = torch.full((1, 1, 128, 128), float("nan"))
    with pytest.raises(ValueError, match="non-finite"):
        backbone(torch.rand(1, 3, 128, 128), bad)
    with pytest.raises(ValueError):
        check_input(torch.rand(3, 128, 128), 3, 128, "rgb")


def test_seeded_build_is_bitwise_reproducible():
    a = build_backbone(SMALL)
    b = build_backbone(SMALL)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(),
                                  b.state_dict().items()):
        assert ka == kb
        assert torch.equal(va, vb), ka
    other = build_backbone(ModelConfig(width_scale=0.0625, input_size=128,
                                       seed=6))
    assert not torch.equal(a.rgb.level1.conv.weight,
                           other.rgb.level1.conv.weight)


def test_tiny_width_still_builds():
    config = ModelConfig(width_scale=0.01, input_size=128)
    assert config.scaled_channels() == (1, 1, 1, 2, 5, 5, 5)
    backbone = build_backbone(config)
    rgb_maps, _ = backbone(torch.rand(2, 3, 128, 128),
                           torch.rand(2, 1, 128, 128))
    assert rgb_maps[0].shape[1] == 1


def test_load_stream_weights_subset(tmp_path):
    donor = build_backbone(ModelConfig(width_scale=0.0625, input_size=128,
                                       seed=21))
    target = build_backbone(SMALL)
    path = tmp_path / "weights.npz"
    arrays = {k: v.numpy() for k, v in donor.state_dict().items()
              if k.split(".")[1] in ("level1", "level2")}
    np.savez(path, **arrays)
    applied = load_stream_weights(target, path, levels=(1, 2))
    assert sorted(applied) == sorted(arrays)
    assert torch.equal(target.rgb.level1.conv.weight,
                       donor.rgb.level1.conv.weight)
    assert not torch.equal(target.rgb.level5.conv1.weight,
                           donor.rgb.level5.conv1.weight)


def test_load_stream_weights_shape_mismatch(tmp_path):
    target = build_backbone(SMALL)
    path = tmp_path / "weights.npz"
    np.savez(path, **{"rgb.level1.conv.weight": np.zeros((9, 3, 3, 3),
                                                         dtype=np.float32)})
    with pytest.raises(ValueError, match="shape mismatch"):
        load_stream_weights(target, path, levels=(1,))


def test_load_stream_weights_unknown_key(tmp_path):
    target = build_backbone(SMALL)
    path = tmp_path / "weights.npz"
    np.savez(path, **{"rgb.level1.bogus.weight": np.zeros(3,
                                                          dtype=np.float32)})
    with pytest.raises(KeyError, match="bogus"):
        load_stream_weights(target, path, levels=(1,))
