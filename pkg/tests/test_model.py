import dataclasses

import pytest
import torch

from rgbdsod.config import ModelConfig
from rgbdsod.model import (RgbdSaliencyModel, SaliencyPrediction, build_model,
                           count_parameters)

SMALL = ModelConfig(width_scale=0.0625, input_size=128, seed=5)


def _batch(config, n=2):
    g = torch.Generator().manual_seed(99)
    return (torch.rand(n, 3, config.input_size, config.input_size,
                       generator=g),
            torch.rand(n, 1, config.input_size, config.input_size,
                       generator=g))


def test_forward_contract():
    model = build_model(SMALL).eval()
    rgb, depth = _batch(SMALL)
    with torch.no_grad():
        pred = model(rgb, depth)
    assert pred.levels == (1, 2, 3, 4, 5, 6)
    assert len(pred.coarse) == 6
    assert pred.fine is not None
    for m in pred.all_maps():
        assert m.shape == (2, 1, 128, 128)
        assert torch.isfinite(m).all()
        assert float(m.min()) > 0.0 and float(m.max()) < 1.0
    assert pred.final is pred.fine


def test_partial_chain_levels_and_maps():
    config = dataclasses.replace(SMALL, refine_steps=3)
    model = build_model(config).eval()
    with torch.no_grad():
        pred = model(*_batch(config))
    assert pred.levels == (4, 5, 6)
    assert len(pred.coarse) == 3


def test_without_coarse_supervision():
    config = dataclasses.replace(SMALL, ablations=("CR",))
    model = build_model(config).eval()
    with torch.no_grad():
        pred = model(*_batch(config))
    assert pred.coarse == []
    assert pred.final is pred.fine


def test_without_fine_branch_routes_to_deepest_side_output():
    config = dataclasses.replace(SMALL, ablations=("FR",))
    model = build_model(config).eval()
    assert model.fine is None
    with torch.no_grad():
        pred = model(*_batch(config))
    assert pred.fine is None
    assert pred.final is pred.coarse[-1]


def test_every_single_flag_reduces_parameters():
    full = count_parameters(build_model(SMALL))
    for flag in ("CR", "CA", "SA", "ASPP", "FR", "FA", "SC"):
        config = dataclasses.replace(SMALL, ablations=(flag,))
        assert count_parameters(build_model(config)) < full, flag


def test_zero_inputs_give_half_maps_at_init():
    # with zeroed conv biases and identity batch norm every logit is zero
    model = build_model(SMALL).eval()
    size = SMALL.input_size
    with torch.no_grad():
        pred = model(torch.zeros(1, 3, size, size),
                     torch.zeros(1, 1, size, size))
    for m in pred.all_maps():
        assert float((m - 0.5).abs().max()) < 1e-6


def test_seeded_build_is_reproducible():
    a = build_model(SMALL)
    b = build_model(SMALL)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(),
                                  b.state_dict().items()):
        assert ka == kb
        assert torch.equal(va, vb), ka
    c = build_model(dataclasses.replace(SMALL, seed=6))
    assert not torch.equal(a.abf.level6.merge.conv.weight,
                           c.abf.level6.merge.conv.weight)


def test_input_validation_through_forward():
    model = build_model(SMALL).eval()
    with pytest.raises(ValueError, match="rgb input"):
        model(torch.rand(1, 1, 128, 128), torch.rand(1, 1, 128, 128))
    with pytest.raises(ValueError, match="depth input"):
        model(torch.rand(1, 3, 128, 128), torch.rand(1, 3, 128, 128))
    with pytest.raises(ValueError, match="expects 128x128"):
        model(torch.rand(1, 3, 160, 160), torch.rand(1, 1, 160, 160))


def test_other_input_sizes_build_and_run():
    config = dataclasses.replace(SMALL, input_size=160)
    model = build_model(config).eval()
    with torch.no_grad():
        pred = model(torch.rand(2, 3, 160, 160), torch.rand(2, 1, 160, 160))
    assert pred.final.shape == (2, 1, 160, 160)


def test_construction_rejects_small_input_size():
    with pytest.raises(ValueError, match="at least 128"):
        RgbdSaliencyModel(dataclasses.replace(SMALL, input_size=96))


def test_replicate_depth_forward():
    config = dataclasses.replace(SMALL, replicate_depth=True)
    model = build_model(config).eval()
    with torch.no_grad():
        pred = model(*_batch(config))
    assert pred.final.shape == (2, 1, 128, 128)


def test_count_parameters_matches_manual_sum():
    model = build_model(SMALL)
    manual = sum(p.numel() for p in model.parameters() if p.requires_grad)
    assert count_parameters(model) == manual
    assert manual > 0


def test_prediction_without_maps_raises():
    with pytest.raises(ValueError, match="no maps"):
        SaliencyPrediction().final
