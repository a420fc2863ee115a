"""Walk through the network piece by piece: the two encoder streams, the
top-down fusion chain with its side outputs, and the fine branch that
produces the final map. Everything runs at a reduced width so the tour
finishes in seconds on a laptop CPU."""

import torch

from rgbdsod.backbone import expected_pyramid_sizes
from rgbdsod.config import ABLATION_FLAGS, ModelConfig
from rgbdsod.model import build_model, count_parameters

config = ModelConfig(width_scale=0.25, seed=0)
model = build_model(config).eval()

print("input size      :", config.input_size)
print("channel schedule:", config.scaled_channels())
print("pyramid sizes   :", expected_pyramid_sizes(config.input_size))
print("parameters      : %.2fM" % (count_parameters(model) / 1e6))
print()

g = torch.Generator().manual_seed(0)
rgb = torch.rand(1, 3, config.input_size, config.input_size, generator=g)
depth = torch.rand(1, 1, config.input_size, config.input_size, generator=g)

with torch.no_grad():
    features = model.rgb(rgb)
    print("rgb stream features:")
    for i, f in enumerate(features, start=1):
        print("  level %d: %s" % (i, tuple(f.shape)))

    prediction = model(rgb, depth)

print()
print("fused widths along the chain (deepest first):")
for level, step in zip(reversed(prediction.levels),
                       [model.abf.level6, model.abf.level5, model.abf.level4,
                        model.abf.level3, model.abf.level2, model.abf.level1]):
    print("  level %d: %d planes" % (level, step.out_planes))

print()
print("side outputs: %d maps, each %s" % (
    len(prediction.coarse), tuple(prediction.coarse[0].shape)))
print("final map   : %s, values in [%.6f, %.6f]" % (
    tuple(prediction.fine.shape),
    float(prediction.fine.min()), float(prediction.fine.max())))
print("(an untrained head saturates; training spreads the range out)")

print()
print("parameter cost of each component (drop one, count again):")
full = count_parameters(model)
for flag in ABLATION_FLAGS:
    variant = build_model(ModelConfig(width_scale=0.25, seed=0,
                                      ablations=(flag,)))
    delta = full - count_parameters(variant)
    print("  wo %-4s: %+9d" % (flag, -delta))
